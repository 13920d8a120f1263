#include "nam/align/regulate.hpp"

#include <numeric>

namespace nam::align {

Durations upsample_durations(const Durations& durations, int factor) {
  if (factor < 1) throw ContractError("upsample_durations: factor must be >= 1");
  Durations out = durations;
  for (int& d : out.frames) d *= factor;
  out.frame_rate = durations.frame_rate * factor;
  return out;
}

Matrix length_regulate(const Matrix& embeddings, const std::vector<int>& durations) {
  if (embeddings.rows() != static_cast<Eigen::Index>(durations.size())) {
    throw ContractError("length_regulate: " + std::to_string(embeddings.rows()) +
                        " embeddings vs " + std::to_string(durations.size()) + " durations");
  }
  long long total = 0;
  for (int d : durations) {
    if (d < 0) throw ContractError("length_regulate: negative duration");
    total += d;
  }
  Matrix out(static_cast<Eigen::Index>(total), embeddings.cols());
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    for (int r = 0; r < durations[i]; ++r) out.row(row++) = embeddings.row(static_cast<int>(i));
  }
  return out;
}

Matrix repeat_frames(const Matrix& frames, int factor) {
  if (factor < 1) throw ContractError("repeat_frames: factor must be >= 1");
  return length_regulate(frames, std::vector<int>(frames.rows(), factor));
}

}  // namespace nam::align
