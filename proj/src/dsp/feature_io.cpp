#include "nam/dsp/feature_io.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace nam::dsp {

namespace {

template <typename T>
void write_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("feature file truncated");
  return v;
}

}  // namespace

void write_features(const std::string& path, const Matrix& data, const FeatureMeta& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("features: cannot write " + path);
  out.write("NAMF", 4);
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(data.rows()));
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(data.cols()));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    write_raw<float>(out, static_cast<float>(data.data()[i]));
  }
  write_raw<float>(out, meta.sample_rate);
  write_raw<std::uint32_t>(out, meta.hop);
  write_raw<std::uint32_t>(out, meta.window);
  write_raw<std::uint32_t>(out, meta.n_mels);
  write_raw<std::uint32_t>(out, kFeatureFormatVersion);
  write_raw<std::uint32_t>(out, 0u);  // reserved
  if (!out) throw IoError("features: write failed for " + path);
}

FeatureFile read_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("features: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "NAMF", 4) != 0) {
    throw IoError("features: bad magic in " + path);
  }
  const auto rows = read_raw<std::uint32_t>(in);
  const auto cols = read_raw<std::uint32_t>(in);
  FeatureFile f;
  f.data.resize(rows, cols);
  for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(rows) * cols; ++i) {
    f.data.data()[i] = read_raw<float>(in);
  }
  f.meta.sample_rate = read_raw<float>(in);
  f.meta.hop = read_raw<std::uint32_t>(in);
  f.meta.window = read_raw<std::uint32_t>(in);
  f.meta.n_mels = read_raw<std::uint32_t>(in);
  const auto version = read_raw<std::uint32_t>(in);
  read_raw<std::uint32_t>(in);  // reserved
  if (version != kFeatureFormatVersion) {
    throw IoError("features: unknown format version " + std::to_string(version) + " in " + path);
  }
  return f;
}

void write_mel(const std::string& path, const MelSpectrogram& mel) {
  FeatureMeta meta;
  meta.sample_rate = static_cast<float>(mel.params.sample_rate);
  meta.hop = static_cast<std::uint32_t>(mel.params.hop);
  meta.window = static_cast<std::uint32_t>(mel.params.window);
  meta.n_mels = static_cast<std::uint32_t>(mel.params.n_mels);
  write_features(path, mel.frames, meta);
}

MelSpectrogram read_mel(const std::string& path) {
  const FeatureFile f = read_features(path);
  MelParams params;
  params.sample_rate = f.meta.sample_rate;
  params.hop = static_cast<int>(f.meta.hop);
  params.window = static_cast<int>(f.meta.window);
  params.n_mels = static_cast<int>(f.meta.n_mels);
  return MelSpectrogram{f.data, params};
}

}  // namespace nam::dsp
