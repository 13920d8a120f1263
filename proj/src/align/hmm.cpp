#include "nam/align/hmm.hpp"

#include "nam/numerics/tensor.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace nam::align {

namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();
constexpr double kSelfLoopFloor = 1e-4;

struct ViterbiResult {
  Durations durations;
  double log_likelihood;
};

// Left-to-right Viterbi over the utterance's phoneme positions. The objective
// includes every transition, the final exit included, so it matches the
// complete-data likelihood the M-step maximizes.
ViterbiResult run_viterbi(const MonophoneHMM& hmm, const Matrix& features,
                          const PhonemeSeq& phonemes) {
  const int T = static_cast<int>(features.rows());
  const int P = phonemes.size();
  if (T < P) {
    throw ContractError("viterbi_align: infeasible, " + std::to_string(T) + " frames for " +
                        std::to_string(P) + " phonemes");
  }
  if (features.cols() != hmm.feature_dim()) {
    throw ContractError("viterbi_align: feature dim " + std::to_string(features.cols()) +
                        " != model dim " + std::to_string(hmm.feature_dim()));
  }
  for (int id : phonemes.ids) {
    if (id < 0 || id >= hmm.inventory_size()) {
      throw ContractError("viterbi_align: phoneme id " + std::to_string(id) +
                          " outside model inventory");
    }
  }

  Matrix emit(T, P);
  for (int p = 0; p < P; ++p) {
    for (int t = 0; t < T; ++t) emit(t, p) = hmm.emission_log_prob(phonemes.ids[p], features.row(t));
  }
  Vector log_self(P), log_exit(P);
  for (int p = 0; p < P; ++p) {
    log_self[p] = std::log(hmm.self_loop[phonemes.ids[p]]);
    log_exit[p] = std::log(1.0 - hmm.self_loop[phonemes.ids[p]]);
  }

  Matrix score = Matrix::Constant(T, P, kLogZero);
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> came_from_prev(T, P);
  came_from_prev.setZero();
  score(0, 0) = emit(0, 0);
  for (int t = 1; t < T; ++t) {
    const int p_lo = std::max(0, P - (T - t));  // must still be reachable
    const int p_hi = std::min(P - 1, t);
    for (int p = p_lo; p <= p_hi; ++p) {
      const double stay = score(t - 1, p) == kLogZero ? kLogZero : score(t - 1, p) + log_self[p];
      const double advance = (p >= 1 && score(t - 1, p - 1) != kLogZero)
                                 ? score(t - 1, p - 1) + log_exit[p - 1]
                                 : kLogZero;
      if (advance > stay) {
        score(t, p) = advance + emit(t, p);
        came_from_prev(t, p) = 1;
      } else {
        score(t, p) = stay + emit(t, p);
      }
    }
  }

  ViterbiResult result;
  result.log_likelihood = score(T - 1, P - 1) + log_exit[P - 1];
  result.durations.frames.assign(P, 0);
  int p = P - 1;
  for (int t = T - 1; t >= 0; --t) {
    ++result.durations.frames[p];
    if (t > 0 && came_from_prev(t, p) == 1) --p;
  }
  return result;
}

struct Accumulator {
  Matrix sum, sum_sq;
  std::vector<double> count;
  std::vector<double> stays, visits;

  Accumulator(int inventory, int dim)
      : sum(Matrix::Zero(inventory, dim)),
        sum_sq(Matrix::Zero(inventory, dim)),
        count(inventory, 0.0),
        stays(inventory, 0.0),
        visits(inventory, 0.0) {}

  void add_segment(int phoneme, const Matrix& features, int start, int len) {
    for (int t = start; t < start + len; ++t) {
      sum.row(phoneme) += features.row(t);
      sum_sq.row(phoneme) += features.row(t).array().square().matrix();
    }
    count[phoneme] += len;
    stays[phoneme] += len - 1;
    visits[phoneme] += len;
  }

  MonophoneHMM estimate(int dim) const {
    const int inventory = static_cast<int>(count.size());
    MonophoneHMM hmm;
    hmm.means = Matrix::Zero(inventory, dim);
    hmm.variances = Matrix::Constant(inventory, dim, 1.0);
    hmm.self_loop = Vector::Constant(inventory, 0.5);
    for (int q = 0; q < inventory; ++q) {
      if (count[q] <= 0.0) continue;  // unseen phonemes keep the flat prior
      hmm.means.row(q) = sum.row(q) / count[q];
      hmm.variances.row(q) =
          (sum_sq.row(q).array() / count[q] - hmm.means.row(q).array().square())
              .max(MonophoneHMM::kVarianceFloor);
      const double self = stays[q] / visits[q];
      hmm.self_loop[q] = std::min(1.0 - kSelfLoopFloor, std::max(kSelfLoopFloor, self));
    }
    return hmm;
  }
};

std::vector<int> uniform_segmentation(int frames, int parts) {
  std::vector<int> durations(parts);
  for (int p = 0; p < parts; ++p) {
    durations[p] = (frames * (p + 1)) / parts - (frames * p) / parts;
  }
  return durations;
}

}  // namespace

PhonemeSeq::PhonemeSeq(std::vector<int> ids_, int inventory_size_)
    : ids(std::move(ids_)), inventory_size(inventory_size_) {
  if (ids.empty()) throw ContractError("PhonemeSeq: empty sequence");
  for (int id : ids) {
    if (id < 0 || id >= inventory_size) {
      throw ContractError("PhonemeSeq: id " + std::to_string(id) + " outside inventory of " +
                          std::to_string(inventory_size));
    }
  }
}

int Durations::total() const { return std::accumulate(frames.begin(), frames.end(), 0); }

double MonophoneHMM::emission_log_prob(int phoneme,
                                       const Eigen::Ref<const Eigen::RowVectorXd>& frame) const {
  const auto mu = means.row(phoneme).array();
  const auto var = variances.row(phoneme).array();
  const auto x = frame.array();
  return -0.5 * ((2.0 * M_PI * var).log() + (x - mu).square() / var).sum();
}

Durations viterbi_align(const MonophoneHMM& hmm, const Matrix& features,
                        const PhonemeSeq& phonemes) {
  return run_viterbi(hmm, features, phonemes).durations;
}

double viterbi_log_likelihood(const MonophoneHMM& hmm, const Matrix& features,
                              const PhonemeSeq& phonemes) {
  return run_viterbi(hmm, features, phonemes).log_likelihood;
}

AlignTrainResult train_aligner(const std::vector<AlignerExample>& corpus, int iterations) {
  if (corpus.empty()) throw ContractError("train_aligner: empty corpus");
  const int dim = static_cast<int>(corpus.front().features.cols());
  const int inventory = corpus.front().phonemes.inventory_size;
  for (const auto& ex : corpus) {
    if (ex.features.rows() < ex.phonemes.size()) {
      throw ContractError("train_aligner: utterance has fewer frames (" +
                          std::to_string(ex.features.rows()) + ") than phonemes (" +
                          std::to_string(ex.phonemes.size()) + ")");
    }
    if (ex.features.cols() != dim || ex.phonemes.inventory_size != inventory) {
      throw ContractError("train_aligner: inconsistent corpus dims");
    }
  }

  // Init from uniform segmentation.
  Accumulator acc(inventory, dim);
  for (const auto& ex : corpus) {
    const auto durations =
        uniform_segmentation(static_cast<int>(ex.features.rows()), ex.phonemes.size());
    int start = 0;
    for (int p = 0; p < ex.phonemes.size(); ++p) {
      acc.add_segment(ex.phonemes.ids[p], ex.features, start, durations[p]);
      start += durations[p];
    }
  }

  AlignTrainResult result;
  result.model = acc.estimate(dim);
  for (int it = 0; it < iterations; ++it) {
    Accumulator next(inventory, dim);
    double total_ll = 0.0;
    for (const auto& ex : corpus) {
      const ViterbiResult vit = run_viterbi(result.model, ex.features, ex.phonemes);
      total_ll += vit.log_likelihood;
      int start = 0;
      for (int p = 0; p < ex.phonemes.size(); ++p) {
        next.add_segment(ex.phonemes.ids[p], ex.features, start, vit.durations.frames[p]);
        start += vit.durations.frames[p];
      }
    }
    result.log_likelihood_history.push_back(total_ll);
    result.model = next.estimate(dim);
  }
  return result;
}

std::string durations_to_json(const PhonemeSeq& phonemes, const Durations& durations) {
  if (phonemes.size() != durations.size()) {
    throw ContractError("durations_to_json: length mismatch");
  }
  nlohmann::json j;
  j["phonemes"] = phonemes.ids;
  j["durations"] = durations.frames;
  j["frame_rate"] = durations.frame_rate;
  return j.dump();
}

void save_aligner(const std::string& path, const MonophoneHMM& hmm) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("aligner: cannot write " + path);
  out.write("NAMA", 4);
  const std::uint8_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), 1);
  numerics::write_tensor(out, numerics::Tensor::from_matrix(hmm.means));
  numerics::write_tensor(out, numerics::Tensor::from_matrix(hmm.variances));
  numerics::write_tensor(out, numerics::Tensor::from_vector(hmm.self_loop));
}

MonophoneHMM load_aligner(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("aligner: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  std::uint8_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 1);
  if (!in || std::string(magic, 4) != "NAMA") throw IoError("aligner: bad magic in " + path);
  if (version != 1) throw IoError("aligner: unknown format version in " + path);
  MonophoneHMM hmm;
  hmm.means = numerics::read_tensor(in).to_matrix();
  hmm.variances = numerics::read_tensor(in).to_matrix();
  hmm.self_loop = numerics::read_tensor(in).to_vector();
  return hmm;
}

}  // namespace nam::align
