#pragma once

#include "nam/common.hpp"

#include <string>
#include <vector>

namespace nam::align {

// Phoneme ids from a closed inventory.
struct PhonemeSeq {
  std::vector<int> ids;
  int inventory_size = 0;

  PhonemeSeq() = default;
  PhonemeSeq(std::vector<int> ids_, int inventory_size_);
  int size() const { return static_cast<int>(ids.size()); }
};

// Per-phoneme frame counts; always length-matched to the phoneme sequence and
// summing to the utterance's frame count, each entry >= 1.
struct Durations {
  std::vector<int> frames;
  double frame_rate = 50.0;

  int size() const { return static_cast<int>(frames.size()); }
  int total() const;
};

// Monophone model: one diagonal-covariance Gaussian state per phoneme with a
// self-loop / exit transition. Alignment runs left-to-right over the
// utterance's phoneme sequence.
struct MonophoneHMM {
  Matrix means;      // P x D
  Matrix variances;  // P x D, floored at kVarianceFloor
  Vector self_loop;  // P, probability of staying in the state

  static constexpr double kVarianceFloor = 1e-3;

  int inventory_size() const { return static_cast<int>(means.rows()); }
  int feature_dim() const { return static_cast<int>(means.cols()); }
  double emission_log_prob(int phoneme, const Eigen::Ref<const Eigen::RowVectorXd>& frame) const;
};

struct AlignerExample {
  Matrix features;  // frames x D
  PhonemeSeq phonemes;
};

struct AlignTrainResult {
  MonophoneHMM model;
  // Total Viterbi log-likelihood before each re-estimation; non-decreasing.
  std::vector<double> log_likelihood_history;
};

// Viterbi-EM (segmental k-means): uniform segmentation init, then alternate
// Viterbi alignment and Gaussian/transition re-estimation. Deterministic.
AlignTrainResult train_aligner(const std::vector<AlignerExample>& corpus, int iterations);

// Max-likelihood monotone segmentation of `features` into the given phoneme
// sequence. Throws if there are fewer frames than phonemes.
Durations viterbi_align(const MonophoneHMM& hmm, const Matrix& features,
                        const PhonemeSeq& phonemes);

// Log-likelihood of the best segmentation (the objective train_aligner climbs).
double viterbi_log_likelihood(const MonophoneHMM& hmm, const Matrix& features,
                              const PhonemeSeq& phonemes);

// {"phonemes": [...], "durations": [...], "frame_rate": 50.0}
std::string durations_to_json(const PhonemeSeq& phonemes, const Durations& durations);

void save_aligner(const std::string& path, const MonophoneHMM& hmm);
MonophoneHMM load_aligner(const std::string& path);

}  // namespace nam::align
