#pragma once

#include "nam/common.hpp"
#include "nam/numerics/tape.hpp"

#include <vector>

namespace nam::ctc {

// Blank is always id 0; label ids live in [1, V].
constexpr int kBlank = 0;

using LabelSeq = std::vector<int>;

// T x (V+1) matrix of per-frame log-probabilities, column 0 = blank.
// Every row must be a normalized log-distribution (logsumexp == 0 +- tol).
struct LogProbLattice {
  Matrix log_probs;

  int frames() const { return static_cast<int>(log_probs.rows()); }
  int vocab_size() const { return static_cast<int>(log_probs.cols()) - 1; }

  static LogProbLattice from_log_probs(Matrix log_probs, double row_tol = 1e-9);
  static LogProbLattice from_logits(const Matrix& logits);
};

// Minimum number of frames that can emit `labels`: one per label plus one
// mandatory blank between adjacent repeats.
int min_frames(const LabelSeq& labels);

struct LossResult {
  double nll = 0.0;
  bool feasible = true;  // false => nll is +infinity
};

// Negative log-likelihood via the forward algorithm over the extended
// (blank-interleaved) label sequence, entirely in log space.
LossResult loss(const LogProbLattice& lattice, const LabelSeq& labels);

// d(nll)/d(log_probs), treating lattice entries as free variables; equals the
// negated state-occupancy posterior from forward-backward. Requires a feasible
// instance.
Matrix grad(const LogProbLattice& lattice, const LabelSeq& labels);

// NLL of the single best compatible frame-wise path (Viterbi). Upper-bounds
// loss(): summing over paths can only increase the likelihood.
double best_path_nll(const LogProbLattice& lattice, const LabelSeq& labels);

// Per-frame argmax, collapse adjacent repeats, drop blanks.
LabelSeq greedy_decode(const LogProbLattice& lattice);

// Tape node for training: forward value is loss().nll, backward chains grad().
// Throws ContractError on infeasible instances; callers filter with min_frames.
numerics::Var loss_op(numerics::Var log_probs, const LabelSeq& labels);

}  // namespace nam::ctc
