#include "nam/ctc/ctc.hpp"

#include "nam/numerics/ops.hpp"

#include <cmath>
#include <limits>

namespace nam::ctc {

namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

double logsumexp2(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

void validate_labels(const LogProbLattice& lattice, const LabelSeq& labels, const char* op) {
  if (labels.empty()) throw ContractError(std::string(op) + ": empty label sequence");
  for (int id : labels) {
    if (id < 1 || id > lattice.vocab_size()) {
      throw ContractError(std::string(op) + ": label id " + std::to_string(id) +
                          " outside [1, " + std::to_string(lattice.vocab_size()) + "]");
    }
  }
}

std::vector<int> extend_with_blanks(const LabelSeq& labels) {
  std::vector<int> ext(2 * labels.size() + 1, kBlank);
  for (std::size_t i = 0; i < labels.size(); ++i) ext[2 * i + 1] = labels[i];
  return ext;
}

bool skip_allowed(const std::vector<int>& ext, int s) {
  return ext[s] != kBlank && s >= 2 && ext[s] != ext[s - 2];
}

// Forward lattice over the extended label sequence; alpha(t, s) includes the
// emission at frame t.
Matrix forward_lattice(const Matrix& logp, const std::vector<int>& ext) {
  const int T = static_cast<int>(logp.rows());
  const int S = static_cast<int>(ext.size());
  Matrix alpha = Matrix::Constant(T, S, kLogZero);
  alpha(0, 0) = logp(0, ext[0]);
  if (S > 1) alpha(0, 1) = logp(0, ext[1]);
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = logsumexp2(acc, alpha(t - 1, s - 1));
      if (skip_allowed(ext, s)) acc = logsumexp2(acc, alpha(t - 1, s - 2));
      if (acc != kLogZero) alpha(t, s) = acc + logp(t, ext[s]);
    }
  }
  return alpha;
}

}  // namespace

LogProbLattice LogProbLattice::from_log_probs(Matrix log_probs, double row_tol) {
  if (log_probs.rows() == 0 || log_probs.cols() < 2) {
    throw ContractError("lattice must be T x (V+1) with V >= 1");
  }
  for (Eigen::Index r = 0; r < log_probs.rows(); ++r) {
    const double mx = log_probs.row(r).maxCoeff();
    if (!std::isfinite(mx)) throw ContractError("lattice row " + std::to_string(r) + " not finite");
    const double lse = mx + std::log((log_probs.row(r).array() - mx).exp().sum());
    if (std::abs(lse) > row_tol) {
      throw ContractError("lattice row " + std::to_string(r) + " not normalized, logsumexp = " +
                          std::to_string(lse));
    }
  }
  return LogProbLattice{std::move(log_probs)};
}

LogProbLattice LogProbLattice::from_logits(const Matrix& logits) {
  return LogProbLattice{numerics::log_softmax_rows(logits)};
}

int min_frames(const LabelSeq& labels) {
  int repeats = 0;
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == labels[i - 1]) ++repeats;
  }
  return static_cast<int>(labels.size()) + repeats;
}

LossResult loss(const LogProbLattice& lattice, const LabelSeq& labels) {
  validate_labels(lattice, labels, "ctc loss");
  const int T = lattice.frames();
  if (T < min_frames(labels)) {
    return LossResult{std::numeric_limits<double>::infinity(), false};
  }
  const auto ext = extend_with_blanks(labels);
  const Matrix alpha = forward_lattice(lattice.log_probs, ext);
  const int S = static_cast<int>(ext.size());
  double total = alpha(T - 1, S - 1);
  if (S > 1) total = logsumexp2(total, alpha(T - 1, S - 2));
  return LossResult{-total, true};
}

Matrix grad(const LogProbLattice& lattice, const LabelSeq& labels) {
  validate_labels(lattice, labels, "ctc grad");
  const int T = lattice.frames();
  if (T < min_frames(labels)) throw ContractError("ctc grad: infeasible instance");
  const auto ext = extend_with_blanks(labels);
  const int S = static_cast<int>(ext.size());
  const Matrix& logp = lattice.log_probs;

  const Matrix alpha = forward_lattice(logp, ext);
  double log_z = alpha(T - 1, S - 1);
  if (S > 1) log_z = logsumexp2(log_z, alpha(T - 1, S - 2));

  // Backward pass, symmetric convention (beta also includes the emission at t).
  Matrix beta = Matrix::Constant(T, S, kLogZero);
  beta(T - 1, S - 1) = logp(T - 1, ext[S - 1]);
  if (S > 1) beta(T - 1, S - 2) = logp(T - 1, ext[S - 2]);
  for (int t = T - 2; t >= 0; --t) {
    for (int s = S - 1; s >= 0; --s) {
      double acc = beta(t + 1, s);
      if (s + 1 < S) acc = logsumexp2(acc, beta(t + 1, s + 1));
      if (s + 2 < S && skip_allowed(ext, s + 2)) acc = logsumexp2(acc, beta(t + 1, s + 2));
      if (acc != kLogZero) beta(t, s) = acc + logp(t, ext[s]);
    }
  }

  // gamma(t, s) = P(path passes state s at frame t | labels); the emission
  // log-prob is double-counted in alpha + beta and removed here.
  Matrix g = Matrix::Zero(T, lattice.vocab_size() + 1);
  for (int t = 0; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      if (alpha(t, s) == kLogZero || beta(t, s) == kLogZero) continue;
      const double occupancy = std::exp(alpha(t, s) + beta(t, s) - logp(t, ext[s]) - log_z);
      g(t, ext[s]) -= occupancy;
    }
  }
  return g;
}

double best_path_nll(const LogProbLattice& lattice, const LabelSeq& labels) {
  validate_labels(lattice, labels, "ctc best path");
  const int T = lattice.frames();
  if (T < min_frames(labels)) return std::numeric_limits<double>::infinity();
  const auto ext = extend_with_blanks(labels);
  const int S = static_cast<int>(ext.size());
  const Matrix& logp = lattice.log_probs;
  Matrix v = Matrix::Constant(T, S, kLogZero);
  v(0, 0) = logp(0, ext[0]);
  if (S > 1) v(0, 1) = logp(0, ext[1]);
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double best = v(t - 1, s);
      if (s >= 1) best = std::max(best, v(t - 1, s - 1));
      if (skip_allowed(ext, s)) best = std::max(best, v(t - 1, s - 2));
      if (best != kLogZero) v(t, s) = best + logp(t, ext[s]);
    }
  }
  double best = v(T - 1, S - 1);
  if (S > 1) best = std::max(best, v(T - 1, S - 2));
  return -best;
}

LabelSeq greedy_decode(const LogProbLattice& lattice) {
  LabelSeq out;
  int prev = -1;
  for (int t = 0; t < lattice.frames(); ++t) {
    Eigen::Index k;
    lattice.log_probs.row(t).maxCoeff(&k);
    const int id = static_cast<int>(k);
    if (id != kBlank && id != prev) out.push_back(id);
    prev = id;
  }
  return out;
}

numerics::Var loss_op(numerics::Var log_probs, const LabelSeq& labels) {
  numerics::Tape& tape = *log_probs.tape;
  const numerics::Tensor& t = tape.value(log_probs);
  if (t.rank() != 2) numerics::shape_error("ctc loss_op", t);
  LogProbLattice lattice{t.to_matrix()};  // rows already normalized by log_softmax upstream
  const LossResult res = loss(lattice, labels);
  if (!res.feasible) {
    throw ContractError("ctc loss_op: infeasible instance (T=" + std::to_string(lattice.frames()) +
                        " < " + std::to_string(min_frames(labels)) + " required frames)");
  }
  const Matrix g = grad(lattice, labels);
  return tape.record("ctc_loss", numerics::Tensor::scalar(res.nll), {log_probs},
                     [g](const numerics::Tensor& up, const std::vector<numerics::Tensor*>& pg) {
                       if (pg[0] != nullptr) pg[0]->mat() += up.value() * g;
                     });
}

}  // namespace nam::ctc
