#include "nam/numerics/ops.hpp"

#include <cmath>

namespace nam::numerics {

namespace {

const Tensor& val(Var v) { return v.tape->value(v); }

Tape& tape_of(Var a, Var b, const char* op) {
  if (a.tape == nullptr || a.tape != b.tape) {
    throw ContractError(std::string(op) + ": operands must live on one tape");
  }
  return *a.tape;
}

// Elementwise binary op with scalar-tensor broadcast (the only broadcast form).
template <typename Fwd, typename DA, typename DB>
Var elementwise(const char* op, Var a, Var b, Fwd fwd, DA da, DB db) {
  Tape& tape = tape_of(a, b, op);
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  const bool a_scalar = ta.is_scalar();
  const bool b_scalar = tb.is_scalar();
  if (!same_shape(ta, tb) && !a_scalar && !b_scalar) shape_error(op, ta, tb);

  const Tensor& shape_src = a_scalar && !b_scalar ? tb : ta;
  Eigen::ArrayXd out(shape_src.size());
  const auto& xa = ta.array();
  const auto& xb = tb.array();
  if (a_scalar && !b_scalar) {
    out = fwd(Eigen::ArrayXd::Constant(xb.size(), xa[0]), xb);
  } else if (b_scalar && !a_scalar) {
    out = fwd(xa, Eigen::ArrayXd::Constant(xa.size(), xb[0]));
  } else {
    out = fwd(xa, xb);
  }

  Tensor result(shape_src.shape(), std::move(out));
  return tape.record(op, std::move(result), {a, b},
                     [ta, tb, da, db](const Tensor& up, const std::vector<Tensor*>& g) {
                       if (g[0] != nullptr) {
                         Eigen::ArrayXd d = da(up.array(), ta.array(), tb.array());
                         if (ta.is_scalar() && d.size() > 1) {
                           g[0]->array()[0] += d.sum();
                         } else {
                           g[0]->array() += d;
                         }
                       }
                       if (g[1] != nullptr) {
                         Eigen::ArrayXd d = db(up.array(), ta.array(), tb.array());
                         if (tb.is_scalar() && d.size() > 1) {
                           g[1]->array()[0] += d.sum();
                         } else {
                           g[1]->array() += d;
                         }
                       }
                     });
}

Eigen::ArrayXd broadcast(const Eigen::ArrayXd& x, std::int64_t n) {
  if (x.size() == n) return x;
  return Eigen::ArrayXd::Constant(n, x[0]);
}

}  // namespace

Var add(Var a, Var b) {
  return elementwise(
      "add", a, b, [](const auto& x, const auto& y) { return x + y; },
      [](const Eigen::ArrayXd& up, const Eigen::ArrayXd&, const Eigen::ArrayXd&) { return up; },
      [](const Eigen::ArrayXd& up, const Eigen::ArrayXd&, const Eigen::ArrayXd&) { return up; });
}

Var sub(Var a, Var b) {
  return elementwise(
      "sub", a, b, [](const auto& x, const auto& y) { return x - y; },
      [](const Eigen::ArrayXd& up, const Eigen::ArrayXd&, const Eigen::ArrayXd&) { return up; },
      [](const Eigen::ArrayXd& up, const Eigen::ArrayXd&, const Eigen::ArrayXd&) {
        return (-up).eval();
      });
}

Var mul(Var a, Var b) {
  return elementwise(
      "mul", a, b, [](const auto& x, const auto& y) { return x * y; },
      [](const Eigen::ArrayXd& up, const Eigen::ArrayXd&, const Eigen::ArrayXd& y) {
        return (up * broadcast(y, up.size())).eval();
      },
      [](const Eigen::ArrayXd& up, const Eigen::ArrayXd& x, const Eigen::ArrayXd&) {
        return (up * broadcast(x, up.size())).eval();
      });
}

Var scale(Var x, double c) {
  Tape& tape = *x.tape;
  const Tensor& tx = val(x);
  Tensor out(tx.shape(), tx.array() * c);
  return tape.record("scale", std::move(out), {x},
                     [c](const Tensor& up, const std::vector<Tensor*>& g) {
                       if (g[0] != nullptr) g[0]->array() += c * up.array();
                     });
}

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, b, "matmul");
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows()) shape_error("matmul", ta, tb);
  Matrix prod = ta.mat() * tb.mat();
  return tape.record("matmul", Tensor::from_matrix(prod), {a, b},
                     [ta, tb](const Tensor& up, const std::vector<Tensor*>& g) {
                       if (g[0] != nullptr) g[0]->mat() += up.mat() * tb.mat().transpose();
                       if (g[1] != nullptr) g[1]->mat() += ta.mat().transpose() * up.mat();
                     });
}

Var transpose(Var x) {
  Tape& tape = *x.tape;
  const Tensor& tx = val(x);
  if (tx.rank() != 2) shape_error("transpose", tx);
  Matrix t = tx.mat().transpose();
  return tape.record("transpose", Tensor::from_matrix(t), {x},
                     [](const Tensor& up, const std::vector<Tensor*>& g) {
                       if (g[0] != nullptr) g[0]->mat() += up.mat().transpose();
                     });
}

Var conv1d(Var x, Var kernel) {
  Tape& tape = tape_of(x, kernel, "conv1d");
  const Tensor& tx = val(x);
  const Tensor& tw = val(kernel);
  if (tx.rank() != 1 && tx.rank() != 2) shape_error("conv1d", tx, tw);

  const int T = tx.rank() == 2 ? tx.shape()[0] : tx.shape()[0];
  const int C = tx.rank() == 2 ? tx.shape()[1] : 1;

  if (tw.rank() == 1) {
    // One kernel shared across channels, shape preserved.
    const int K = tw.shape()[0];
    const int off = (K - 1) / 2;
    Matrix xm = Eigen::Map<const Matrix>(tx.data(), T, C);
    Matrix out = Matrix::Zero(T, C);
    for (int k = 0; k < K; ++k) {
      const int t0 = std::max(0, off - k);
      const int t1 = std::min(T, T + off - k);
      if (t1 <= t0) continue;
      out.middleRows(t0, t1 - t0) += tw.at(k) * xm.middleRows(t0 + k - off, t1 - t0);
    }
    Tensor result(tx.shape(), Eigen::Map<Eigen::ArrayXd>(out.data(), out.size()));
    return tape.record(
        "conv1d", std::move(result), {x, kernel},
        [tx, tw, T, C, K, off](const Tensor& up, const std::vector<Tensor*>& g) {
          Eigen::Map<const Matrix> um(up.data(), T, C);
          Eigen::Map<const Matrix> xm(tx.data(), T, C);
          for (int k = 0; k < K; ++k) {
            const int t0 = std::max(0, off - k);
            const int t1 = std::min(T, T + off - k);
            if (t1 <= t0) continue;
            if (g[0] != nullptr) {
              Eigen::Map<Matrix> gm(g[0]->data(), T, C);
              gm.middleRows(t0 + k - off, t1 - t0) += tw.at(k) * um.middleRows(t0, t1 - t0);
            }
            if (g[1] != nullptr) {
              g[1]->at(k) += (um.middleRows(t0, t1 - t0).array() *
                              xm.middleRows(t0 + k - off, t1 - t0).array())
                                 .sum();
            }
          }
        });
  }

  if (tw.rank() != 3 || tw.shape()[1] != C) shape_error("conv1d", tx, tw);
  const int K = tw.shape()[0];
  const int Cout = tw.shape()[2];
  const int off = (K - 1) / 2;
  Eigen::Map<const Matrix> xm(tx.data(), T, C);
  Matrix out = Matrix::Zero(T, Cout);
  for (int k = 0; k < K; ++k) {
    Eigen::Map<const Matrix> wk(tw.data() + static_cast<std::int64_t>(k) * C * Cout, C, Cout);
    const int t0 = std::max(0, off - k);
    const int t1 = std::min(T, T + off - k);
    if (t1 <= t0) continue;
    out.middleRows(t0, t1 - t0) += xm.middleRows(t0 + k - off, t1 - t0) * wk;
  }
  return tape.record(
      "conv1d", Tensor::from_matrix(out), {x, kernel},
      [tx, tw, T, C, K, Cout, off](const Tensor& up, const std::vector<Tensor*>& g) {
        Eigen::Map<const Matrix> um(up.data(), T, Cout);
        Eigen::Map<const Matrix> xm(tx.data(), T, C);
        for (int k = 0; k < K; ++k) {
          const std::int64_t woff = static_cast<std::int64_t>(k) * C * Cout;
          Eigen::Map<const Matrix> wk(tw.data() + woff, C, Cout);
          const int t0 = std::max(0, off - k);
          const int t1 = std::min(T, T + off - k);
          if (t1 <= t0) continue;
          if (g[0] != nullptr) {
            Eigen::Map<Matrix> gm(g[0]->data(), T, C);
            gm.middleRows(t0 + k - off, t1 - t0) += um.middleRows(t0, t1 - t0) * wk.transpose();
          }
          if (g[1] != nullptr) {
            Eigen::Map<Matrix> gw(g[1]->data() + woff, C, Cout);
            gw += xm.middleRows(t0 + k - off, t1 - t0).transpose() * um.middleRows(t0, t1 - t0);
          }
        }
      });
}

Matrix softmax_rows(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - mx).exp();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

Matrix log_softmax_rows(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    const double lse = std::log((x.row(r).array() - mx).exp().sum()) + mx;
    y.row(r) = x.row(r).array() - lse;
  }
  return y;
}

Var softmax(Var x) {
  Tape& tape = *x.tape;
  const Tensor& tx = val(x);
  if (tx.rank() != 1 && tx.rank() != 2) shape_error("softmax", tx);
  Matrix y = softmax_rows(tx.mat());
  Tensor out(tx.shape(), Eigen::Map<Eigen::ArrayXd>(y.data(), y.size()));
  Tensor y_saved = out;
  return tape.record("softmax", std::move(out), {x},
                     [y_saved](const Tensor& up, const std::vector<Tensor*>& g) {
                       if (g[0] == nullptr) return;
                       auto ym = y_saved.mat();
                       auto um = up.mat();
                       Eigen::Map<Matrix> gm(g[0]->data(), ym.rows(), ym.cols());
                       for (Eigen::Index r = 0; r < ym.rows(); ++r) {
                         const double dot = (um.row(r).array() * ym.row(r).array()).sum();
                         gm.row(r).array() += ym.row(r).array() * (um.row(r).array() - dot);
                       }
                     });
}

Var log_softmax(Var x) {
  Tape& tape = *x.tape;
  const Tensor& tx = val(x);
  if (tx.rank() != 1 && tx.rank() != 2) shape_error("log_softmax", tx);
  Matrix y = log_softmax_rows(tx.mat());
  Tensor out(tx.shape(), Eigen::Map<Eigen::ArrayXd>(y.data(), y.size()));
  Tensor y_saved = out;
  return tape.record("log_softmax", std::move(out), {x},
                     [y_saved](const Tensor& up, const std::vector<Tensor*>& g) {
                       if (g[0] == nullptr) return;
                       auto ym = y_saved.mat();
                       auto um = up.mat();
                       Eigen::Map<Matrix> gm(g[0]->data(), ym.rows(), ym.cols());
                       for (Eigen::Index r = 0; r < ym.rows(); ++r) {
                         const double usum = um.row(r).sum();
                         gm.row(r).array() +=
                             um.row(r).array() - ym.row(r).array().exp() * usum;
                       }
                     });
}

Var layer_norm(Var x, double eps) {
  Tape& tape = *x.tape;
  const Tensor& tx = val(x);
  if (tx.rank() != 1 && tx.rank() != 2) shape_error("layer_norm", tx);
  const int R = tx.rows();
  const int C = tx.cols();
  Matrix y(R, C);
  Vector inv_std(R);
  auto xm = tx.mat();
  for (int r = 0; r < R; ++r) {
    const double m = xm.row(r).mean();
    const double v = (xm.row(r).array() - m).square().mean();
    inv_std[r] = 1.0 / std::sqrt(v + eps);
    y.row(r) = (xm.row(r).array() - m) * inv_std[r];
  }
  Tensor out(tx.shape(), Eigen::Map<Eigen::ArrayXd>(y.data(), y.size()));
  Matrix y_saved = y;
  return tape.record(
      "layer_norm", std::move(out), {x},
      [y_saved, inv_std, R, C](const Tensor& up, const std::vector<Tensor*>& g) {
        if (g[0] == nullptr) return;
        Eigen::Map<const Matrix> um(up.data(), R, C);
        Eigen::Map<Matrix> gm(g[0]->data(), R, C);
        for (int r = 0; r < R; ++r) {
          const double mu = um.row(r).mean();
          const double my = (um.row(r).array() * y_saved.row(r).array()).mean();
          gm.row(r).array() +=
              inv_std[r] * (um.row(r).array() - mu - y_saved.row(r).array() * my);
        }
      });
}

Var relu(Var x) {
  Tape& tape = *x.tape;
  const Tensor& tx = val(x);
  Tensor out(tx.shape(), tx.array().max(0.0));
  return tape.record("relu", std::move(out), {x},
                     [tx](const Tensor& up, const std::vector<Tensor*>& g) {
                       if (g[0] == nullptr) return;
                       g[0]->array() += up.array() * (tx.array() > 0.0).cast<double>();
                     });
}

Var abs(Var x) {
  Tape& tape = *x.tape;
  const Tensor& tx = val(x);
  Tensor out(tx.shape(), tx.array().abs());
  return tape.record("abs", std::move(out), {x},
                     [tx](const Tensor& up, const std::vector<Tensor*>& g) {
                       if (g[0] == nullptr) return;
                       g[0]->array() += up.array() * tx.array().sign();
                     });
}

Var mean(Var x) {
  Tape& tape = *x.tape;
  const Tensor& tx = val(x);
  const double n = static_cast<double>(tx.size());
  Tensor out = Tensor::scalar(tx.array().mean());
  return tape.record("mean", std::move(out), {x},
                     [n](const Tensor& up, const std::vector<Tensor*>& g) {
                       if (g[0] != nullptr) g[0]->array() += up.value() / n;
                     });
}

Var sum(Var x) {
  Tape& tape = *x.tape;
  const Tensor& tx = val(x);
  Tensor out = Tensor::scalar(tx.array().sum());
  return tape.record("sum", std::move(out), {x},
                     [](const Tensor& up, const std::vector<Tensor*>& g) {
                       if (g[0] != nullptr) g[0]->array() += up.value();
                     });
}

Var mse(Var a, Var b) {
  Tape& tape = tape_of(a, b, "mse");
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  if (!same_shape(ta, tb)) shape_error("mse", ta, tb);
  const double n = static_cast<double>(ta.size());
  Tensor out = Tensor::scalar((ta.array() - tb.array()).square().mean());
  return tape.record("mse", std::move(out), {a, b},
                     [ta, tb, n](const Tensor& up, const std::vector<Tensor*>& g) {
                       const Eigen::ArrayXd d = 2.0 / n * (ta.array() - tb.array()) * up.value();
                       if (g[0] != nullptr) g[0]->array() += d;
                       if (g[1] != nullptr) g[1]->array() -= d;
                     });
}

Var add_rowwise(Var x, Var row) {
  Tape& tape = tape_of(x, row, "add_rowwise");
  const Tensor& tx = val(x);
  const Tensor& tr = val(row);
  if (tx.rank() != 2 || tr.rank() != 1 || tr.shape()[0] != tx.shape()[1]) {
    shape_error("add_rowwise", tx, tr);
  }
  Matrix y = tx.mat().rowwise() + tr.to_vector().transpose();
  return tape.record("add_rowwise", Tensor::from_matrix(y), {x, row},
                     [](const Tensor& up, const std::vector<Tensor*>& g) {
                       if (g[0] != nullptr) g[0]->array() += up.array();
                       if (g[1] != nullptr) {
                         g[1]->array() += up.mat().colwise().sum().transpose().array();
                       }
                     });
}

Var mul_rowwise(Var x, Var row) {
  Tape& tape = tape_of(x, row, "mul_rowwise");
  const Tensor& tx = val(x);
  const Tensor& tr = val(row);
  if (tx.rank() != 2 || tr.rank() != 1 || tr.shape()[0] != tx.shape()[1]) {
    shape_error("mul_rowwise", tx, tr);
  }
  Matrix y = tx.mat().array().rowwise() * tr.to_vector().transpose().array();
  return tape.record(
      "mul_rowwise", Tensor::from_matrix(y), {x, row},
      [tx, tr](const Tensor& up, const std::vector<Tensor*>& g) {
        if (g[0] != nullptr) {
          g[0]->mat().array() += up.mat().array().rowwise() * tr.to_vector().transpose().array();
        }
        if (g[1] != nullptr) {
          g[1]->array() +=
              (up.mat().array() * tx.mat().array()).colwise().sum().transpose();
        }
      });
}

Var concat_cols(Var a, Var b) {
  Tape& tape = tape_of(a, b, "concat_cols");
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  if (ta.rank() != 2 || tb.rank() != 2 || ta.rows() != tb.rows()) {
    shape_error("concat_cols", ta, tb);
  }
  const int ca = ta.cols();
  const int cb = tb.cols();
  Matrix y(ta.rows(), ca + cb);
  y.leftCols(ca) = ta.mat();
  y.rightCols(cb) = tb.mat();
  return tape.record("concat_cols", Tensor::from_matrix(y), {a, b},
                     [ca, cb](const Tensor& up, const std::vector<Tensor*>& g) {
                       if (g[0] != nullptr) g[0]->mat() += up.mat().leftCols(ca);
                       if (g[1] != nullptr) g[1]->mat() += up.mat().rightCols(cb);
                     });
}

Var slice_cols(Var x, int start, int len) {
  Tape& tape = *x.tape;
  const Tensor& tx = val(x);
  if (tx.rank() != 2 || start < 0 || len <= 0 || start + len > tx.cols()) {
    throw ContractError("slice_cols: range [" + std::to_string(start) + ", " +
                        std::to_string(start + len) + ") out of " + tx.shape_str());
  }
  Matrix y = tx.mat().middleCols(start, len);
  return tape.record("slice_cols", Tensor::from_matrix(y), {x},
                     [start, len](const Tensor& up, const std::vector<Tensor*>& g) {
                       if (g[0] != nullptr) {
                         g[0]->mat().middleCols(start, len) += up.mat();
                       }
                     });
}

Var cross_entropy(Var logits, const std::vector<int>& target_ids) {
  Tape& tape = *logits.tape;
  const Tensor& tl = val(logits);
  if (tl.rank() != 2 || static_cast<int>(target_ids.size()) != tl.rows()) {
    throw ContractError("cross_entropy: need one target per row, got " +
                        std::to_string(target_ids.size()) + " targets for " + tl.shape_str());
  }
  const int T = tl.rows();
  const int K = tl.cols();
  for (int id : target_ids) {
    if (id < 0 || id >= K) {
      throw ContractError("cross_entropy: target id " + std::to_string(id) + " out of range [0, " +
                          std::to_string(K) + ")");
    }
  }
  const Matrix logp = log_softmax_rows(tl.mat());
  double nll = 0.0;
  for (int t = 0; t < T; ++t) nll -= logp(t, target_ids[t]);
  nll /= T;
  const Matrix sm = logp.array().exp();
  return tape.record("cross_entropy", Tensor::scalar(nll), {logits},
                     [sm, target_ids, T](const Tensor& up, const std::vector<Tensor*>& g) {
                       if (g[0] == nullptr) return;
                       Matrix d = sm / static_cast<double>(T);
                       for (int t = 0; t < T; ++t) d(t, target_ids[t]) -= 1.0 / T;
                       g[0]->mat() += up.value() * d;
                     });
}

}  // namespace nam::numerics
