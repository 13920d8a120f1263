#include "nam/align/dtw.hpp"

#include <algorithm>
#include <limits>

namespace nam::align {

DtwPath dtw(const Matrix& a, const Matrix& b) {
  if (a.rows() == 0 || b.rows() == 0) throw ContractError("dtw: empty sequence");
  if (a.cols() != b.cols()) {
    throw ContractError("dtw: feature dims differ (" + std::to_string(a.cols()) + " vs " +
                        std::to_string(b.cols()) + ")");
  }
  const int ta = static_cast<int>(a.rows());
  const int tb = static_cast<int>(b.rows());

  Matrix local(ta, tb);
  for (int i = 0; i < ta; ++i) {
    for (int j = 0; j < tb; ++j) local(i, j) = (a.row(i) - b.row(j)).norm();
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  Matrix acc = Matrix::Constant(ta, tb, kInf);
  // Predecessor direction: 0 diagonal, 1 from (i-1,j), 2 from (i,j-1).
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> from(ta, tb);
  from.setZero();

  acc(0, 0) = local(0, 0);
  for (int i = 0; i < ta; ++i) {
    for (int j = 0; j < tb; ++j) {
      if (i == 0 && j == 0) continue;
      double best = kInf;
      std::uint8_t dir = 0;
      if (i > 0 && j > 0 && acc(i - 1, j - 1) < best) {
        best = acc(i - 1, j - 1);
        dir = 0;
      }
      if (i > 0 && acc(i - 1, j) < best) {
        best = acc(i - 1, j);
        dir = 1;
      }
      if (j > 0 && acc(i, j - 1) < best) {
        best = acc(i, j - 1);
        dir = 2;
      }
      acc(i, j) = best + local(i, j);
      from(i, j) = dir;
    }
  }

  DtwPath path;
  path.cost = acc(ta - 1, tb - 1);
  int i = ta - 1, j = tb - 1;
  while (true) {
    path.steps.emplace_back(i, j);
    if (i == 0 && j == 0) break;
    switch (from(i, j)) {
      case 0: --i; --j; break;
      case 1: --i; break;
      default: --j; break;
    }
  }
  std::reverse(path.steps.begin(), path.steps.end());
  return path;
}

}  // namespace nam::align
