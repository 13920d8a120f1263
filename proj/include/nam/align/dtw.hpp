#pragma once

#include "nam/common.hpp"

#include <utility>
#include <vector>

namespace nam::align {

// Monotone warping path from (0,0) to (Ta-1, Tb-1) with steps
// {(1,0),(0,1),(1,1)}; cost is the sum of local distances along the path.
struct DtwPath {
  std::vector<std::pair<int, int>> steps;
  double cost = 0.0;
};

// Globally optimal path under Euclidean frame distance.
DtwPath dtw(const Matrix& a, const Matrix& b);

}  // namespace nam::align
