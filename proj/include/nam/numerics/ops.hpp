#pragma once

#include "nam/numerics/tape.hpp"

#include <vector>

namespace nam::numerics {

// Primitive ops recorded on a Tape. Shapes are strict: elementwise ops take
// equal shapes or one scalar operand; there is no other broadcasting. Rank-1
// tensors act as a single row in rowwise ops.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);     // elementwise
Var scale(Var x, double c);

Var matmul(Var a, Var b);  // rank-2 only
Var transpose(Var x);

// 1D convolution along the time axis with zero ("same") padding.
// x: [T] or [T,C]. kernel: [K] (one kernel shared by every channel) or
// [K,Cin,Cout] with Cin == C. Output: [T] / [T,C] / [T,Cout].
Var conv1d(Var x, Var kernel);

Var softmax(Var x);        // rowwise
Var log_softmax(Var x);    // rowwise
Var layer_norm(Var x, double eps = 1e-5);  // rowwise standardization, no affine
Var relu(Var x);
Var abs(Var x);

Var mean(Var x);  // -> scalar
Var sum(Var x);   // -> scalar
Var mse(Var a, Var b);  // mean squared error -> scalar

Var add_rowwise(Var x, Var row);  // x: [T,C], row: [C]
Var mul_rowwise(Var x, Var row);

Var concat_cols(Var a, Var b);
Var slice_cols(Var x, int start, int len);

// Mean negative log-likelihood of softmax(logits) rows at the target ids.
Var cross_entropy(Var logits, const std::vector<int>& target_ids);

// Rowwise softmax/log-softmax on plain matrices (shared by the tape ops and
// non-trainable code paths).
Matrix softmax_rows(const Matrix& x);
Matrix log_softmax_rows(const Matrix& x);

}  // namespace nam::numerics
