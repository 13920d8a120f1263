#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nam/numerics/grad_check.hpp"
#include "nam/numerics/optim.hpp"
#include "nam/rng.hpp"

#include <sstream>

using namespace nam;
using namespace nam::numerics;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t.at(i) = scale * rng.normal();
  return t;
}

}  // namespace

TEST_CASE("matmul identity leaves operand unchanged") {
  Tape tape;
  Matrix eye = Matrix::Identity(2, 2);
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  Var out = matmul(tape.leaf(Tensor::from_matrix(eye)), tape.leaf(Tensor::from_matrix(m)));
  CHECK(tape.value(out).to_matrix() == m);
}

TEST_CASE("softmax rows are probability simplex points") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Tape tape;
    const int cols = rng.uniform_int(1, 9);
    Var out = softmax(tape.leaf(random_tensor({rng.uniform_int(1, 6), cols}, rng, 5.0)));
    const Tensor& y = tape.value(out);
    for (int r = 0; r < y.rows(); ++r) {
      double row_sum = 0.0;
      for (int c = 0; c < y.cols(); ++c) {
        const double v = y.mat()(r, c);
        CHECK(v >= 0.0);
        row_sum += v;
      }
      CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("conv1d with a delta kernel is the identity") {
  Tape tape;
  Rng rng(3);
  Tensor signal = random_tensor({10}, rng);
  Var out = conv1d(tape.leaf(signal), tape.leaf(Tensor::constant({1}, 1.0)));
  CHECK(tape.value(out).array().isApprox(signal.array()));
}

TEST_CASE("shape mismatch reports both shapes") {
  Tape tape;
  Var a = tape.leaf(Tensor::zeros({2, 3}));
  Var b = tape.leaf(Tensor::zeros({4, 2}));
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[2x3]"), ContractError);
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[4x2]"), ContractError);
}

TEST_CASE("non-finite results are an error, never silent") {
  Tape tape;
  Tensor big = Tensor::constant({2}, 1e308);
  Var x = tape.leaf(big);
  CHECK_THROWS_AS(add(x, x), ContractError);
}

TEST_CASE("backward: d(x^2)/dx at 3 is 6") {
  Tape tape;
  Var x = tape.param(Tensor::scalar(3.0));
  Var loss = mul(x, x);
  const auto grads = tape.gradients(loss, {x});
  CHECK(grads[0].value() == doctest::Approx(6.0));
}

TEST_CASE("backward: d sum|x| is the sign pattern") {
  Tape tape;
  Tensor x0 = Tensor::zeros({2});
  x0.at(0) = -1.0;
  x0.at(1) = 2.0;
  Var x = tape.param(x0);
  Var loss = sum(abs(x));
  const auto grads = tape.gradients(loss, {x});
  CHECK(grads[0].at(0) == -1.0);
  CHECK(grads[0].at(1) == 1.0);
}

TEST_CASE("backward on a non-scalar loss is a contract error") {
  Tape tape;
  Var x = tape.param(Tensor::zeros({3}));
  CHECK_THROWS_AS(tape.gradients(relu(x), {x}), ContractError);
}

TEST_CASE("backward is deterministic: identical gradients across runs") {
  Rng rng(21);
  const Tensor a = random_tensor({4, 4}, rng);
  const Tensor b = random_tensor({4, 4}, rng);
  const auto run = [&]() {
    Tape tape;
    Var va = tape.param(a);
    Var vb = tape.param(b);
    Var loss = mean(abs(matmul(softmax(va), layer_norm(vb))));
    return tape.gradients(loss, {va, vb});
  };
  const auto g1 = run();
  const auto g2 = run();
  for (int k = 0; k < 2; ++k) {
    for (std::int64_t i = 0; i < g1[k].size(); ++i) {
      CHECK(g1[k].at(i) == g2[k].at(i));  // bit-identical
    }
  }
}

TEST_CASE("constant function has exactly zero gradient") {
  Tape tape;
  Var x = tape.param(Tensor::zeros({3}));
  Var c = tape.leaf(Tensor::scalar(7.0));
  Var loss = add(mean(scale(x, 0.0)), c);
  const auto grads = tape.gradients(loss, {x});
  for (std::int64_t i = 0; i < grads[0].size(); ++i) CHECK(grads[0].at(i) == 0.0);
}

TEST_CASE("grad_check: quadratic form is tight") {
  Rng rng(5);
  const Tensor q = random_tensor({4, 4}, rng);
  const double err = grad_check(
      [&](Tape& tape, Var x) {
        Var qm = tape.leaf(q);
        return sum(mul(matmul(x, qm), x));
      },
      random_tensor({1, 4}, rng), 1e-5);
  CHECK(err < 1e-6);
}

// Finite-difference oracle over every primitive: analytic reverse-mode
// gradients vs central differences at 100 random points spanning the op set.
TEST_CASE("grad_check: every primitive agrees with central differences") {
  Rng rng(42);
  struct Case {
    const char* name;
    ScalarFn fn;
    std::vector<int> shape;
  };
  const Tensor fixed_mat = random_tensor({5, 4}, rng);
  const Tensor fixed_row = random_tensor({4}, rng);
  const Tensor kernel1 = random_tensor({3}, rng);
  const Tensor kernel3 = random_tensor({3, 4, 2}, rng);
  const Tensor mix = random_tensor({5, 7}, rng);
  const std::vector<int> ce_ids{1, 0, 3, 2, 1};

  const std::vector<Case> cases{
      {"add", [&](Tape& t, Var x) { return mean(add(x, t.leaf(fixed_mat))); }, {5, 4}},
      {"add_scalar",
       [&](Tape& t, Var x) { return mean(add(t.leaf(Tensor::scalar(2.0)), x)); },
       {5, 4}},
      {"sub", [&](Tape& t, Var x) { return mean(sub(t.leaf(fixed_mat), x)); }, {5, 4}},
      {"mul", [&](Tape& t, Var x) { return mean(mul(x, t.leaf(fixed_mat))); }, {5, 4}},
      {"mul_scalar",
       [&](Tape& t, Var x) { return mean(mul(x, t.leaf(Tensor::scalar(-1.7)))); },
       {5, 4}},
      {"scale", [&](Tape&, Var x) { return mean(scale(x, 3.25)); }, {5, 4}},
      {"matmul_lhs", [&](Tape& t, Var x) { return mean(matmul(x, t.leaf(fixed_mat))); }, {3, 5}},
      {"matmul_rhs", [&](Tape& t, Var x) { return mean(matmul(t.leaf(fixed_mat), x)); }, {4, 3}},
      {"transpose",
       [&](Tape& t, Var x) { return mean(matmul(transpose(x), t.leaf(fixed_mat))); },
       {5, 3}},
      {"conv1d_shared",
       [&](Tape& t, Var x) { return mean(conv1d(x, t.leaf(kernel1))); },
       {7, 4}},
      {"conv1d_shared_kernel",
       [&](Tape& t, Var x) { return mean(conv1d(t.leaf(fixed_mat), x)); },
       {3}},
      {"conv1d_full", [&](Tape& t, Var x) { return mean(conv1d(x, t.leaf(kernel3))); }, {6, 4}},
      {"conv1d_full_kernel",
       [&](Tape& t, Var x) { return mean(conv1d(t.leaf(fixed_mat), x)); },
       {3, 4, 2}},
      {"softmax",
       [&](Tape& t, Var x) { return mean(mul(softmax(x), t.leaf(fixed_mat))); },
       {5, 4}},
      {"log_softmax",
       [&](Tape& t, Var x) { return mean(mul(log_softmax(x), t.leaf(fixed_mat))); },
       {5, 4}},
      {"layer_norm",
       [&](Tape& t, Var x) { return mean(mul(layer_norm(x), t.leaf(fixed_mat))); },
       {5, 4}},
      {"relu", [&](Tape&, Var x) { return mean(relu(x)); }, {5, 4}},
      {"abs", [&](Tape&, Var x) { return mean(abs(x)); }, {5, 4}},
      {"mean", [&](Tape&, Var x) { return mean(x); }, {5, 4}},
      {"sum", [&](Tape&, Var x) { return sum(x); }, {5, 4}},
      {"mse", [&](Tape& t, Var x) { return mse(x, t.leaf(fixed_mat)); }, {5, 4}},
      {"add_rowwise_x",
       [&](Tape& t, Var x) { return mean(add_rowwise(x, t.leaf(fixed_row))); },
       {5, 4}},
      {"add_rowwise_r",
       [&](Tape& t, Var x) { return mean(add_rowwise(t.leaf(fixed_mat), x)); },
       {4}},
      {"mul_rowwise_x",
       [&](Tape& t, Var x) { return mean(mul_rowwise(x, t.leaf(fixed_row))); },
       {5, 4}},
      {"mul_rowwise_r",
       [&](Tape& t, Var x) { return mean(mul_rowwise(t.leaf(fixed_mat), x)); },
       {4}},
      {"concat_cols",
       [&](Tape& t, Var x) { return mean(mul(concat_cols(x, t.leaf(fixed_mat)), t.leaf(mix))); },
       {5, 3}},
      {"slice_cols", [&](Tape&, Var x) { return mean(slice_cols(x, 1, 2)); }, {5, 4}},
      {"cross_entropy", [&](Tape&, Var x) { return cross_entropy(x, ce_ids); }, {5, 4}},
  };

  int points = 0;
  double worst = 0.0;
  for (int round = 0; round < 4; ++round) {
    for (const auto& c : cases) {
      Tensor point = random_tensor(c.shape, rng);
      // relu/abs kinks: keep coordinates away from zero.
      for (std::int64_t i = 0; i < point.size(); ++i) {
        if (std::abs(point.at(i)) < 0.05) point.at(i) += point.at(i) < 0 ? -0.1 : 0.1;
      }
      const double err = grad_check(c.fn, point, 1e-5);
      INFO(c.name);
      CHECK(err < 1e-4);
      worst = std::max(worst, err);
      ++points;
    }
  }
  CHECK(points >= 100);
  MESSAGE("worst relative error ", worst, " over ", points, " checks");
}

TEST_CASE("tensor serialization round trip") {
  Rng rng(9);
  Tensor t = random_tensor({3, 2, 4}, rng);
  std::stringstream ss;
  write_tensor(ss, t);
  const std::string blob = ss.str();
  CHECK(blob.substr(0, 4) == "NAMT");
  CHECK(blob.size() == 4 + 4 + 12 + 24 * sizeof(double));  // magic, rank, dims, payload
  Tensor back = read_tensor(ss);
  CHECK(back.shape() == t.shape());
  for (std::int64_t i = 0; i < t.size(); ++i) CHECK(back.at(i) == t.at(i));
}

TEST_CASE("tensor deserialization rejects bad magic") {
  std::stringstream ss;
  ss << "JUNKxxxxxxxx";
  CHECK_THROWS_AS(read_tensor(ss), IoError);
}

TEST_CASE("optimizers shrink a quadratic objective") {
  Rng rng(13);
  const auto run = [&](auto&& opt) {
    Tensor x = random_tensor({4}, rng);
    for (int it = 0; it < 200; ++it) {
      Tape tape;
      Var v = tape.param(x);
      Var loss = mse(v, tape.leaf(Tensor::zeros({4})));
      auto grads = tape.gradients(loss, {v});
      std::vector<Tensor*> params{&x};
      opt.step(params, grads);
    }
    return x.array().abs().maxCoeff();
  };
  CHECK(run(SgdMomentum(0.05, 0.9)) < 1e-3);
  CHECK(run(Adam(0.05)) < 1e-3);
}
