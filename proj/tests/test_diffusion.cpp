#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nam/diffusion/denoiser.hpp"
#include "nam/rng.hpp"

#include <cmath>
#include <filesystem>

using namespace nam;
using namespace nam::diffusion;

namespace {

Matrix random_matrix(int r, int c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

// Conditional expectation E[eps | x_t] for x0 ~ N(mu, sigma^2 I): the exact
// score-based denoiser, derived from the joint Gaussian of (x0, eps, x_t).
NoisePredictor analytic_denoiser(const NoiseSchedule& schedule, double mu, double sigma) {
  return [&schedule, mu, sigma](const Matrix& x_t, int t, bool) {
    const double abar = schedule.alpha_bar_at(t);
    const double denom = abar * sigma * sigma + 1.0 - abar;
    return Matrix(std::sqrt(1.0 - abar) * (x_t.array() - std::sqrt(abar) * mu) / denom);
  };
}

}  // namespace

TEST_CASE("single-step schedule: alpha_bar equals 1 - beta") {
  const auto s = make_schedule(1, 0.5, 0.5);
  CHECK(s.alpha_bar_at(1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.alpha_bar_at(0) == 1.0);
}

TEST_CASE("cumulative table matches the direct product") {
  const auto s = make_schedule(50, 1e-4, 0.02);
  double running = 1.0;
  for (int t = 1; t <= 50; ++t) {
    running *= 1.0 - s.beta[t - 1];
    REQUIRE(s.alpha_bar_at(t) == running);  // same fp product, bit-exact
  }
  for (int t = 1; t <= 50; ++t) REQUIRE(s.alpha_bar_at(t) < s.alpha_bar_at(t - 1));
}

TEST_CASE("invalid schedule parameters are rejected") {
  CHECK_THROWS_AS(make_schedule(0, 1e-4, 0.02), ContractError);
  CHECK_THROWS_AS(make_schedule(10, 0.0, 0.02), ContractError);
  CHECK_THROWS_AS(make_schedule(10, 0.03, 0.02), ContractError);
  CHECK_THROWS_AS(make_schedule(10, 1e-4, 1.0), ContractError);
  CHECK_THROWS_AS(make_schedule(10, 1e-4, 0.02, "cosine"), ContractError);
}

TEST_CASE("forward diffusion with zero noise scales by sqrt(alpha_bar)") {
  Rng rng(1);
  const auto s = make_schedule(20, 1e-3, 0.1);
  const Matrix x0 = random_matrix(4, 3, rng);
  const Matrix zero = Matrix::Zero(4, 3);
  for (int t : {1, 7, 20}) {
    const Matrix x_t = forward_diffuse(s, x0, t, zero);
    REQUIRE((x_t - std::sqrt(s.alpha_bar_at(t)) * x0).cwiseAbs().maxCoeff() < 1e-15);
  }
  CHECK_THROWS_AS(forward_diffuse(s, x0, 0, zero), ContractError);
  CHECK_THROWS_AS(forward_diffuse(s, x0, 21, zero), ContractError);
}

TEST_CASE("vanishing beta makes the one-step kernel the identity") {
  Rng rng(2);
  const auto s = make_schedule(1, 1e-12, 1e-12);
  const Matrix x0 = random_matrix(3, 3, rng);
  Matrix bounded(3, 3);
  for (Eigen::Index i = 0; i < bounded.size(); ++i) {
    bounded.data()[i] = 2.0 * rng.uniform() - 1.0;  // |noise| <= 1
  }
  const Matrix x1 = forward_diffuse(s, x0, 1, bounded);
  CHECK((x1 - x0).cwiseAbs().maxCoeff() <= 1e-6 + 1e-9);
}

TEST_CASE("composed one-step kernels match the closed-form marginal (3 sigma)") {
  Rng rng(3);
  const auto s = make_schedule(50, 1e-4, 0.02);
  const int t = 10;
  const double x0 = 0.7;
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = x0;
    for (int step = 1; step <= t; ++step) {
      x = std::sqrt(1.0 - s.beta[step - 1]) * x + std::sqrt(s.beta[step - 1]) * rng.normal();
    }
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  const double want_mean = std::sqrt(s.alpha_bar_at(t)) * x0;
  const double want_var = 1.0 - s.alpha_bar_at(t);
  const double se_mean = std::sqrt(want_var / n);
  const double se_var = want_var * std::sqrt(2.0 / (n - 1));
  CHECK(std::abs(mean - want_mean) < 3.0 * se_mean);
  CHECK(std::abs(var - want_var) < 3.0 * se_var);
}

TEST_CASE("posterior at t=1 is deterministic and centered on x0") {
  Rng rng(4);
  const auto s = make_schedule(10, 1e-3, 0.1);
  const Matrix x0 = random_matrix(2, 5, rng);
  const Matrix x1 = random_matrix(2, 5, rng);
  const auto p = posterior_params(s, x1, x0, 1);
  CHECK(p.variance == 0.0);
  CHECK((p.mean - x0).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("posterior mean of a noise-free x_t is sqrt(alpha_bar_prev) x0") {
  Rng rng(5);
  const auto s = make_schedule(30, 1e-4, 0.05);
  const Matrix x0 = random_matrix(3, 4, rng);
  for (int t : {2, 11, 30}) {
    const Matrix x_t = std::sqrt(s.alpha_bar_at(t)) * x0;
    const auto p = posterior_params(s, x_t, x0, t);
    const Matrix want = std::sqrt(s.alpha_bar_at(t - 1)) * x0;
    REQUIRE((p.mean - want).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("posterior variance lies in (0, beta_t] for t >= 2") {
  const auto s = make_schedule(40, 1e-4, 0.3);
  Rng rng(6);
  const Matrix a = random_matrix(2, 2, rng);
  const Matrix b = random_matrix(2, 2, rng);
  for (int t = 2; t <= 40; ++t) {
    const auto p = posterior_params(s, a, b, t);
    REQUIRE(p.variance > 0.0);
    REQUIRE(p.variance <= s.beta[t - 1]);
  }
}

TEST_CASE("conditioner concatenates rate-matched streams") {
  Rng rng(7);
  const Matrix lip = random_matrix(5, 3, rng);   // 25 Hz
  const Matrix nam = random_matrix(10, 4, rng);  // 50 Hz
  const Matrix text = random_matrix(10, 2, rng);
  const Conditioner c = build_conditioner(lip, nam, &text);
  CHECK(c.frame_count() == 10);
  CHECK(c.dims() == 3 + 4 + 2);
  CHECK(c.dims() == c.lip_dims + c.nam_dims + c.text_dims);
  // lip frames repeat in pairs
  CHECK(c.frames.block(0, 0, 1, 3) == c.frames.block(1, 0, 1, 3));
  // odd-length nam stream trims the doubled lip stream
  const Matrix nam9 = random_matrix(9, 4, rng);
  CHECK(build_conditioner(lip, nam9).frame_count() == 9);
  // incompatible lengths are rejected
  const Matrix lip3 = random_matrix(3, 3, rng);
  CHECK_THROWS_AS(build_conditioner(lip3, nam), ContractError);
}

TEST_CASE("zero denoiser: training loss starts at E|eps| = sqrt(2/pi)") {
  DenoiserConfig dc;
  dc.mel_dims = 8;
  dc.cond_dims = 4;
  dc.hidden_dims = 16;
  DenoiserNet net(dc, 123);
  for (auto* p : net.params()) p->array().setZero();

  Rng rng(8);
  std::vector<DiffusionExample> data;
  for (int i = 0; i < 8; ++i) {
    data.push_back({random_matrix(25, 8, rng), random_matrix(25, 4, rng)});
  }
  std::vector<const DiffusionExample*> batch;
  for (const auto& ex : data) batch.push_back(&ex);

  const auto schedule = make_schedule(50, 1e-4, 0.02);
  Rng step_rng(9);
  const double loss = train_step(net, batch, schedule, 0.0, step_rng, nullptr);
  // 8 * 25 * 8 = 1600 |N(0,1)| draws; sd of the mean ~ 0.603 / 40.
  CHECK(loss == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(0.06));
}

TEST_CASE("drop probability 0 never uses the null token, 1 always does") {
  DenoiserConfig dc;
  dc.mel_dims = 4;
  dc.cond_dims = 3;
  dc.hidden_dims = 8;
  DenoiserNet net(dc, 5);
  Rng rng(10);
  std::vector<DiffusionExample> data{{random_matrix(6, 4, rng), random_matrix(6, 3, rng)}};
  const auto schedule = make_schedule(10, 1e-3, 0.1);

  DiffusionTrainOptions opts;
  opts.steps = 20;
  opts.batch = 4;
  opts.drop_prob = 0.0;
  DenoiserNet net_a = net;
  const auto r0 = train_diffusion(net_a, data, schedule, opts);
  CHECK(r0.null_token_uses == 0);

  opts.drop_prob = 1.0;
  DenoiserNet net_b = net;
  const auto r1 = train_diffusion(net_b, data, schedule, opts);
  CHECK(r1.null_token_uses == 20 * 4);
}

TEST_CASE("2000 training steps shrink the toy-task loss below 0.9x") {
  DenoiserConfig dc;
  dc.mel_dims = 4;
  dc.cond_dims = 4;
  dc.hidden_dims = 32;
  dc.t_embed_dims = 8;
  DenoiserNet net(dc, 77);

  // Gaussian toy task: x0 ~ N(mu, sigma^2 I), constant conditioner.
  Rng rng(11);
  std::vector<DiffusionExample> data;
  for (int i = 0; i < 64; ++i) {
    Matrix x0 = random_matrix(8, 4, rng, 0.6);
    x0.array() += 1.0;
    data.push_back({x0, Matrix::Zero(8, 4)});
  }
  const auto schedule = make_schedule(50, 1e-4, 0.02);
  DiffusionTrainOptions opts;
  opts.steps = 2000;
  opts.batch = 8;
  opts.seed = 3;
  const auto result = train_diffusion(net, data, schedule, opts);
  const double initial = result.loss_history.front();
  double tail = 0.0;  // average the last 50 steps; single-batch losses are noisy
  for (int i = 0; i < 50; ++i) tail += result.loss_history[result.loss_history.size() - 1 - i];
  tail /= 50;
  CHECK(tail < 0.9 * initial);
}

TEST_CASE("cfg identities: w=1 is conditional, w=0 unconditional, bitwise") {
  DenoiserConfig dc;
  dc.mel_dims = 6;
  dc.cond_dims = 5;
  dc.hidden_dims = 12;
  const DenoiserNet net(dc, 21);
  Rng rng(12);
  const Matrix x = random_matrix(7, 6, rng);
  const Matrix cond = random_matrix(7, 5, rng);
  CHECK(cfg_predict(net, x, 3, cond, 1.0) == net.predict(x, 3, &cond));
  CHECK(cfg_predict(net, x, 3, cond, 0.0) == net.predict(x, 3, nullptr));
  CHECK_THROWS_AS(cfg_predict(net, x, 3, cond, -0.5), ContractError);
}

TEST_CASE("cfg blend is affine in w, bit-exact on representable inputs") {
  // Dyadic values keep every intermediate exactly representable, so the
  // affine identity must hold bit-for-bit.
  Rng rng(13);
  Matrix u(4, 4), c(4, 4);
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    u.data()[i] = rng.uniform_int(-(1 << 20), 1 << 20) * 0x1.0p-20;
    c.data()[i] = rng.uniform_int(-(1 << 20), 1 << 20) * 0x1.0p-20;
  }
  const Matrix e0 = cfg_blend(u, c, 0.0);
  const Matrix e1 = cfg_blend(u, c, 1.0);
  const Matrix e2 = cfg_blend(u, c, 2.0);
  CHECK(Matrix(e2 - e0) == Matrix(2.0 * (e1 - e0)));
  const Matrix e3 = cfg_blend(u, c, 3.0);
  CHECK(Matrix(e3 - e0) == Matrix(3.0 * (e1 - e0)));
}

TEST_CASE("guidance is a no-op when the denoiser ignores conditioning") {
  const auto schedule = make_schedule(20, 1e-4, 0.1);
  const NoisePredictor blind = [](const Matrix& x_t, int t, bool) {
    return Matrix(0.3 * x_t.array() + 0.01 * t);
  };
  SampleOptions opts;
  opts.seed = 99;
  opts.guidance_w = 0.0;
  const Matrix a = sample(blind, 5, 3, schedule, opts);
  opts.guidance_w = 5.0;
  const Matrix b = sample(blind, 5, 3, schedule, opts);
  CHECK(a == b);
}

TEST_CASE("sampling is deterministic for a fixed seed") {
  DenoiserConfig dc;
  dc.mel_dims = 5;
  dc.cond_dims = 4;
  dc.hidden_dims = 8;
  const DenoiserNet net(dc, 31);
  Rng rng(14);
  Conditioner cond;
  cond.frames = random_matrix(9, 4, rng);
  cond.nam_dims = 4;
  const auto schedule = make_schedule(25, 1e-4, 0.05);
  const Matrix a = sample(net, cond, schedule, 1.5, 4242);
  const Matrix b = sample(net, cond, schedule, 1.5, 4242);
  CHECK(a == b);
}

TEST_CASE("analytic gaussian denoiser reproduces the data moments") {
  // End-to-end reverse-process correctness with no training: for
  // x0 ~ N(mu, sigma^2), the exact conditional-expectation denoiser drives
  // ancestral sampling back to the data distribution.
  const auto schedule = make_schedule(50, 1e-4, 0.25);
  const double mu = 1.0, sigma = 1.0;
  const auto predictor = analytic_denoiser(schedule, mu, sigma);

  SampleOptions opts;
  opts.guidance_w = 1.0;
  const int n = 10000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    opts.seed = 1000 + i;
    const Matrix x = sample(predictor, 1, 1, schedule, opts);
    sum += x(0, 0);
    sum_sq += x(0, 0) * x(0, 0);
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean - mu) < 0.05);
  CHECK(std::abs(var - sigma * sigma) < 0.1 * sigma * sigma);
}

TEST_CASE("denoiser checkpoints round trip") {
  DenoiserConfig dc;
  dc.mel_dims = 6;
  dc.cond_dims = 9;
  dc.hidden_dims = 12;
  DenoiserNet net(dc, 55);
  net.set_clamp(-3.0, 4.0);
  const auto schedule = make_schedule(30, 1e-4, 0.05);
  const std::string path =
      (std::filesystem::temp_directory_path() / "denoiser.namc").string();
  save_denoiser(path, net, schedule, {{"note", "test"}});
  const auto loaded = load_denoiser(path);
  CHECK(loaded.net.config().cond_dims == 9);
  CHECK(loaded.net.clamp_lo() == -3.0);
  CHECK(loaded.schedule.steps == 30);
  CHECK(loaded.meta.at("note") == "test");
  Rng rng(15);
  const Matrix x = random_matrix(4, 6, rng);
  const Matrix cond = random_matrix(4, 9, rng);
  CHECK(net.predict(x, 7, &cond) == loaded.net.predict(x, 7, &cond));
}

TEST_CASE("empty batches and mismatched conditioners are contract errors") {
  DenoiserConfig dc;
  DenoiserNet net(dc, 1);
  const auto schedule = make_schedule(10, 1e-3, 0.1);
  Rng rng(16);
  CHECK_THROWS_AS(train_step(net, {}, schedule, 0.1, rng, nullptr), ContractError);
  std::vector<DiffusionExample> bad{{Matrix::Zero(5, dc.mel_dims), Matrix::Zero(4, dc.cond_dims)}};
  CHECK_THROWS_AS(train_diffusion(net, bad, schedule, DiffusionTrainOptions{}), ContractError);
}
