#include "nam/diffusion/denoiser.hpp"

#include "nam/align/regulate.hpp"
#include "nam/io/checkpoint.hpp"

#include <cmath>

namespace nam::diffusion {

using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

Conditioner build_conditioner(const Matrix& lip25, const Matrix& nam50, const Matrix* text50) {
  Matrix lip50 = align::repeat_frames(lip25, 2);
  const Eigen::Index frames = nam50.rows();
  if (lip50.rows() != frames && lip50.rows() != frames + 1) {
    throw ContractError("build_conditioner: lip stream covers " + std::to_string(lip50.rows()) +
                        " frames, nam stream " + std::to_string(frames));
  }
  lip50.conservativeResize(frames, Eigen::NoChange);
  if (text50 != nullptr && text50->rows() != frames) {
    throw ContractError("build_conditioner: text stream covers " + std::to_string(text50->rows()) +
                        " frames, nam stream " + std::to_string(frames));
  }

  Conditioner c;
  c.lip_dims = static_cast<int>(lip50.cols());
  c.nam_dims = static_cast<int>(nam50.cols());
  c.text_dims = text50 != nullptr ? static_cast<int>(text50->cols()) : 0;
  c.frames.resize(frames, c.lip_dims + c.nam_dims + c.text_dims);
  c.frames.leftCols(c.lip_dims) = lip50;
  c.frames.middleCols(c.lip_dims, c.nam_dims) = nam50;
  if (text50 != nullptr) c.frames.rightCols(c.text_dims) = *text50;
  return c;
}

Vector step_embedding(int t, int dims) {
  Vector e(dims);
  for (int i = 0; i < dims; ++i) {
    const double rate = std::pow(10000.0, -2.0 * (i / 2) / dims);
    e[i] = (i % 2 == 0) ? std::sin(t * rate) : std::cos(t * rate);
  }
  return e;
}

namespace {

Tensor random_weights(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::int64_t i = 0; i < t.size(); ++i) t.at(i) = scale * rng.normal();
  return t;
}

}  // namespace

DenoiserNet::DenoiserNet(const DenoiserConfig& config, std::uint64_t seed) : config_(config) {
  Rng rng(seed);
  const int in_dims = config.mel_dims + config.t_embed_dims + config.cond_dims;
  w_in_ = random_weights({in_dims, config.hidden_dims}, in_dims, rng);
  b_in_ = Tensor::zeros({config.hidden_dims}, true);
  conv_w_ = random_weights({config.conv_kernel, config.hidden_dims, config.hidden_dims},
                           config.conv_kernel * config.hidden_dims, rng);
  conv_b_ = Tensor::zeros({config.hidden_dims}, true);
  w_out_ = random_weights({config.hidden_dims, config.mel_dims}, config.hidden_dims, rng);
  b_out_ = Tensor::zeros({config.mel_dims}, true);
  null_token_ = Tensor::zeros({1, config.cond_dims}, true);
}

std::vector<Tensor*> DenoiserNet::params() {
  return {&w_in_, &b_in_, &conv_w_, &conv_b_, &w_out_, &b_out_, &null_token_};
}

std::vector<const Tensor*> DenoiserNet::params() const {
  return {&w_in_, &b_in_, &conv_w_, &conv_b_, &w_out_, &b_out_, &null_token_};
}

std::vector<std::string> DenoiserNet::param_names() {
  return {"w_in", "b_in", "conv_w", "conv_b", "w_out", "b_out", "null_token"};
}

void DenoiserNet::set_params(const std::vector<Tensor>& params) {
  auto mine = this->params();
  if (params.size() != mine.size()) throw ContractError("DenoiserNet: wrong parameter count");
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (!numerics::same_shape(*mine[i], params[i])) {
      numerics::shape_error("DenoiserNet::set_params", *mine[i], params[i]);
    }
    *mine[i] = params[i];
    mine[i]->set_requires_grad(true);
  }
}

std::vector<Var> DenoiserNet::bind(Tape& tape, bool trainable) const {
  std::vector<Var> vars;
  for (const Tensor* p : params()) {
    Tensor copy = *p;
    copy.set_requires_grad(trainable);
    vars.push_back(tape.leaf(std::move(copy)));
  }
  return vars;
}

Var DenoiserNet::null_cond(Tape& tape, const std::vector<Var>& params, int frames) const {
  Var ones = tape.leaf(Tensor::constant({frames, 1}, 1.0));
  return numerics::matmul(ones, params[6]);
}

Var DenoiserNet::forward(Tape& tape, const std::vector<Var>& params, Var x_t, int t,
                         Var cond) const {
  const int frames = tape.value(x_t).rows();
  Matrix emb(frames, config_.t_embed_dims);
  emb.rowwise() = step_embedding(t, config_.t_embed_dims).transpose();
  Var emb_node = tape.leaf(Tensor::from_matrix(emb));

  Var input = numerics::concat_cols(numerics::concat_cols(x_t, emb_node), cond);
  Var h = numerics::relu(numerics::add_rowwise(numerics::matmul(input, params[0]), params[1]));
  h = numerics::relu(numerics::add_rowwise(numerics::conv1d(h, params[2]), params[3]));
  return numerics::add_rowwise(numerics::matmul(h, params[4]), params[5]);
}

Matrix DenoiserNet::predict(const Matrix& x_t, int t, const Matrix* cond) const {
  Tape tape;
  const auto params = bind(tape, false);
  Var x = tape.leaf(Tensor::from_matrix(x_t));
  Var c = cond != nullptr ? tape.leaf(Tensor::from_matrix(*cond))
                          : null_cond(tape, params, static_cast<int>(x_t.rows()));
  if (cond != nullptr && cond->cols() != config_.cond_dims) {
    throw ContractError("DenoiserNet: conditioner has " + std::to_string(cond->cols()) +
                        " dims, expected " + std::to_string(config_.cond_dims));
  }
  return tape.value(forward(tape, params, x, t, c)).to_matrix();
}

double train_step(DenoiserNet& net, const std::vector<const DiffusionExample*>& batch,
                  const NoiseSchedule& schedule, double drop_prob, Rng& rng,
                  numerics::Adam* optimizer, long* null_uses) {
  if (batch.empty()) throw ContractError("train_step: empty batch");
  const Eigen::Index frames = batch.front()->x0.rows();
  for (const auto* ex : batch) {
    if (ex->x0.rows() != frames) {
      throw ContractError("train_step: segments must share one frame count");
    }
  }

  Tape tape;
  const auto params = net.bind(tape, optimizer != nullptr);
  Var total{};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const DiffusionExample& ex = *batch[i];
    const int t = rng.uniform_int(1, schedule.steps);
    Matrix noise(ex.x0.rows(), ex.x0.cols());
    for (Eigen::Index k = 0; k < noise.size(); ++k) noise.data()[k] = rng.normal();
    const Matrix x_t = forward_diffuse(schedule, ex.x0, t, noise);

    const bool drop = rng.uniform() < drop_prob;
    if (drop && null_uses != nullptr) ++(*null_uses);
    Var cond = drop ? net.null_cond(tape, params, static_cast<int>(frames))
                    : tape.leaf(Tensor::from_matrix(ex.cond));
    Var eps_hat = net.forward(tape, params, tape.leaf(Tensor::from_matrix(x_t)), t, cond);
    Var item = numerics::mean(numerics::abs(
        numerics::sub(eps_hat, tape.leaf(Tensor::from_matrix(noise)))));
    total = i == 0 ? item : numerics::add(total, item);
  }
  Var loss = numerics::scale(total, 1.0 / static_cast<double>(batch.size()));
  const double loss_value = tape.value(loss).value();

  if (optimizer != nullptr) {
    const auto grads = tape.gradients(loss, params);
    optimizer->step(net.params(), grads);
  }
  return loss_value;
}

DiffusionTrainResult train_diffusion(DenoiserNet& net, const std::vector<DiffusionExample>& data,
                                     const NoiseSchedule& schedule,
                                     const DiffusionTrainOptions& options) {
  if (data.empty()) throw ContractError("train_diffusion: no training data");
  for (const auto& ex : data) {
    if (ex.cond.rows() != ex.x0.rows()) {
      throw ContractError("train_diffusion: conditioner/mel frame mismatch");
    }
  }

  // x0-estimate clamp from the observed data range.
  double data_max = -1e300;
  for (const auto& ex : data) data_max = std::max(data_max, ex.x0.maxCoeff());
  net.set_clamp(std::log(1e-5), data_max + 1.0);

  Rng rng(options.seed);
  numerics::Adam optimizer(options.lr);
  DiffusionTrainResult result;
  for (int step = 0; step < options.steps; ++step) {
    std::vector<const DiffusionExample*> batch;
    for (int b = 0; b < options.batch; ++b) {
      batch.push_back(&data[rng.uniform_int(0, static_cast<int>(data.size()) - 1)]);
    }
    result.loss_history.push_back(train_step(net, batch, schedule, options.drop_prob, rng,
                                             &optimizer, &result.null_token_uses));
  }
  return result;
}

Matrix cfg_blend(const Matrix& eps_uncond, const Matrix& eps_cond, double w) {
  if (w < 0.0) throw ContractError("cfg_blend: guidance weight must be >= 0");
  if (w == 0.0) return eps_uncond;
  if (w == 1.0) return eps_cond;
  return eps_uncond + w * (eps_cond - eps_uncond);
}

Matrix cfg_predict(const DenoiserNet& net, const Matrix& x_t, int t, const Matrix& cond,
                   double w) {
  if (w < 0.0) throw ContractError("cfg_predict: guidance weight must be >= 0");
  if (w == 0.0) return net.predict(x_t, t, nullptr);
  if (w == 1.0) return net.predict(x_t, t, &cond);
  return cfg_blend(net.predict(x_t, t, nullptr), net.predict(x_t, t, &cond), w);
}

Matrix sample(const NoisePredictor& predictor, int frames, int mel_dims,
              const NoiseSchedule& schedule, const SampleOptions& options) {
  if (options.guidance_w < 0.0) throw ContractError("sample: guidance weight must be >= 0");
  Rng rng(options.seed);
  Matrix x(frames, mel_dims);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();

  for (int t = schedule.steps; t >= 1; --t) {
    Matrix eps;
    if (options.guidance_w == 0.0) {
      eps = predictor(x, t, false);
    } else if (options.guidance_w == 1.0) {
      eps = predictor(x, t, true);
    } else {
      eps = cfg_blend(predictor(x, t, false), predictor(x, t, true), options.guidance_w);
    }
    const double abar = schedule.alpha_bar_at(t);
    Matrix x0_est = (x - std::sqrt(1.0 - abar) * eps) / std::sqrt(abar);
    x0_est = x0_est.cwiseMax(options.clamp_lo).cwiseMin(options.clamp_hi);
    const PosteriorParams post = posterior_params(schedule, x, x0_est, t);
    x = post.mean;
    if (t > 1) {
      // Reverse noise scale sqrt(beta_t): with a noise-prediction denoiser the
      // x0 estimate carries its own uncertainty, and the tight posterior
      // variance under-disperses badly at T ~ 50 (the end-to-end Gaussian
      // moment test quantifies this).
      const double sd = std::sqrt(schedule.beta[t - 1]);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] += sd * rng.normal();
    }
  }
  return x;
}

Matrix sample(const DenoiserNet& net, const Conditioner& cond, const NoiseSchedule& schedule,
              double guidance_w, std::uint64_t seed) {
  SampleOptions options;
  options.guidance_w = guidance_w;
  options.seed = seed;
  options.clamp_lo = net.clamp_lo();
  options.clamp_hi = net.clamp_hi();
  const NoisePredictor predictor = [&](const Matrix& x_t, int t, bool conditional) {
    return net.predict(x_t, t, conditional ? &cond.frames : nullptr);
  };
  return sample(predictor, cond.frame_count(), net.config().mel_dims, schedule, options);
}

void save_denoiser(const std::string& path, const DenoiserNet& net, const NoiseSchedule& schedule,
                   const nlohmann::json& extra_meta) {
  io::Checkpoint ckpt;
  ckpt.meta = extra_meta;
  ckpt.meta["kind"] = "denoiser";
  ckpt.meta["mel_dims"] = net.config().mel_dims;
  ckpt.meta["cond_dims"] = net.config().cond_dims;
  ckpt.meta["hidden_dims"] = net.config().hidden_dims;
  ckpt.meta["t_embed_dims"] = net.config().t_embed_dims;
  ckpt.meta["conv_kernel"] = net.config().conv_kernel;
  ckpt.meta["clamp_lo"] = net.clamp_lo();
  ckpt.meta["clamp_hi"] = net.clamp_hi();
  ckpt.meta["schedule"] = {{"steps", schedule.steps},
                           {"beta_start", schedule.beta[0]},
                           {"beta_end", schedule.beta[schedule.steps - 1]}};
  const auto names = DenoiserNet::param_names();
  const auto params = net.params();
  for (std::size_t i = 0; i < names.size(); ++i) ckpt.tensors.emplace_back(names[i], *params[i]);
  io::save_checkpoint(path, ckpt);
}

LoadedDenoiser load_denoiser(const std::string& path) {
  const io::Checkpoint ckpt = io::load_checkpoint(path);
  if (ckpt.meta.value("kind", "") != "denoiser") {
    throw IoError("checkpoint " + path + " is not a denoiser");
  }
  DenoiserConfig config;
  config.mel_dims = ckpt.meta.at("mel_dims").get<int>();
  config.cond_dims = ckpt.meta.at("cond_dims").get<int>();
  config.hidden_dims = ckpt.meta.at("hidden_dims").get<int>();
  config.t_embed_dims = ckpt.meta.at("t_embed_dims").get<int>();
  config.conv_kernel = ckpt.meta.at("conv_kernel").get<int>();

  LoadedDenoiser out;
  out.net = DenoiserNet(config, 0);
  std::vector<Tensor> params;
  for (const auto& name : DenoiserNet::param_names()) params.push_back(ckpt.tensor(name));
  out.net.set_params(params);
  out.net.set_clamp(ckpt.meta.at("clamp_lo").get<double>(), ckpt.meta.at("clamp_hi").get<double>());
  out.schedule = make_schedule(ckpt.meta.at("schedule").at("steps").get<int>(),
                               ckpt.meta.at("schedule").at("beta_start").get<double>(),
                               ckpt.meta.at("schedule").at("beta_end").get<double>());
  out.meta = ckpt.meta;
  return out;
}

}  // namespace nam::diffusion
