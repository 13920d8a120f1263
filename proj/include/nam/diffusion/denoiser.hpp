#pragma once

#include "nam/diffusion/schedule.hpp"
#include "nam/numerics/ops.hpp"
#include "nam/numerics/optim.hpp"
#include "nam/rng.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nam::diffusion {

// Per-frame conditioning: lip, NAM and (optionally) length-regulated text
// embedding streams, all at the mel frame rate, concatenated columnwise.
struct Conditioner {
  Matrix frames;  // T x (lip_dims + nam_dims + text_dims)
  int lip_dims = 0;
  int nam_dims = 0;
  int text_dims = 0;

  int dims() const { return static_cast<int>(frames.cols()); }
  int frame_count() const { return static_cast<int>(frames.rows()); }
};

// lip25 runs at half the mel frame rate and is repeated x2 before
// concatenation; nam50/text50 are already frame-rate matched. Streams must
// agree on length after upsampling (the lip stream may overshoot by one frame
// on odd lengths; it is trimmed).
Conditioner build_conditioner(const Matrix& lip25, const Matrix& nam50,
                              const Matrix* text50 = nullptr);

// Sinusoidal embedding of the diffusion step index.
Vector step_embedding(int t, int dims);

struct DenoiserConfig {
  int mel_dims = 16;
  int cond_dims = 48;
  int hidden_dims = 64;
  int t_embed_dims = 16;
  int conv_kernel = 3;
};

// Small convolutional noise-prediction network over mel frames. Input per
// frame: (x_t, step embedding, conditioner); output matches x_t's shape.
// Carries a learned null-conditioner token for classifier-free training.
class DenoiserNet {
 public:
  DenoiserNet() = default;
  DenoiserNet(const DenoiserConfig& config, std::uint64_t seed);

  const DenoiserConfig& config() const { return config_; }

  // Noise estimate in eval mode; cond == nullptr uses the null token.
  Matrix predict(const Matrix& x_t, int t, const Matrix* cond) const;

  // Training-graph forward. `cond` must be a [T, cond_dims] node.
  numerics::Var forward(numerics::Tape& tape, const std::vector<numerics::Var>& params,
                        numerics::Var x_t, int t, numerics::Var cond) const;

  // Null-conditioner token broadcast to `frames` rows.
  numerics::Var null_cond(numerics::Tape& tape, const std::vector<numerics::Var>& params,
                          int frames) const;

  std::vector<numerics::Var> bind(numerics::Tape& tape, bool trainable) const;

  std::vector<numerics::Tensor*> params();
  std::vector<const numerics::Tensor*> params() const;
  static std::vector<std::string> param_names();

  void set_params(const std::vector<numerics::Tensor>& params);

  // x0-estimate clamp range used during sampling; set from the training data.
  double clamp_lo() const { return clamp_lo_; }
  double clamp_hi() const { return clamp_hi_; }
  void set_clamp(double lo, double hi) { clamp_lo_ = lo; clamp_hi_ = hi; }

 private:
  DenoiserConfig config_;
  numerics::Tensor w_in_, b_in_, conv_w_, conv_b_, w_out_, b_out_, null_token_;
  double clamp_lo_ = -1e9;
  double clamp_hi_ = 1e9;
};

struct DiffusionExample {
  Matrix x0;    // segment_frames x mel_dims
  Matrix cond;  // segment_frames x cond_dims
};

struct DiffusionTrainOptions {
  int steps = 1500;
  int batch = 8;
  double lr = 1e-3;
  double drop_prob = 0.1;
  std::uint64_t seed = 0;
};

struct DiffusionTrainResult {
  std::vector<double> loss_history;  // one L1 loss per step
  long null_token_uses = 0;          // how often the null conditioner replaced the real one
};

// One optimizer step on a batch: per item draw t and noise, drop the
// conditioner with probability drop_prob, minimize mean |eps_hat - eps|.
// Returns the batch L1 loss. Pass optimizer == nullptr to evaluate only.
double train_step(DenoiserNet& net, const std::vector<const DiffusionExample*>& batch,
                  const NoiseSchedule& schedule, double drop_prob, Rng& rng,
                  numerics::Adam* optimizer, long* null_uses = nullptr);

DiffusionTrainResult train_diffusion(DenoiserNet& net, const std::vector<DiffusionExample>& data,
                                     const NoiseSchedule& schedule,
                                     const DiffusionTrainOptions& options);

// Guidance blend eps_u + w * (eps_c - eps_u), affine in w; w == 0 and w == 1
// return the unconditional / conditional input bit-for-bit.
Matrix cfg_blend(const Matrix& eps_uncond, const Matrix& eps_cond, double w);

// Guided estimate from the net's two prediction paths.
Matrix cfg_predict(const DenoiserNet& net, const Matrix& x_t, int t, const Matrix& cond,
                   double w);

// Noise predictor used by the sampler; `conditional` selects the real
// conditioner vs the null token. Lets tests substitute analytic denoisers.
using NoisePredictor = std::function<Matrix(const Matrix& x_t, int t, bool conditional)>;

struct SampleOptions {
  double guidance_w = 1.5;
  std::uint64_t seed = 0;
  double clamp_lo = -1e9;  // x0-estimate clamp, [log 1e-5, max_train + 1] in the pipeline
  double clamp_hi = 1e9;
};

// Ancestral sampling: x_T ~ N(0, I), then for t = T..1 estimate x0 from the
// guided noise prediction, clamp it, move to the posterior mean and add
// sqrt(beta_t) noise (none at t == 1). Deterministic for a fixed seed.
Matrix sample(const NoisePredictor& predictor, int frames, int mel_dims,
              const NoiseSchedule& schedule, const SampleOptions& options);

// Samples a mel segment conditioned on `cond`, clamping to the net's range.
Matrix sample(const DenoiserNet& net, const Conditioner& cond, const NoiseSchedule& schedule,
              double guidance_w, std::uint64_t seed);

void save_denoiser(const std::string& path, const DenoiserNet& net, const NoiseSchedule& schedule,
                   const nlohmann::json& extra_meta = nlohmann::json::object());

struct LoadedDenoiser {
  DenoiserNet net;
  NoiseSchedule schedule;
  nlohmann::json meta;
};
LoadedDenoiser load_denoiser(const std::string& path);

}  // namespace nam::diffusion
