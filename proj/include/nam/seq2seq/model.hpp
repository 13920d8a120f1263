#pragma once

#include "nam/ctc/ctc.hpp"
#include "nam/dsp/griffin_lim.hpp"
#include "nam/numerics/ops.hpp"
#include "nam/rng.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace nam::seq2seq {

// Multi-head scaled dot-product attention; queries and keys/values may have
// different lengths (cross-attention), key and value lengths must match.
// Output length equals the query length.
numerics::Var scaled_dot_attention(numerics::Var queries, numerics::Var keys, numerics::Var values,
                                   int heads);
Matrix scaled_dot_attention(const Matrix& queries, const Matrix& keys, const Matrix& values,
                            int heads);

// Standard sinusoidal positions, frames x dims.
Matrix positional_encoding(int frames, int dims);

struct FftBlockConfig {
  int model_dim = 32;
  int heads = 2;
  int conv_kernel = 3;
  // Block layout is fixed: two self-attention layers, then two 1D
  // convolutions, each sublayer with a residual connection and layer norm.
};

// Feed-forward transformer block; length-preserving.
class FftBlock {
 public:
  static constexpr int kParamCount = 18;

  FftBlock() = default;
  FftBlock(const FftBlockConfig& config, Rng& rng);

  const FftBlockConfig& config() const { return config_; }
  std::vector<numerics::Tensor*> params();
  std::vector<const numerics::Tensor*> params() const;
  static std::vector<std::string> param_names();

  // `params` holds this block's kParamCount tensors bound on `tape`.
  numerics::Var forward(numerics::Tape& tape, const std::vector<numerics::Var>& params,
                        numerics::Var x) const;

 private:
  FftBlockConfig config_;
  std::vector<numerics::Tensor> tensors_;
};

struct Seq2SeqConfig {
  int input_dims = 16;   // NAM feature dim
  int target_dims = 16;  // speech embedding dim
  int model_dim = 32;
  int heads = 2;
  int conv_kernel = 3;
  int encoder_blocks = 2;
  int decoder_blocks = 2;
  int text_vocab = 12;  // V; the CTC head emits V+1 logits
  int unit_count = 0;   // K; 0 disables the unit-prediction head

  FftBlockConfig block() const { return FftBlockConfig{model_dim, heads, conv_kernel}; }
};

// The paper-scale preset: six blocks per side. Desk-scale tests default to
// the small config above.
Seq2SeqConfig full_scale_config(int input_dims, int target_dims, int text_vocab, int unit_count);

struct Seq2SeqExample {
  Matrix nam;                  // T x input_dims
  Matrix target;               // T x target_dims, frame-aligned to nam
  ctc::LabelSeq labels;        // text for the auxiliary CTC objective
  std::vector<int> unit_ids;   // optional per-frame codebook ids (empty = unused)
};

struct Seq2SeqTrainOptions {
  double lambda_ctc = 1.0;
  double lambda_units = 0.0;
  int epochs = 100;
  int batch = 16;
  double lr = 2e-4;
  double momentum = 0.9;
  std::uint64_t seed = 0;
};

struct Seq2SeqTrainResult {
  std::vector<double> loss_history;  // mean total loss per epoch
  int skipped_infeasible_ctc = 0;    // items whose labels cannot fit their frames
};

// Non-autoregressive NAM-to-speech mapper: FFT-block encoder/decoder with an
// auxiliary CTC head on the encoder and an optional unit head on the decoder.
class Seq2SeqModel {
 public:
  Seq2SeqModel() = default;
  Seq2SeqModel(const Seq2SeqConfig& config, std::uint64_t seed);

  const Seq2SeqConfig& config() const { return config_; }
  bool trained() const { return trained_; }
  void set_trained(bool v) { trained_ = v; }

  std::vector<numerics::Tensor*> params();
  std::vector<const numerics::Tensor*> params() const;
  std::vector<std::string> param_names() const;

  std::vector<numerics::Var> bind(numerics::Tape& tape, bool trainable) const;

  // Graph builders; `params` comes from bind() on the same tape.
  numerics::Var encode_graph(numerics::Tape& tape, const std::vector<numerics::Var>& params,
                             numerics::Var nam) const;
  numerics::Var decode_graph(numerics::Tape& tape, const std::vector<numerics::Var>& params,
                             numerics::Var latents) const;
  numerics::Var ctc_logits_graph(numerics::Tape& tape, const std::vector<numerics::Var>& params,
                                 numerics::Var latents) const;
  numerics::Var unit_logits_graph(numerics::Tape& tape, const std::vector<numerics::Var>& params,
                                  numerics::Var decoded) const;

 private:
  Seq2SeqConfig config_;
  numerics::Tensor in_w_, in_b_, out_w_, out_b_, ctc_w_, ctc_b_, unit_w_, unit_b_;
  std::vector<FftBlock> encoder_, decoder_;
  bool trained_ = false;

  friend void load_into(Seq2SeqModel&, const std::vector<numerics::Tensor>&);
};

// Eval-mode passes (deterministic, length-preserving).
Matrix encode(const Seq2SeqModel& model, const Matrix& nam_features);
Matrix decode(const Seq2SeqModel& model, const Matrix& latents);
Matrix ctc_logits(const Seq2SeqModel& model, const Matrix& latents);
Matrix predict_units(const Seq2SeqModel& model, const Matrix& decoded_latents);

// Greedy CTC transcript of NAM features through the encoder head.
ctc::LabelSeq transcribe(const Seq2SeqModel& model, const Matrix& nam_features);

Seq2SeqTrainResult train(Seq2SeqModel& model, const std::vector<Seq2SeqExample>& corpus,
                         const Seq2SeqTrainOptions& options);

// Full conversion: mel features -> encoder -> decoder -> phase reconstruction.
// The model's target dim must equal params.n_mels. Requires a trained model.
dsp::AudioBuffer convert(const Seq2SeqModel& model, const dsp::AudioBuffer& nam_audio,
                         const dsp::MelParams& mel_params, int griffin_lim_iterations = 60);

void save_seq2seq(const std::string& path, const Seq2SeqModel& model,
                  const nlohmann::json& extra_meta = nlohmann::json::object());
Seq2SeqModel load_seq2seq(const std::string& path);

}  // namespace nam::seq2seq
