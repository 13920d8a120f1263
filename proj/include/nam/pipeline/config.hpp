#pragma once

#include "nam/common.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace nam::pipeline {

// Every tunable of the pipeline under one roof. Loaded from key=value files,
// overridden by CLI flags; unknown keys are rejected so typos cannot silently
// fall back to defaults. The config hash is embedded in every artifact.
struct PipelineConfig {
  std::uint64_t seed = 7;

  // dsp
  double sample_rate = 16000.0;
  int hop = 320;
  int window = 800;
  int n_mels = 80;
  double mel_floor = 1e-5;
  int gl_iters = 60;

  // synthdata
  int synth_n_utts = 50;
  int synth_inventory = 12;
  int synth_feat_dims = 16;
  int synth_min_len = 8;
  int synth_max_len = 14;
  int synth_dur_lo = 3;
  int synth_dur_hi = 9;
  double synth_sigma_w = 0.3;
  double synth_sigma_n = 1.0;
  int synth_mel_dims = 16;
  double synth_mel_noise = 0.05;

  // align
  int aligner_iters = 10;
  std::string align_channel = "whisper";  // whisper | nam

  // diffusion
  int diff_steps = 50;  // schedule length T
  double diff_beta_start = 1e-4;
  double diff_beta_end = 0.02;
  int diff_train_steps = 1200;
  int diff_batch = 8;
  double diff_lr = 1e-3;
  double diff_drop_prob = 0.1;
  double diff_w = 1.5;  // guidance weight
  int diff_hidden = 64;
  int diff_t_embed = 16;
  int diff_segment_frames = 50;  // 1 s at the 50 Hz feature rate

  // units
  int units_k = 100;
  int units_dim = 128;
  int units_iters = 20;

  // seq2seq
  std::string s2s_preset = "desk";  // desk | full (6-layer)
  int s2s_model_dim = 32;
  int s2s_heads = 2;
  int s2s_conv_kernel = 3;
  int s2s_enc_blocks = 2;
  int s2s_dec_blocks = 2;
  double s2s_lr = 2e-4;
  double s2s_momentum = 0.9;
  int s2s_batch = 16;
  int s2s_epochs = 120;
  double s2s_lambda_ctc = 1.0;
  double s2s_lambda_units = 0.0;

  // Parses "key = value" lines; '#' starts a comment. Unknown keys throw.
  static PipelineConfig from_file(const std::string& path);
  void set(const std::string& key, const std::string& value);

  // Canonical serialization (sorted keys) and its FNV-1a hash.
  std::string canonical() const;
  std::uint64_t hash() const;
  nlohmann::json to_json() const;
};

}  // namespace nam::pipeline
