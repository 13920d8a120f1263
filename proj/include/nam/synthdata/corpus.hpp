#pragma once

#include "nam/align/hmm.hpp"
#include "nam/common.hpp"

#include <string>
#include <vector>

namespace nam::synthdata {

// Deterministic toy corpus generator. Signals are piecewise stationary per
// phoneme so forced alignment has an unambiguous ground truth; the NAM channel
// is a low-pass mix of the whisper channel with heavier noise, mirroring how
// much less separable real NAM vibrations are than whispers.
struct SynthConfig {
  int inventory_size = 12;
  int feat_dims = 16;                   // >= inventory_size
  double min_template_distance = 5.0;   // pairwise L2 lower bound
  int n_utts = 50;
  int min_len = 8;   // phonemes per utterance
  int max_len = 14;
  int dur_lo = 3;    // planted frames per phoneme (50 Hz)
  int dur_hi = 9;
  double sigma_w = 0.3;  // whisper noise
  double sigma_n = 1.0;  // NAM noise, must exceed sigma_w
  int mel_dims = 16;
  double mel_noise = 0.05;
  std::uint64_t seed = 7;
};

struct ParallelUtterance {
  std::string id;
  std::string speaker;        // "s0" / "s1", round-robin
  align::PhonemeSeq text;
  align::Durations durations;  // planted, 50 Hz; sum == whisper/nam frame count
  Matrix whisper;              // T x feat_dims
  Matrix nam;                  // T x feat_dims
  Matrix lip;                  // ceil(T/2) x feat_dims, 25 Hz channel
  std::uint64_t seed = 0;      // per-utterance noise stream
};

struct ToyInventory {
  Matrix templates;       // P x feat_dims, pairwise distance >= min_distance
  Matrix mel_projection;  // feat_dims x mel_dims, fixed per corpus
  double min_distance = 0.0;

  // Planted per-phoneme mel means (templates * mel_projection).
  Matrix template_mel_means() const { return templates * mel_projection; }
};

struct Corpus {
  SynthConfig config;
  ToyInventory inventory;
  std::vector<ParallelUtterance> utterances;
};

Corpus gen_corpus(const SynthConfig& config);

// Clean (noise-free) per-frame template stream of an utterance.
Matrix template_stream(const ToyInventory& inventory, const ParallelUtterance& utt);

// Mel-shaped diffusion target: template stream projected to mel_dims plus
// small noise. Deterministic per utterance.
Matrix mel_from_utterance(const ToyInventory& inventory, const ParallelUtterance& utt,
                          double noise_sigma);

// Fixed seeded phoneme embedding table for text conditioning streams.
Matrix phoneme_embedding_table(int inventory_size, int dims, std::uint64_t seed);

}  // namespace nam::synthdata
