#pragma once

#include "nam/diffusion/denoiser.hpp"
#include "nam/dsp/feature_io.hpp"
#include "nam/seq2seq/model.hpp"
#include "nam/synthdata/corpus.hpp"
#include "nam/units/codebook.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nam::pipeline {

// One JSON line per utterance; feature payloads live in NAMF files next to
// the manifest, durations and text are embedded.
struct ManifestEntry {
  std::string id;
  std::string speaker;
  std::vector<int> text;
  std::vector<int> durations;
  double frame_rate = 50.0;
  std::uint64_t seed = 0;
  std::string whisper_file, nam_file, lip_file, mel_file;
  std::string wav_file, nam_wav_file;  // present only when wavs were emitted
};

struct WriteCorpusOptions {
  bool emit_wav = false;  // resynthesize per-utterance wavs via griffin_lim
  int gl_iters = 30;
  int hop = 320;
  int window = 800;
  double sample_rate = 16000.0;
};

// Writes manifest.jsonl, inventory.namc and feats/*.namf under out_dir.
// Returns the manifest path.
std::string write_corpus(const synthdata::Corpus& corpus, const std::string& out_dir,
                         const WriteCorpusOptions& options = {});

struct LoadedCorpus {
  synthdata::SynthConfig config;
  synthdata::ToyInventory inventory;
  std::vector<ManifestEntry> entries;
  std::string root_dir;

  Matrix features(const ManifestEntry& entry, const std::string& channel) const;
  const ManifestEntry& entry(const std::string& id) const;
};

LoadedCorpus load_corpus(const std::string& manifest_path);

// Conditioner for one utterance: lip (x2 to 50 Hz) + nam + length-regulated
// text embeddings, aligned to the utterance's mel frames.
diffusion::Conditioner utterance_conditioner(const LoadedCorpus& corpus,
                                             const ManifestEntry& entry, int text_dims);

// Fixed-length segment crops for diffusion training. Utterances shorter than
// segment_frames are skipped with a warning.
std::vector<diffusion::DiffusionExample> diffusion_segments(const LoadedCorpus& corpus,
                                                            int segment_frames, int text_dims,
                                                            std::uint64_t seed);

// (nam features, mel target, CTC labels, optional unit ids) per utterance.
// Phoneme id p maps to CTC label p+1 (0 is the blank).
std::vector<seq2seq::Seq2SeqExample> seq2seq_examples(const LoadedCorpus& corpus,
                                                      const units::Codebook* codebook = nullptr);

ctc::LabelSeq text_to_labels(const std::vector<int>& phoneme_ids);

}  // namespace nam::pipeline
