#include "nam/synthdata/corpus.hpp"

#include "nam/align/regulate.hpp"
#include "nam/rng.hpp"

#include <cmath>

namespace nam::synthdata {

namespace {

constexpr std::uint64_t kMelNoiseStream = 0x6d656c;  // independent of channel noise

void validate(const SynthConfig& c) {
  if (c.inventory_size < 2) throw ContractError("synthdata: inventory must have >= 2 phonemes");
  if (c.feat_dims < c.inventory_size) {
    throw ContractError("synthdata: feat_dims (" + std::to_string(c.feat_dims) +
                        ") must be >= inventory size (" + std::to_string(c.inventory_size) + ")");
  }
  if (!(c.sigma_n > c.sigma_w && c.sigma_w > 0.0)) {
    throw ContractError("synthdata: need sigma_n > sigma_w > 0");
  }
  if (c.min_len < 1 || c.max_len < c.min_len) throw ContractError("synthdata: bad length bounds");
  if (c.dur_lo < 1 || c.dur_hi < c.dur_lo) throw ContractError("synthdata: bad duration bounds");
  if (c.n_utts < 0) throw ContractError("synthdata: negative utterance count");
}

ToyInventory make_inventory(const SynthConfig& c, Rng& rng) {
  // Scaled distinct basis directions plus a small jitter: pairwise distance
  // is at least sqrt(2) * min_distance - O(jitter), checked below.
  ToyInventory inv;
  inv.min_distance = c.min_template_distance;
  inv.templates = Matrix::Zero(c.inventory_size, c.feat_dims);
  for (int p = 0; p < c.inventory_size; ++p) {
    inv.templates(p, p) = c.min_template_distance;
    for (int d = 0; d < c.feat_dims; ++d) inv.templates(p, d) += 0.1 * rng.normal();
  }
  for (int a = 0; a < c.inventory_size; ++a) {
    for (int b = a + 1; b < c.inventory_size; ++b) {
      if ((inv.templates.row(a) - inv.templates.row(b)).norm() < c.min_template_distance) {
        throw ContractError("synthdata: template separation violated");
      }
    }
  }
  inv.mel_projection = Matrix(c.feat_dims, c.mel_dims);
  const double scale = 1.0 / std::sqrt(static_cast<double>(c.feat_dims));
  for (Eigen::Index i = 0; i < inv.mel_projection.size(); ++i) {
    inv.mel_projection.data()[i] = scale * rng.normal();
  }
  return inv;
}

}  // namespace

Matrix template_stream(const ToyInventory& inventory, const ParallelUtterance& utt) {
  Matrix rows(utt.text.size(), inventory.templates.cols());
  for (int p = 0; p < utt.text.size(); ++p) {
    rows.row(p) = inventory.templates.row(utt.text.ids[p]);
  }
  return align::length_regulate(rows, utt.durations.frames);
}

Corpus gen_corpus(const SynthConfig& config) {
  validate(config);
  Corpus corpus;
  corpus.config = config;

  Rng root(config.seed);
  Rng structure = root.split(0);
  corpus.inventory = make_inventory(config, structure);

  for (int u = 0; u < config.n_utts; ++u) {
    Rng rng = root.split(1 + u);
    ParallelUtterance utt;
    utt.id = "utt_" + std::to_string(u);
    utt.speaker = (u % 2 == 0) ? "s0" : "s1";
    utt.seed = rng.next_u64();

    const int len = rng.uniform_int(config.min_len, config.max_len);
    std::vector<int> ids(len);
    for (int p = 0; p < len; ++p) {
      // No immediate repeats: adjacent equal phonemes would make the planted
      // segmentation ambiguous.
      int id = rng.uniform_int(0, config.inventory_size - 1);
      while (p > 0 && id == ids[p - 1]) id = rng.uniform_int(0, config.inventory_size - 1);
      ids[p] = id;
    }
    utt.text = align::PhonemeSeq(ids, config.inventory_size);
    utt.durations.frames.resize(len);
    utt.durations.frame_rate = 50.0;
    for (int p = 0; p < len; ++p) {
      utt.durations.frames[p] = rng.uniform_int(config.dur_lo, config.dur_hi);
    }

    const Matrix clean = template_stream(corpus.inventory, utt);
    const int frames = static_cast<int>(clean.rows());

    Rng noise = Rng(utt.seed);
    utt.whisper = clean;
    for (Eigen::Index i = 0; i < utt.whisper.size(); ++i) {
      utt.whisper.data()[i] += config.sigma_w * noise.normal();
    }

    // NAM channel: 3-tap low-pass of the whisper stream plus heavier noise.
    utt.nam.resize(frames, clean.cols());
    for (int t = 0; t < frames; ++t) {
      const int lo = std::max(0, t - 1);
      const int hi = std::min(frames - 1, t + 1);
      utt.nam.row(t) =
          0.25 * utt.whisper.row(lo) + 0.5 * utt.whisper.row(t) + 0.25 * utt.whisper.row(hi);
    }
    for (Eigen::Index i = 0; i < utt.nam.size(); ++i) {
      utt.nam.data()[i] += config.sigma_n * noise.normal();
    }

    // Lip channel at 25 Hz: consecutive pairs of the clean stream, averaged.
    const int lip_frames = (frames + 1) / 2;
    utt.lip.resize(lip_frames, clean.cols());
    for (int j = 0; j < lip_frames; ++j) {
      const int a = 2 * j;
      const int b = std::min(frames - 1, 2 * j + 1);
      utt.lip.row(j) = 0.5 * (clean.row(a) + clean.row(b));
    }
    for (Eigen::Index i = 0; i < utt.lip.size(); ++i) {
      utt.lip.data()[i] += config.sigma_w * noise.normal();
    }

    corpus.utterances.push_back(std::move(utt));
  }
  return corpus;
}

Matrix mel_from_utterance(const ToyInventory& inventory, const ParallelUtterance& utt,
                          double noise_sigma) {
  Matrix mel = template_stream(inventory, utt) * inventory.mel_projection;
  Rng rng = Rng(utt.seed).split(kMelNoiseStream);
  for (Eigen::Index i = 0; i < mel.size(); ++i) mel.data()[i] += noise_sigma * rng.normal();
  return mel;
}

Matrix phoneme_embedding_table(int inventory_size, int dims, std::uint64_t seed) {
  Rng rng = Rng(seed).split(0x746578);
  Matrix table(inventory_size, dims);
  for (Eigen::Index i = 0; i < table.size(); ++i) table.data()[i] = rng.normal();
  return table;
}

}  // namespace nam::synthdata
