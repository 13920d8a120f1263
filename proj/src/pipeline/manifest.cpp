#include "nam/pipeline/manifest.hpp"

#include "nam/align/regulate.hpp"
#include "nam/dsp/griffin_lim.hpp"
#include "nam/io/checkpoint.hpp"
#include "nam/rng.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace nam::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json synth_config_to_json(const synthdata::SynthConfig& c) {
  return json{{"inventory_size", c.inventory_size},
              {"feat_dims", c.feat_dims},
              {"min_template_distance", c.min_template_distance},
              {"n_utts", c.n_utts},
              {"min_len", c.min_len},
              {"max_len", c.max_len},
              {"dur_lo", c.dur_lo},
              {"dur_hi", c.dur_hi},
              {"sigma_w", c.sigma_w},
              {"sigma_n", c.sigma_n},
              {"mel_dims", c.mel_dims},
              {"mel_noise", c.mel_noise},
              {"seed", c.seed}};
}

synthdata::SynthConfig synth_config_from_json(const json& j) {
  synthdata::SynthConfig c;
  c.inventory_size = j.at("inventory_size").get<int>();
  c.feat_dims = j.at("feat_dims").get<int>();
  c.min_template_distance = j.at("min_template_distance").get<double>();
  c.n_utts = j.at("n_utts").get<int>();
  c.min_len = j.at("min_len").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.dur_lo = j.at("dur_lo").get<int>();
  c.dur_hi = j.at("dur_hi").get<int>();
  c.sigma_w = j.at("sigma_w").get<double>();
  c.sigma_n = j.at("sigma_n").get<double>();
  c.mel_dims = j.at("mel_dims").get<int>();
  c.mel_noise = j.at("mel_noise").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

void write_channel(const fs::path& path, const Matrix& data, double frame_rate) {
  dsp::FeatureMeta meta;
  meta.sample_rate = static_cast<float>(frame_rate);
  meta.hop = 0;
  meta.window = 0;
  meta.n_mels = 0;
  dsp::write_features(path.string(), data, meta);
}

}  // namespace

std::string write_corpus(const synthdata::Corpus& corpus, const std::string& out_dir,
                         const WriteCorpusOptions& options) {
  const fs::path root(out_dir);
  std::error_code ec;
  fs::create_directories(root / "feats", ec);
  if (ec) throw IoError("write_corpus: cannot create " + (root / "feats").string());

  io::Checkpoint inventory;
  inventory.meta["kind"] = "inventory";
  inventory.meta["synth_config"] = synth_config_to_json(corpus.config);
  inventory.tensors.emplace_back("templates",
                                 numerics::Tensor::from_matrix(corpus.inventory.templates));
  inventory.tensors.emplace_back("mel_projection",
                                 numerics::Tensor::from_matrix(corpus.inventory.mel_projection));
  io::save_checkpoint((root / "inventory.namc").string(), inventory);

  const dsp::MelParams wav_mel{corpus.config.mel_dims, options.hop, options.window,
                               options.sample_rate, 1e-5};

  std::ofstream manifest(root / "manifest.jsonl");
  if (!manifest) throw IoError("write_corpus: cannot write manifest in " + out_dir);
  for (const auto& utt : corpus.utterances) {
    const std::string base = "feats/" + utt.id;
    write_channel(root / (base + ".whisper.namf"), utt.whisper, 50.0);
    write_channel(root / (base + ".nam.namf"), utt.nam, 50.0);
    write_channel(root / (base + ".lip.namf"), utt.lip, 25.0);
    const Matrix mel =
        synthdata::mel_from_utterance(corpus.inventory, utt, corpus.config.mel_noise);
    write_channel(root / (base + ".mel.namf"), mel, 50.0);

    json files{{"whisper", base + ".whisper.namf"},
               {"nam", base + ".nam.namf"},
               {"lip", base + ".lip.namf"},
               {"mel", base + ".mel.namf"}};

    if (options.emit_wav) {
      // Clean wav from the mel target, NAM wav from the noisy NAM projection.
      const Matrix nam_mel = utt.nam * corpus.inventory.mel_projection;
      const dsp::AudioBuffer clean =
          dsp::griffin_lim(dsp::MelSpectrogram{mel, wav_mel}, options.gl_iters);
      const dsp::AudioBuffer noisy =
          dsp::griffin_lim(dsp::MelSpectrogram{nam_mel, wav_mel}, options.gl_iters);
      dsp::save_wav(clean, (root / (base + ".wav")).string());
      dsp::save_wav(noisy, (root / (base + ".nam.wav")).string());
      files["wav"] = base + ".wav";
      files["nam_wav"] = base + ".nam.wav";
    }

    json line{{"id", utt.id},
              {"speaker", utt.speaker},
              {"text", utt.text.ids},
              {"durations", utt.durations.frames},
              {"frame_rate", utt.durations.frame_rate},
              {"seed", utt.seed},
              {"files", files}};
    manifest << line.dump() << "\n";
  }
  if (!manifest) throw IoError("write_corpus: manifest write failed");
  return (root / "manifest.jsonl").string();
}

LoadedCorpus load_corpus(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("load_corpus: cannot open " + manifest_path);

  LoadedCorpus corpus;
  corpus.root_dir = fs::path(manifest_path).parent_path().string();

  const io::Checkpoint inventory =
      io::load_checkpoint((fs::path(corpus.root_dir) / "inventory.namc").string());
  if (inventory.meta.value("kind", "") != "inventory") {
    throw IoError("load_corpus: inventory.namc is not an inventory checkpoint");
  }
  corpus.config = synth_config_from_json(inventory.meta.at("synth_config"));
  corpus.inventory.templates = inventory.tensor("templates").to_matrix();
  corpus.inventory.mel_projection = inventory.tensor("mel_projection").to_matrix();
  corpus.inventory.min_distance = corpus.config.min_template_distance;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError("load_corpus: bad JSON on line " + std::to_string(line_no) + ": " + e.what());
    }
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    e.speaker = j.at("speaker").get<std::string>();
    e.text = j.at("text").get<std::vector<int>>();
    e.durations = j.at("durations").get<std::vector<int>>();
    e.frame_rate = j.at("frame_rate").get<double>();
    e.seed = j.at("seed").get<std::uint64_t>();
    const auto& files = j.at("files");
    e.whisper_file = files.at("whisper").get<std::string>();
    e.nam_file = files.at("nam").get<std::string>();
    e.lip_file = files.at("lip").get<std::string>();
    e.mel_file = files.at("mel").get<std::string>();
    e.wav_file = files.value("wav", "");
    e.nam_wav_file = files.value("nam_wav", "");
    corpus.entries.push_back(std::move(e));
  }
  return corpus;
}

Matrix LoadedCorpus::features(const ManifestEntry& entry, const std::string& channel) const {
  const std::string* file = nullptr;
  if (channel == "whisper") file = &entry.whisper_file;
  else if (channel == "nam") file = &entry.nam_file;
  else if (channel == "lip") file = &entry.lip_file;
  else if (channel == "mel") file = &entry.mel_file;
  else throw ContractError("features: unknown channel '" + channel + "'");
  return dsp::read_features((fs::path(root_dir) / *file).string()).data;
}

const ManifestEntry& LoadedCorpus::entry(const std::string& id) const {
  for (const auto& e : entries) {
    if (e.id == id) return e;
  }
  throw ContractError("corpus has no utterance '" + id + "'");
}

ctc::LabelSeq text_to_labels(const std::vector<int>& phoneme_ids) {
  ctc::LabelSeq labels;
  labels.reserve(phoneme_ids.size());
  for (int id : phoneme_ids) labels.push_back(id + 1);
  return labels;
}

diffusion::Conditioner utterance_conditioner(const LoadedCorpus& corpus,
                                             const ManifestEntry& entry, int text_dims) {
  const Matrix lip = corpus.features(entry, "lip");
  const Matrix nam = corpus.features(entry, "nam");
  const Matrix table =
      synthdata::phoneme_embedding_table(corpus.config.inventory_size, text_dims,
                                         corpus.config.seed);
  Matrix text_rows(static_cast<int>(entry.text.size()), text_dims);
  for (std::size_t p = 0; p < entry.text.size(); ++p) {
    text_rows.row(static_cast<int>(p)) = table.row(entry.text[p]);
  }
  const Matrix text50 = align::length_regulate(text_rows, entry.durations);
  return diffusion::build_conditioner(lip, nam, &text50);
}

std::vector<diffusion::DiffusionExample> diffusion_segments(const LoadedCorpus& corpus,
                                                            int segment_frames, int text_dims,
                                                            std::uint64_t seed) {
  Rng rng(seed);
  std::vector<diffusion::DiffusionExample> segments;
  int skipped = 0;
  for (const auto& entry : corpus.entries) {
    const Matrix mel = corpus.features(entry, "mel");
    const diffusion::Conditioner cond = utterance_conditioner(corpus, entry, text_dims);
    const int frames = static_cast<int>(mel.rows());
    if (frames < segment_frames) {
      ++skipped;
      continue;
    }
    const int start = rng.uniform_int(0, frames - segment_frames);
    diffusion::DiffusionExample ex;
    ex.x0 = mel.middleRows(start, segment_frames);
    ex.cond = cond.frames.middleRows(start, segment_frames);
    segments.push_back(std::move(ex));
  }
  if (skipped > 0) {
    log_warn("diffusion_segments: skipped " + std::to_string(skipped) +
             " utterances shorter than the segment length");
  }
  if (segments.empty()) throw ContractError("diffusion_segments: no usable utterances");
  return segments;
}

std::vector<seq2seq::Seq2SeqExample> seq2seq_examples(const LoadedCorpus& corpus,
                                                      const units::Codebook* codebook) {
  std::vector<seq2seq::Seq2SeqExample> examples;
  for (const auto& entry : corpus.entries) {
    seq2seq::Seq2SeqExample ex;
    ex.nam = corpus.features(entry, "nam");
    ex.target = corpus.features(entry, "mel");
    ex.labels = text_to_labels(entry.text);
    if (codebook != nullptr) ex.unit_ids = units::encode(*codebook, ex.target);
    examples.push_back(std::move(ex));
  }
  return examples;
}

}  // namespace nam::pipeline
