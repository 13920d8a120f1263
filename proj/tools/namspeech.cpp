// namspeech: NAM-to-speech pipeline driver. Every command writes its primary
// outputs plus a JSON run record (config hash, seed, input/output hashes,
// wall time) into --out-dir. Exit codes: 0 ok, 2 contract violation, 3 I/O.

#include "nam/align/dtw.hpp"
#include "nam/align/regulate.hpp"
#include "nam/common.hpp"
#include "nam/diffusion/denoiser.hpp"
#include "nam/dsp/feature_io.hpp"
#include "nam/dsp/griffin_lim.hpp"
#include "nam/eval/metrics.hpp"
#include "nam/pipeline/config.hpp"
#include "nam/pipeline/manifest.hpp"
#include "nam/rng.hpp"
#include "nam/units/codebook.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nam;

namespace {

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot hash missing file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string s = buf.str();
  return fnv1a(s.data(), s.size());
}

// Collects inputs/outputs and writes run-<command>.json on completion.
class RunRecord {
 public:
  RunRecord(std::string command, const pipeline::PipelineConfig& config, std::string out_dir)
      : command_(std::move(command)), out_dir_(std::move(out_dir)),
        start_(std::chrono::steady_clock::now()) {
    record_["command"] = command_;
    record_["config_hash"] = hex64(config.hash());
    record_["seed"] = config.seed;
    record_["inputs"] = json::object();
    record_["outputs"] = json::object();
  }

  void input(const std::string& path) { record_["inputs"][path] = hex64(file_hash(path)); }
  void output(const std::string& path) { outputs_.push_back(path); }

  void finish() {
    for (const auto& path : outputs_) record_["outputs"][path] = hex64(file_hash(path));
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    record_["wall_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
    fs::create_directories(out_dir_);
    const std::string path = (fs::path(out_dir_) / ("run-" + command_ + ".json")).string();
    std::ofstream out(path);
    out << record_.dump(2) << "\n";
    if (!out) throw IoError("cannot write run record " + path);
  }

 private:
  std::string command_;
  std::string out_dir_;
  json record_;
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_;
};

std::string phoneme_token(int id) { return "p" + std::to_string(id); }

std::string labels_to_text(const ctc::LabelSeq& labels) {
  std::string text;
  for (int l : labels) {
    if (!text.empty()) text += " ";
    text += phoneme_token(l - 1);
  }
  return text;
}

std::string ids_to_text(const std::vector<int>& ids) {
  std::string text;
  for (int id : ids) {
    if (!text.empty()) text += " ";
    text += phoneme_token(id);
  }
  return text;
}

dsp::MelParams mel_params_from(const pipeline::PipelineConfig& config, int n_mels) {
  dsp::MelParams p;
  p.n_mels = n_mels;
  p.hop = config.hop;
  p.window = config.window;
  p.sample_rate = config.sample_rate;
  p.floor = config.mel_floor;
  return p;
}

seq2seq::Seq2SeqConfig seq2seq_config_from(const pipeline::PipelineConfig& config,
                                           int input_dims, int target_dims, int vocab,
                                           int unit_count) {
  if (config.s2s_preset == "full") {
    return seq2seq::full_scale_config(input_dims, target_dims, vocab, unit_count);
  }
  if (config.s2s_preset != "desk") {
    throw ContractError("config: s2s_preset must be 'desk' or 'full'");
  }
  seq2seq::Seq2SeqConfig c;
  c.input_dims = input_dims;
  c.target_dims = target_dims;
  c.model_dim = config.s2s_model_dim;
  c.heads = config.s2s_heads;
  c.conv_kernel = config.s2s_conv_kernel;
  c.encoder_blocks = config.s2s_enc_blocks;
  c.decoder_blocks = config.s2s_dec_blocks;
  c.text_vocab = vocab;
  c.unit_count = unit_count;
  return c;
}

void shuffle_model_weights(seq2seq::Seq2SeqModel& model, std::uint64_t seed) {
  Rng rng(seed);
  for (numerics::Tensor* t : model.params()) {
    for (std::int64_t i = t->size() - 1; i > 0; --i) {
      const int j = rng.uniform_int(0, static_cast<int>(i));
      std::swap(t->at(i), t->at(j));
    }
  }
}

struct CommonArgs {
  std::string config_file;
  std::string out_dir = ".";
  std::int64_t seed = -1;  // -1 keeps the config value

  pipeline::PipelineConfig resolve() const {
    pipeline::PipelineConfig config;
    if (!config_file.empty()) config = pipeline::PipelineConfig::from_file(config_file);
    if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
    return config;
  }
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_file, "key=value config file");
  cmd->add_option("--seed", args.seed, "root seed (overrides config)");
  cmd->add_option("--out-dir", args.out_dir, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"namspeech: NAM-to-speech pipeline (synthetic-data scale)"};
  app.require_subcommand(1);

  // ---- gen-data ----
  CommonArgs gen_args;
  int gen_n = -1;
  bool gen_emit_wav = false;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic parallel corpus");
  add_common(gen, gen_args);
  gen->add_option("--n", gen_n, "number of utterances");
  gen->add_flag("--emit-wav", gen_emit_wav, "also resynthesize per-utterance wavs");

  // ---- extract-mel ----
  CommonArgs mel_args;
  std::vector<std::string> mel_inputs;
  int mel_bins = -1;
  auto* extract = app.add_subcommand("extract-mel", "mel spectrograms from wav files");
  add_common(extract, mel_args);
  extract->add_option("--in", mel_inputs, "input wav files")->required();
  extract->add_option("--n-mels", mel_bins, "mel bin count (default from config)");

  // ---- train-aligner ----
  CommonArgs ta_args;
  std::string ta_manifest, ta_out, ta_channel, ta_speaker;
  int ta_iters = -1;
  auto* ta = app.add_subcommand("train-aligner", "train the monophone forced aligner");
  add_common(ta, ta_args);
  ta->add_option("--manifest", ta_manifest, "corpus manifest")->required();
  ta->add_option("--out", ta_out, "model output path (default <out-dir>/aligner.nama)");
  ta->add_option("--channel", ta_channel, "whisper | nam (default from config)");
  ta->add_option("--speaker", ta_speaker, "train on one speaker only");
  ta->add_option("--iters", ta_iters, "Viterbi-EM iterations");

  // ---- align ----
  CommonArgs al_args;
  std::string al_manifest, al_model, al_channel;
  auto* al = app.add_subcommand("align", "phoneme durations for every utterance");
  add_common(al, al_args);
  al->add_option("--manifest", al_manifest, "corpus manifest")->required();
  al->add_option("--model", al_model, "trained aligner")->required();
  al->add_option("--channel", al_channel, "whisper | nam (default from config)");

  // ---- dtw ----
  CommonArgs dtw_args;
  std::string dtw_a, dtw_b, dtw_out;
  auto* dtw_cmd = app.add_subcommand("dtw", "dynamic time warping between two feature files");
  add_common(dtw_cmd, dtw_args);
  dtw_cmd->add_option("--a", dtw_a, "first NAMF file")->required();
  dtw_cmd->add_option("--b", dtw_b, "second NAMF file")->required();
  dtw_cmd->add_option("--out", dtw_out, "path JSON output (default <out-dir>/dtw.json)");

  // ---- train-diffusion ----
  CommonArgs td_args;
  std::string td_manifest, td_out;
  int td_steps = -1;
  auto* td = app.add_subcommand("train-diffusion", "train the conditional mel denoiser");
  add_common(td, td_args);
  td->add_option("--manifest", td_manifest, "corpus manifest")->required();
  td->add_option("--out", td_out, "checkpoint path (default <out-dir>/diffusion.namc)");
  td->add_option("--steps", td_steps, "optimizer steps");

  // ---- sample ----
  CommonArgs sm_args;
  std::string sm_ckpt, sm_manifest, sm_utt;
  double sm_w = -1.0;
  bool sm_emit_wav = false;
  auto* sm = app.add_subcommand("sample", "sample a mel segment from the diffusion model");
  add_common(sm, sm_args);
  sm->add_option("--ckpt", sm_ckpt, "diffusion checkpoint")->required();
  sm->add_option("--manifest", sm_manifest, "corpus manifest (conditioning source)")->required();
  sm->add_option("--utt", sm_utt, "utterance id (default: first)");
  sm->add_option("--w", sm_w, "guidance weight (default from config)");
  sm->add_flag("--emit-wav", sm_emit_wav, "also write griffin-lim audio");

  // ---- train-seq2seq ----
  CommonArgs ts_args;
  std::string ts_manifest, ts_out, ts_units, ts_control;
  int ts_epochs = -1;
  double ts_lambda_ctc = -1.0;
  auto* ts = app.add_subcommand("train-seq2seq", "train the NAM-to-speech mapper");
  add_common(ts, ts_args);
  ts->add_option("--manifest", ts_manifest, "corpus manifest")->required();
  ts->add_option("--out", ts_out, "checkpoint path (default <out-dir>/seq2seq.namc)");
  ts->add_option("--units-ckpt", ts_units, "codebook for unit-prediction targets");
  ts->add_option("--epochs", ts_epochs, "training epochs");
  ts->add_option("--lambda-ctc", ts_lambda_ctc, "auxiliary CTC weight");
  ts->add_option("--emit-control", ts_control, "also write a weight-shuffled control model");

  // ---- convert ----
  CommonArgs cv_args;
  std::string cv_model, cv_in_wav, cv_out_wav, cv_manifest, cv_utt, cv_transcripts;
  bool cv_emit_wav = false;
  auto* cv = app.add_subcommand("convert", "convert NAM input to speech");
  add_common(cv, cv_args);
  cv->add_option("--model", cv_model, "seq2seq checkpoint")->required();
  cv->add_option("--in-wav", cv_in_wav, "input NAM wav");
  cv->add_option("--out-wav", cv_out_wav, "converted wav output");
  cv->add_option("--manifest", cv_manifest, "corpus manifest (feature-domain conversion)");
  cv->add_option("--utt", cv_utt, "convert one utterance id (default: all)");
  cv->add_option("--out-transcripts", cv_transcripts,
                 "JSONL transcripts (default <out-dir>/transcripts.jsonl)");
  cv->add_flag("--emit-wav", cv_emit_wav, "write converted wavs for manifest utterances");

  // ---- eval ----
  CommonArgs ev_args;
  std::string ev_manifest, ev_hyp, ev_out;
  auto* ev = app.add_subcommand("eval", "word/character error rates against the manifest");
  add_common(ev, ev_args);
  ev->add_option("--manifest", ev_manifest, "corpus manifest with reference text")->required();
  ev->add_option("--hyp", ev_hyp, "hypothesis transcripts (JSONL)")->required();
  ev->add_option("--out", ev_out, "report path (default <out-dir>/eval.json)");

  // ---- fit-units ----
  CommonArgs fu_args;
  std::string fu_manifest, fu_out;
  auto* fu = app.add_subcommand("fit-units", "fit the k-means unit codebook on mel targets");
  add_common(fu, fu_args);
  fu->add_option("--manifest", fu_manifest, "corpus manifest")->required();
  fu->add_option("--out", fu_out, "codebook path (default <out-dir>/units.bin)");

  try {
    app.parse(argc, argv);

    if (gen->parsed()) {
      auto config = gen_args.resolve();
      if (gen_n >= 0) config.synth_n_utts = gen_n;
      RunRecord record("gen-data", config, gen_args.out_dir);
      synthdata::SynthConfig sc;
      sc.inventory_size = config.synth_inventory;
      sc.feat_dims = config.synth_feat_dims;
      sc.n_utts = config.synth_n_utts;
      sc.min_len = config.synth_min_len;
      sc.max_len = config.synth_max_len;
      sc.dur_lo = config.synth_dur_lo;
      sc.dur_hi = config.synth_dur_hi;
      sc.sigma_w = config.synth_sigma_w;
      sc.sigma_n = config.synth_sigma_n;
      sc.mel_dims = config.synth_mel_dims;
      sc.mel_noise = config.synth_mel_noise;
      sc.seed = config.seed;
      const auto corpus = synthdata::gen_corpus(sc);
      pipeline::WriteCorpusOptions wo;
      wo.emit_wav = gen_emit_wav;
      wo.hop = config.hop;
      wo.window = config.window;
      wo.sample_rate = config.sample_rate;
      const std::string manifest = pipeline::write_corpus(corpus, gen_args.out_dir, wo);
      record.output(manifest);
      record.output((fs::path(gen_args.out_dir) / "inventory.namc").string());
      record.finish();
      std::cout << "wrote " << corpus.utterances.size() << " utterances to " << manifest << "\n";
    }

    if (extract->parsed()) {
      auto config = mel_args.resolve();
      RunRecord record("extract-mel", config, mel_args.out_dir);
      const dsp::MelParams params =
          mel_params_from(config, mel_bins > 0 ? mel_bins : config.n_mels);
      fs::create_directories(mel_args.out_dir);
      for (const auto& path : mel_inputs) {
        record.input(path);
        dsp::AudioBuffer audio = dsp::load_wav(path);
        if (audio.sample_rate != params.sample_rate) {
          audio = dsp::resample(audio, params.sample_rate);
        }
        const auto mel = dsp::mel_spectrogram(audio, params);
        const std::string out =
            (fs::path(mel_args.out_dir) / (fs::path(path).stem().string() + ".mel.namf"))
                .string();
        dsp::write_mel(out, mel);
        record.output(out);
        std::cout << path << " -> " << out << " (" << mel.frame_count() << " frames)\n";
      }
      record.finish();
    }

    if (ta->parsed()) {
      auto config = ta_args.resolve();
      if (ta_iters > 0) config.aligner_iters = ta_iters;
      if (!ta_channel.empty()) config.align_channel = ta_channel;
      RunRecord record("train-aligner", config, ta_args.out_dir);
      record.input(ta_manifest);
      const auto corpus = pipeline::load_corpus(ta_manifest);
      std::vector<align::AlignerExample> examples;
      for (const auto& entry : corpus.entries) {
        if (!ta_speaker.empty() && entry.speaker != ta_speaker) continue;
        examples.push_back({corpus.features(entry, config.align_channel),
                            align::PhonemeSeq(entry.text, corpus.config.inventory_size)});
      }
      if (examples.empty()) throw ContractError("train-aligner: no utterances selected");
      const auto trained = align::train_aligner(examples, config.aligner_iters);
      const std::string out =
          ta_out.empty() ? (fs::path(ta_args.out_dir) / "aligner.nama").string() : ta_out;
      fs::create_directories(fs::path(out).parent_path().empty()
                                 ? "."
                                 : fs::path(out).parent_path().string());
      align::save_aligner(out, trained.model);
      record.output(out);
      record.finish();
      std::cout << "aligner log-likelihood: " << trained.log_likelihood_history.front() << " -> "
                << trained.log_likelihood_history.back() << " over "
                << trained.log_likelihood_history.size() << " iterations\n";
    }

    if (al->parsed()) {
      auto config = al_args.resolve();
      if (!al_channel.empty()) config.align_channel = al_channel;
      RunRecord record("align", config, al_args.out_dir);
      record.input(al_manifest);
      record.input(al_model);
      const auto corpus = pipeline::load_corpus(al_manifest);
      const auto hmm = align::load_aligner(al_model);
      const fs::path dir = fs::path(al_args.out_dir) / "aligns";
      fs::create_directories(dir);
      for (const auto& entry : corpus.entries) {
        const Matrix feats = corpus.features(entry, config.align_channel);
        const align::PhonemeSeq phonemes(entry.text, corpus.config.inventory_size);
        const auto durations = align::viterbi_align(hmm, feats, phonemes);
        const std::string out = (dir / (entry.id + ".json")).string();
        std::ofstream os(out);
        os << align::durations_to_json(phonemes, durations) << "\n";
        if (!os) throw IoError("align: cannot write " + out);
        record.output(out);
      }
      record.finish();
      std::cout << "aligned " << corpus.entries.size() << " utterances\n";
    }

    if (dtw_cmd->parsed()) {
      auto config = dtw_args.resolve();
      RunRecord record("dtw", config, dtw_args.out_dir);
      record.input(dtw_a);
      record.input(dtw_b);
      const Matrix a = dsp::read_features(dtw_a).data;
      const Matrix b = dsp::read_features(dtw_b).data;
      const auto path = align::dtw(a, b);
      json j;
      j["cost"] = path.cost;
      j["path"] = json::array();
      for (const auto& [i, k] : path.steps) j["path"].push_back({i, k});
      const std::string out =
          dtw_out.empty() ? (fs::path(dtw_args.out_dir) / "dtw.json").string() : dtw_out;
      std::ofstream os(out);
      os << j.dump() << "\n";
      if (!os) throw IoError("dtw: cannot write " + out);
      record.output(out);
      record.finish();
      std::cout << "dtw cost " << path.cost << " over " << path.steps.size() << " steps\n";
    }

    if (td->parsed()) {
      auto config = td_args.resolve();
      if (td_steps > 0) config.diff_train_steps = td_steps;
      RunRecord record("train-diffusion", config, td_args.out_dir);
      record.input(td_manifest);
      const auto corpus = pipeline::load_corpus(td_manifest);
      const auto segments = pipeline::diffusion_segments(
          corpus, config.diff_segment_frames, corpus.config.feat_dims, config.seed);
      diffusion::DenoiserConfig dc;
      dc.mel_dims = corpus.config.mel_dims;
      dc.cond_dims = static_cast<int>(segments.front().cond.cols());
      dc.hidden_dims = config.diff_hidden;
      dc.t_embed_dims = config.diff_t_embed;
      diffusion::DenoiserNet net(dc, config.seed);
      const auto schedule =
          diffusion::make_schedule(config.diff_steps, config.diff_beta_start, config.diff_beta_end);
      diffusion::DiffusionTrainOptions opts;
      opts.steps = config.diff_train_steps;
      opts.batch = config.diff_batch;
      opts.lr = config.diff_lr;
      opts.drop_prob = config.diff_drop_prob;
      opts.seed = config.seed;
      const auto trained = diffusion::train_diffusion(net, segments, schedule, opts);
      const std::string out = td_out.empty()
                                  ? (fs::path(td_args.out_dir) / "diffusion.namc").string()
                                  : td_out;
      json meta;
      meta["config_hash"] = hex64(config.hash());
      meta["drop_prob"] = opts.drop_prob;
      meta["seed"] = opts.seed;
      meta["final_loss"] = trained.loss_history.back();
      diffusion::save_denoiser(out, net, schedule, meta);
      record.output(out);
      record.finish();
      std::cout << "diffusion loss " << trained.loss_history.front() << " -> "
                << trained.loss_history.back() << " (" << trained.null_token_uses
                << " null-conditioner draws)\n";
    }

    if (sm->parsed()) {
      auto config = sm_args.resolve();
      if (sm_w >= 0.0) config.diff_w = sm_w;
      RunRecord record("sample", config, sm_args.out_dir);
      record.input(sm_ckpt);
      record.input(sm_manifest);
      const auto loaded = diffusion::load_denoiser(sm_ckpt);
      const auto corpus = pipeline::load_corpus(sm_manifest);
      const auto& entry = sm_utt.empty() ? corpus.entries.front() : corpus.entry(sm_utt);
      const auto cond =
          pipeline::utterance_conditioner(corpus, entry, corpus.config.feat_dims);
      const Matrix mel =
          diffusion::sample(loaded.net, cond, loaded.schedule, config.diff_w, config.seed);
      fs::create_directories(sm_args.out_dir);
      const std::string out =
          (fs::path(sm_args.out_dir) / (entry.id + ".sampled.namf")).string();
      dsp::FeatureMeta meta;
      meta.sample_rate = 50.0f;
      meta.n_mels = static_cast<std::uint32_t>(mel.cols());
      dsp::write_features(out, mel, meta);
      record.output(out);
      if (sm_emit_wav) {
        const auto params = mel_params_from(config, static_cast<int>(mel.cols()));
        const auto audio = dsp::griffin_lim(dsp::MelSpectrogram{mel, params}, config.gl_iters);
        const std::string wav =
            (fs::path(sm_args.out_dir) / (entry.id + ".sampled.wav")).string();
        dsp::save_wav(audio, wav);
        record.output(wav);
      }
      record.finish();
      std::cout << "sampled " << mel.rows() << " frames for " << entry.id << "\n";
    }

    if (ts->parsed()) {
      auto config = ts_args.resolve();
      if (ts_epochs > 0) config.s2s_epochs = ts_epochs;
      if (ts_lambda_ctc >= 0.0) config.s2s_lambda_ctc = ts_lambda_ctc;
      RunRecord record("train-seq2seq", config, ts_args.out_dir);
      record.input(ts_manifest);
      const auto corpus = pipeline::load_corpus(ts_manifest);
      std::optional<units::Codebook> codebook;
      if (!ts_units.empty()) {
        record.input(ts_units);
        codebook = units::load_codebook(ts_units);
        if (config.s2s_lambda_units == 0.0) config.s2s_lambda_units = 1.0;
      }
      const auto examples =
          pipeline::seq2seq_examples(corpus, codebook ? &*codebook : nullptr);
      const auto mc = seq2seq_config_from(config, corpus.config.feat_dims,
                                          corpus.config.mel_dims, corpus.config.inventory_size,
                                          codebook ? codebook->size() : 0);
      seq2seq::Seq2SeqModel model(mc, config.seed);
      seq2seq::Seq2SeqTrainOptions opts;
      opts.lambda_ctc = config.s2s_lambda_ctc;
      opts.lambda_units = config.s2s_lambda_units;
      opts.epochs = config.s2s_epochs;
      opts.batch = config.s2s_batch;
      opts.lr = config.s2s_lr;
      opts.momentum = config.s2s_momentum;
      opts.seed = config.seed;
      const auto result = seq2seq::train(model, examples, opts);
      const std::string out = ts_out.empty()
                                  ? (fs::path(ts_args.out_dir) / "seq2seq.namc").string()
                                  : ts_out;
      json meta;
      meta["config_hash"] = hex64(config.hash());
      meta["final_loss"] = result.loss_history.back();
      seq2seq::save_seq2seq(out, model, meta);
      record.output(out);
      if (!ts_control.empty()) {
        seq2seq::Seq2SeqModel control = model;
        shuffle_model_weights(control, config.seed + 1);
        seq2seq::save_seq2seq(ts_control, control, {{"control", true}});
        record.output(ts_control);
      }
      record.finish();
      std::cout << "seq2seq loss " << result.loss_history.front() << " -> "
                << result.loss_history.back() << "\n";
    }

    if (cv->parsed()) {
      auto config = cv_args.resolve();
      RunRecord record("convert", config, cv_args.out_dir);
      record.input(cv_model);
      const auto model = seq2seq::load_seq2seq(cv_model);

      if (!cv_in_wav.empty()) {
        record.input(cv_in_wav);
        if (cv_out_wav.empty()) throw ContractError("convert: --in-wav requires --out-wav");
        dsp::AudioBuffer audio = dsp::load_wav(cv_in_wav);
        if (audio.sample_rate != config.sample_rate) {
          audio = dsp::resample(audio, config.sample_rate);
        }
        const auto params = mel_params_from(config, model.config().input_dims);
        const auto converted = seq2seq::convert(model, audio, params, config.gl_iters);
        dsp::save_wav(converted, cv_out_wav);
        record.output(cv_out_wav);
        if (!cv_transcripts.empty()) {
          const auto mel = dsp::mel_spectrogram(audio, params);
          const auto labels = seq2seq::transcribe(model, mel.frames);
          std::ofstream os(cv_transcripts);
          os << json{{"id", fs::path(cv_in_wav).stem().string()},
                     {"labels", labels},
                     {"text", labels_to_text(labels)}}
                    .dump()
             << "\n";
          record.output(cv_transcripts);
        }
      } else {
        if (cv_manifest.empty()) {
          throw ContractError("convert: need --in-wav or --manifest");
        }
        record.input(cv_manifest);
        const auto corpus = pipeline::load_corpus(cv_manifest);
        const std::string out = cv_transcripts.empty()
                                    ? (fs::path(cv_args.out_dir) / "transcripts.jsonl").string()
                                    : cv_transcripts;
        fs::create_directories(cv_args.out_dir);
        std::ofstream os(out);
        if (!os) throw IoError("convert: cannot write " + out);
        for (const auto& entry : corpus.entries) {
          if (!cv_utt.empty() && entry.id != cv_utt) continue;
          const Matrix nam = corpus.features(entry, "nam");
          const auto labels = seq2seq::transcribe(model, nam);
          os << json{{"id", entry.id}, {"labels", labels}, {"text", labels_to_text(labels)}}
                    .dump()
             << "\n";
          if (cv_emit_wav) {
            const Matrix predicted = seq2seq::decode(model, seq2seq::encode(model, nam));
            const auto params = mel_params_from(config, model.config().target_dims);
            const auto audio =
                dsp::griffin_lim(dsp::MelSpectrogram{predicted, params}, config.gl_iters);
            const std::string wav =
                (fs::path(cv_args.out_dir) / (entry.id + ".converted.wav")).string();
            dsp::save_wav(audio, wav);
            record.output(wav);
          }
        }
        record.output(out);
      }
      record.finish();
      std::cout << "conversion done\n";
    }

    if (ev->parsed()) {
      auto config = ev_args.resolve();
      RunRecord record("eval", config, ev_args.out_dir);
      record.input(ev_manifest);
      record.input(ev_hyp);
      const auto corpus = pipeline::load_corpus(ev_manifest);
      std::ifstream hyp_in(ev_hyp);
      if (!hyp_in) throw IoError("eval: cannot open " + ev_hyp);
      json per_utt = json::array();
      long long word_edits = 0, word_total = 0, char_edits = 0, char_total = 0;
      std::string line;
      while (std::getline(hyp_in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        const auto& entry = corpus.entry(j.at("id").get<std::string>());
        const std::string ref = ids_to_text(entry.text);
        const std::string hyp = j.at("text").get<std::string>();
        const auto ref_words = eval::normalize_words(ref);
        const auto hyp_words = eval::normalize_words(hyp);
        const auto ref_chars = eval::normalize_chars(ref);
        const auto hyp_chars = eval::normalize_chars(hyp);
        const auto wd = eval::edit_distance(ref_words, hyp_words);
        const auto cd = eval::edit_distance(ref_chars, hyp_chars);
        word_edits += wd.distance;
        word_total += static_cast<long long>(ref_words.size());
        char_edits += cd.distance;
        char_total += static_cast<long long>(ref_chars.size());
        per_utt.push_back({{"id", entry.id},
                           {"wer", 100.0 * wd.distance / ref_words.size()},
                           {"cer", 100.0 * cd.distance / ref_chars.size()}});
      }
      if (word_total == 0) throw ContractError("eval: no hypotheses matched the manifest");
      json report;
      report["wer"] = 100.0 * word_edits / word_total;
      report["cer"] = 100.0 * char_edits / char_total;
      report["n"] = per_utt.size();
      report["utterances"] = per_utt;
      const std::string out =
          ev_out.empty() ? (fs::path(ev_args.out_dir) / "eval.json").string() : ev_out;
      std::ofstream os(out);
      os << report.dump(2) << "\n";
      if (!os) throw IoError("eval: cannot write " + out);
      record.output(out);
      record.finish();
      std::cout << "WER " << report["wer"] << "% CER " << report["cer"] << "% over "
                << report["n"] << " utterances\n";
    }

    if (fu->parsed()) {
      auto config = fu_args.resolve();
      RunRecord record("fit-units", config, fu_args.out_dir);
      record.input(fu_manifest);
      const auto corpus = pipeline::load_corpus(fu_manifest);
      std::vector<Matrix> mels;
      long long total_rows = 0;
      for (const auto& entry : corpus.entries) {
        mels.push_back(corpus.features(entry, "mel"));
        total_rows += mels.back().rows();
      }
      Matrix all(total_rows, mels.front().cols());
      long long row = 0;
      for (const auto& m : mels) {
        all.middleRows(row, m.rows()) = m;
        row += m.rows();
      }
      const int k = std::min<long long>(config.units_k, total_rows);
      const auto fit = units::kmeans_fit(all, k, config.units_iters, config.seed);
      const std::string out =
          fu_out.empty() ? (fs::path(fu_args.out_dir) / "units.bin").string() : fu_out;
      units::save_codebook(out, fit.codebook);
      record.output(out);
      record.finish();
      std::cout << "codebook inertia " << fit.inertia_history.front() << " -> "
                << fit.inertia_history.back() << "\n";
    }

    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
