#include "nam/seq2seq/model.hpp"

#include "nam/io/checkpoint.hpp"
#include "nam/numerics/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nam::seq2seq {

using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

Var scaled_dot_attention(Var queries, Var keys, Var values, int heads) {
  Tape& tape = *queries.tape;
  const Tensor& q = tape.value(queries);
  const Tensor& k = tape.value(keys);
  const Tensor& v = tape.value(values);
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.cols() != k.cols() ||
      k.cols() != v.cols()) {
    throw ContractError("attention: dims must match, got " + q.shape_str() + ", " +
                        k.shape_str() + ", " + v.shape_str());
  }
  if (k.rows() != v.rows()) {
    throw ContractError("attention: key/value lengths differ (" + std::to_string(k.rows()) +
                        " vs " + std::to_string(v.rows()) + ")");
  }
  if (heads < 1 || q.cols() % heads != 0) {
    throw ContractError("attention: model dim " + std::to_string(q.cols()) +
                        " not divisible by " + std::to_string(heads) + " heads");
  }
  const int head_dim = q.cols() / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

  Var out{};
  for (int h = 0; h < heads; ++h) {
    Var qh = numerics::slice_cols(queries, h * head_dim, head_dim);
    Var kh = numerics::slice_cols(keys, h * head_dim, head_dim);
    Var vh = numerics::slice_cols(values, h * head_dim, head_dim);
    Var scores = numerics::scale(numerics::matmul(qh, numerics::transpose(kh)), inv_sqrt);
    Var oh = numerics::matmul(numerics::softmax(scores), vh);
    out = h == 0 ? oh : numerics::concat_cols(out, oh);
  }
  return out;
}

Matrix scaled_dot_attention(const Matrix& queries, const Matrix& keys, const Matrix& values,
                            int heads) {
  Tape tape;
  Var q = tape.leaf(Tensor::from_matrix(queries));
  Var k = tape.leaf(Tensor::from_matrix(keys));
  Var v = tape.leaf(Tensor::from_matrix(values));
  return tape.value(scaled_dot_attention(q, k, v, heads)).to_matrix();
}

Matrix positional_encoding(int frames, int dims) {
  Matrix pe(frames, dims);
  for (int t = 0; t < frames; ++t) {
    for (int i = 0; i < dims; ++i) {
      const double rate = std::pow(10000.0, -2.0 * (i / 2) / dims);
      pe(t, i) = (i % 2 == 0) ? std::sin(t * rate) : std::cos(t * rate);
    }
  }
  return pe;
}

namespace {

Tensor random_weights(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::int64_t i = 0; i < t.size(); ++i) t.at(i) = scale * rng.normal();
  return t;
}

Tensor ones_row(int n) {
  Tensor t = Tensor::constant({n}, 1.0);
  t.set_requires_grad(true);
  return t;
}

}  // namespace

FftBlock::FftBlock(const FftBlockConfig& config, Rng& rng) : config_(config) {
  const int d = config.model_dim;
  const int k = config.conv_kernel;
  // Two attention layers: wq, wk, wv, wo + layer-norm affine each; then two
  // convolutions with a shared residual + norm.
  for (int a = 0; a < 2; ++a) {
    for (int i = 0; i < 4; ++i) tensors_.push_back(random_weights({d, d}, d, rng));
    tensors_.push_back(ones_row(d));                       // ln gain
    tensors_.push_back(Tensor::zeros({d}, true));          // ln bias
  }
  tensors_.push_back(random_weights({k, d, d}, k * d, rng));  // conv1
  tensors_.push_back(Tensor::zeros({d}, true));
  tensors_.push_back(random_weights({k, d, d}, k * d, rng));  // conv2
  tensors_.push_back(Tensor::zeros({d}, true));
  tensors_.push_back(ones_row(d));
  tensors_.push_back(Tensor::zeros({d}, true));
}

std::vector<Tensor*> FftBlock::params() {
  std::vector<Tensor*> out;
  for (auto& t : tensors_) out.push_back(&t);
  return out;
}

std::vector<const Tensor*> FftBlock::params() const {
  std::vector<const Tensor*> out;
  for (const auto& t : tensors_) out.push_back(&t);
  return out;
}

std::vector<std::string> FftBlock::param_names() {
  std::vector<std::string> names;
  for (int a = 1; a <= 2; ++a) {
    const std::string p = "attn" + std::to_string(a) + ".";
    for (const char* w : {"wq", "wk", "wv", "wo"}) names.push_back(p + w);
    names.push_back(p + "ln_g");
    names.push_back(p + "ln_b");
  }
  for (const char* w : {"conv1_w", "conv1_b", "conv2_w", "conv2_b", "ln_g", "ln_b"}) {
    names.emplace_back(w);
  }
  return names;
}

Var FftBlock::forward(Tape&, const std::vector<Var>& p, Var x) const {
  if (static_cast<int>(p.size()) != kParamCount) {
    throw ContractError("FftBlock: expected " + std::to_string(kParamCount) + " params");
  }
  // p layout: [wq wk wv wo ln_g ln_b] x2, conv1_w conv1_b conv2_w conv2_b ln_g ln_b
  for (int a = 0; a < 2; ++a) {
    const int b = 6 * a;
    Var q = numerics::matmul(x, p[b + 0]);
    Var k = numerics::matmul(x, p[b + 1]);
    Var v = numerics::matmul(x, p[b + 2]);
    Var attn = numerics::matmul(scaled_dot_attention(q, k, v, config_.heads), p[b + 3]);
    Var normed = numerics::layer_norm(numerics::add(x, attn));
    x = numerics::add_rowwise(numerics::mul_rowwise(normed, p[b + 4]), p[b + 5]);
  }
  Var h = numerics::relu(numerics::add_rowwise(numerics::conv1d(x, p[12]), p[13]));
  Var conv = numerics::add_rowwise(numerics::conv1d(h, p[14]), p[15]);
  Var normed = numerics::layer_norm(numerics::add(x, conv));
  return numerics::add_rowwise(numerics::mul_rowwise(normed, p[16]), p[17]);
}

Seq2SeqConfig full_scale_config(int input_dims, int target_dims, int text_vocab, int unit_count) {
  Seq2SeqConfig c;
  c.input_dims = input_dims;
  c.target_dims = target_dims;
  c.model_dim = 256;
  c.heads = 2;
  c.conv_kernel = 9;
  c.encoder_blocks = 6;
  c.decoder_blocks = 6;
  c.text_vocab = text_vocab;
  c.unit_count = unit_count;
  return c;
}

Seq2SeqModel::Seq2SeqModel(const Seq2SeqConfig& config, std::uint64_t seed) : config_(config) {
  if (config.model_dim % config.heads != 0) {
    throw ContractError("Seq2SeqModel: model_dim must be divisible by heads");
  }
  Rng rng(seed);
  in_w_ = random_weights({config.input_dims, config.model_dim}, config.input_dims, rng);
  in_b_ = Tensor::zeros({config.model_dim}, true);
  for (int i = 0; i < config.encoder_blocks; ++i) encoder_.emplace_back(config.block(), rng);
  for (int i = 0; i < config.decoder_blocks; ++i) decoder_.emplace_back(config.block(), rng);
  out_w_ = random_weights({config.model_dim, config.target_dims}, config.model_dim, rng);
  out_b_ = Tensor::zeros({config.target_dims}, true);
  ctc_w_ = random_weights({config.model_dim, config.text_vocab + 1}, config.model_dim, rng);
  ctc_b_ = Tensor::zeros({config.text_vocab + 1}, true);
  if (config.unit_count > 0) {
    unit_w_ = random_weights({config.target_dims, config.unit_count}, config.target_dims, rng);
    unit_b_ = Tensor::zeros({config.unit_count}, true);
  }
}

std::vector<Tensor*> Seq2SeqModel::params() {
  std::vector<Tensor*> out{&in_w_, &in_b_};
  for (auto& b : encoder_) {
    for (auto* t : b.params()) out.push_back(t);
  }
  for (auto& b : decoder_) {
    for (auto* t : b.params()) out.push_back(t);
  }
  out.push_back(&out_w_);
  out.push_back(&out_b_);
  out.push_back(&ctc_w_);
  out.push_back(&ctc_b_);
  if (config_.unit_count > 0) {
    out.push_back(&unit_w_);
    out.push_back(&unit_b_);
  }
  return out;
}

std::vector<const Tensor*> Seq2SeqModel::params() const {
  auto mutable_params = const_cast<Seq2SeqModel*>(this)->params();
  return {mutable_params.begin(), mutable_params.end()};
}

std::vector<std::string> Seq2SeqModel::param_names() const {
  std::vector<std::string> names{"in_w", "in_b"};
  const auto block_names = FftBlock::param_names();
  for (int i = 0; i < config_.encoder_blocks; ++i) {
    for (const auto& n : block_names) names.push_back("enc" + std::to_string(i) + "." + n);
  }
  for (int i = 0; i < config_.decoder_blocks; ++i) {
    for (const auto& n : block_names) names.push_back("dec" + std::to_string(i) + "." + n);
  }
  names.insert(names.end(), {"out_w", "out_b", "ctc_w", "ctc_b"});
  if (config_.unit_count > 0) names.insert(names.end(), {"unit_w", "unit_b"});
  return names;
}

std::vector<Var> Seq2SeqModel::bind(Tape& tape, bool trainable) const {
  std::vector<Var> vars;
  for (const Tensor* p : params()) {
    Tensor copy = *p;
    copy.set_requires_grad(trainable);
    vars.push_back(tape.leaf(std::move(copy)));
  }
  return vars;
}

namespace {

// Parameter layout offsets inside the flattened bind() order.
struct ParamIndex {
  int enc_start, dec_start, out_w, out_b, ctc_w, ctc_b, unit_w, unit_b;
};

ParamIndex param_index(const Seq2SeqConfig& c) {
  ParamIndex idx{};
  idx.enc_start = 2;
  idx.dec_start = idx.enc_start + c.encoder_blocks * FftBlock::kParamCount;
  idx.out_w = idx.dec_start + c.decoder_blocks * FftBlock::kParamCount;
  idx.out_b = idx.out_w + 1;
  idx.ctc_w = idx.out_b + 1;
  idx.ctc_b = idx.ctc_w + 1;
  idx.unit_w = idx.ctc_b + 1;
  idx.unit_b = idx.unit_w + 1;
  return idx;
}

std::vector<Var> slice_params(const std::vector<Var>& all, int start, int count) {
  return {all.begin() + start, all.begin() + start + count};
}

}  // namespace

Var Seq2SeqModel::encode_graph(Tape& tape, const std::vector<Var>& params, Var nam) const {
  const Tensor& x = tape.value(nam);
  if (x.rank() != 2 || x.cols() != config_.input_dims) {
    throw ContractError("encode: expected [T x " + std::to_string(config_.input_dims) +
                        "] features, got " + x.shape_str());
  }
  const ParamIndex idx = param_index(config_);
  Var h = numerics::add_rowwise(numerics::matmul(nam, params[0]), params[1]);
  Var pe = tape.leaf(Tensor::from_matrix(positional_encoding(x.rows(), config_.model_dim)));
  h = numerics::add(h, pe);
  for (int i = 0; i < config_.encoder_blocks; ++i) {
    h = encoder_[i].forward(
        tape, slice_params(params, idx.enc_start + i * FftBlock::kParamCount,
                           FftBlock::kParamCount),
        h);
  }
  return h;
}

Var Seq2SeqModel::decode_graph(Tape& tape, const std::vector<Var>& params, Var latents) const {
  const Tensor& x = tape.value(latents);
  if (x.rank() != 2 || x.cols() != config_.model_dim) {
    throw ContractError("decode: expected [T x " + std::to_string(config_.model_dim) +
                        "] latents, got " + x.shape_str());
  }
  const ParamIndex idx = param_index(config_);
  Var pe = tape.leaf(Tensor::from_matrix(positional_encoding(x.rows(), config_.model_dim)));
  Var h = numerics::add(latents, pe);
  for (int i = 0; i < config_.decoder_blocks; ++i) {
    h = decoder_[i].forward(
        tape, slice_params(params, idx.dec_start + i * FftBlock::kParamCount,
                           FftBlock::kParamCount),
        h);
  }
  return numerics::add_rowwise(numerics::matmul(h, params[idx.out_w]), params[idx.out_b]);
}

Var Seq2SeqModel::ctc_logits_graph(Tape&, const std::vector<Var>& params,
                                   Var latents) const {
  const ParamIndex idx = param_index(config_);
  return numerics::add_rowwise(numerics::matmul(latents, params[idx.ctc_w]), params[idx.ctc_b]);
}

Var Seq2SeqModel::unit_logits_graph(Tape&, const std::vector<Var>& params,
                                    Var decoded) const {
  if (config_.unit_count <= 0) throw ContractError("predict_units: model has no unit head");
  const ParamIndex idx = param_index(config_);
  return numerics::add_rowwise(numerics::matmul(decoded, params[idx.unit_w]),
                               params[idx.unit_b]);
}

Matrix encode(const Seq2SeqModel& model, const Matrix& nam_features) {
  Tape tape;
  const auto params = model.bind(tape, false);
  Var out = model.encode_graph(tape, params, tape.leaf(Tensor::from_matrix(nam_features)));
  return tape.value(out).to_matrix();
}

Matrix decode(const Seq2SeqModel& model, const Matrix& latents) {
  Tape tape;
  const auto params = model.bind(tape, false);
  Var out = model.decode_graph(tape, params, tape.leaf(Tensor::from_matrix(latents)));
  return tape.value(out).to_matrix();
}

Matrix ctc_logits(const Seq2SeqModel& model, const Matrix& latents) {
  Tape tape;
  const auto params = model.bind(tape, false);
  Var out = model.ctc_logits_graph(tape, params, tape.leaf(Tensor::from_matrix(latents)));
  return tape.value(out).to_matrix();
}

Matrix predict_units(const Seq2SeqModel& model, const Matrix& decoded_latents) {
  if (model.config().unit_count <= 0) {
    throw ContractError("predict_units: model has no unit head");
  }
  // The unit head reads the decoder's hidden states; at eval we feed the
  // decoded embeddings through the head's linear map directly.
  Tape tape;
  const auto params = model.bind(tape, false);
  Var out =
      model.unit_logits_graph(tape, params, tape.leaf(Tensor::from_matrix(decoded_latents)));
  return tape.value(out).to_matrix();
}

ctc::LabelSeq transcribe(const Seq2SeqModel& model, const Matrix& nam_features) {
  const Matrix latents = encode(model, nam_features);
  const Matrix logits = ctc_logits(model, latents);
  return ctc::greedy_decode(ctc::LogProbLattice::from_logits(logits));
}

Seq2SeqTrainResult train(Seq2SeqModel& model, const std::vector<Seq2SeqExample>& corpus,
                         const Seq2SeqTrainOptions& options) {
  if (corpus.empty()) throw ContractError("train: empty corpus");
  for (const auto& ex : corpus) {
    if (ex.nam.rows() != ex.target.rows()) {
      throw ContractError("train: misaligned lengths (" + std::to_string(ex.nam.rows()) +
                          " nam frames vs " + std::to_string(ex.target.rows()) + " target)");
    }
    if (!ex.unit_ids.empty() &&
        ex.unit_ids.size() != static_cast<std::size_t>(ex.nam.rows())) {
      throw ContractError("train: unit ids must cover every frame");
    }
  }

  Rng rng(options.seed);
  numerics::SgdMomentum optimizer(options.lr, options.momentum);
  Seq2SeqTrainResult result;
  std::vector<int> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    // Fisher-Yates with our own rng to keep runs bit-reproducible.
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
      std::swap(order[i], order[rng.uniform_int(0, i)]);
    }
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t pos = 0; pos < order.size(); pos += options.batch) {
      Tape tape;
      const auto params = model.bind(tape, true);
      Var total{};
      int n_items = 0;
      for (std::size_t b = pos; b < std::min(order.size(), pos + options.batch); ++b) {
        const Seq2SeqExample& ex = corpus[order[b]];
        Var latents = model.encode_graph(tape, params, tape.leaf(Tensor::from_matrix(ex.nam)));
        Var decoded = model.decode_graph(tape, params, latents);
        Var item = numerics::mse(decoded, tape.leaf(Tensor::from_matrix(ex.target)));
        if (options.lambda_ctc != 0.0) {
          if (ctc::min_frames(ex.labels) <= static_cast<int>(ex.nam.rows())) {
            Var lattice = numerics::log_softmax(model.ctc_logits_graph(tape, params, latents));
            Var nll = ctc::loss_op(lattice, ex.labels);
            item = numerics::add(item, numerics::scale(nll, options.lambda_ctc));
          } else {
            ++result.skipped_infeasible_ctc;
            log_warn("train: skipping infeasible CTC item (labels do not fit frames)");
          }
        }
        if (options.lambda_units != 0.0 && !ex.unit_ids.empty()) {
          Var unit_logits = model.unit_logits_graph(tape, params, decoded);
          Var ce = numerics::cross_entropy(unit_logits, ex.unit_ids);
          item = numerics::add(item, numerics::scale(ce, options.lambda_units));
        }
        total = n_items == 0 ? item : numerics::add(total, item);
        ++n_items;
      }
      Var loss = numerics::scale(total, 1.0 / n_items);
      epoch_loss += tape.value(loss).value();
      ++batches;
      const auto grads = tape.gradients(loss, params);
      optimizer.step(model.params(), grads);
    }
    result.loss_history.push_back(epoch_loss / batches);
  }
  model.set_trained(true);
  return result;
}

dsp::AudioBuffer convert(const Seq2SeqModel& model, const dsp::AudioBuffer& nam_audio,
                         const dsp::MelParams& mel_params, int griffin_lim_iterations) {
  if (!model.trained()) throw ContractError("convert: model is untrained");
  if (model.config().input_dims != mel_params.n_mels ||
      model.config().target_dims != mel_params.n_mels) {
    throw ContractError("convert: model dims do not match mel params");
  }
  const dsp::MelSpectrogram mel = dsp::mel_spectrogram(nam_audio, mel_params);
  const Matrix predicted = decode(model, encode(model, mel.frames));
  return dsp::griffin_lim(dsp::MelSpectrogram{predicted, mel_params}, griffin_lim_iterations);
}

void load_into(Seq2SeqModel& model, const std::vector<Tensor>& tensors) {
  auto params = model.params();
  if (tensors.size() != params.size()) throw IoError("seq2seq checkpoint: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!numerics::same_shape(*params[i], tensors[i])) {
      throw IoError("seq2seq checkpoint: parameter shape mismatch at index " + std::to_string(i));
    }
    *params[i] = tensors[i];
    params[i]->set_requires_grad(true);
  }
}

void save_seq2seq(const std::string& path, const Seq2SeqModel& model,
                  const nlohmann::json& extra_meta) {
  io::Checkpoint ckpt;
  ckpt.meta = extra_meta;
  ckpt.meta["kind"] = "seq2seq";
  const Seq2SeqConfig& c = model.config();
  ckpt.meta["config"] = {{"input_dims", c.input_dims},   {"target_dims", c.target_dims},
                         {"model_dim", c.model_dim},     {"heads", c.heads},
                         {"conv_kernel", c.conv_kernel}, {"encoder_blocks", c.encoder_blocks},
                         {"decoder_blocks", c.decoder_blocks}, {"text_vocab", c.text_vocab},
                         {"unit_count", c.unit_count}};
  ckpt.meta["trained"] = model.trained();
  const auto names = model.param_names();
  const auto params = model.params();
  for (std::size_t i = 0; i < names.size(); ++i) ckpt.tensors.emplace_back(names[i], *params[i]);
  io::save_checkpoint(path, ckpt);
}

Seq2SeqModel load_seq2seq(const std::string& path) {
  const io::Checkpoint ckpt = io::load_checkpoint(path);
  if (ckpt.meta.value("kind", "") != "seq2seq") {
    throw IoError("checkpoint " + path + " is not a seq2seq model");
  }
  const auto& jc = ckpt.meta.at("config");
  Seq2SeqConfig c;
  c.input_dims = jc.at("input_dims").get<int>();
  c.target_dims = jc.at("target_dims").get<int>();
  c.model_dim = jc.at("model_dim").get<int>();
  c.heads = jc.at("heads").get<int>();
  c.conv_kernel = jc.at("conv_kernel").get<int>();
  c.encoder_blocks = jc.at("encoder_blocks").get<int>();
  c.decoder_blocks = jc.at("decoder_blocks").get<int>();
  c.text_vocab = jc.at("text_vocab").get<int>();
  c.unit_count = jc.at("unit_count").get<int>();

  Seq2SeqModel model(c, 0);
  std::vector<Tensor> tensors;
  for (const auto& name : model.param_names()) tensors.push_back(ckpt.tensor(name));
  load_into(model, tensors);
  model.set_trained(ckpt.meta.value("trained", false));
  return model;
}

}  // namespace nam::seq2seq
