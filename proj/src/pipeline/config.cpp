#include "nam/pipeline/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace nam::pipeline {

namespace {

struct Field {
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

template <typename T>
T parse_value(const std::string& s);

template <typename T, typename Fn>
T parse_number(const std::string& s, const char* what, Fn parse) {
  try {
    std::size_t pos = 0;
    const T v = parse(s, &pos);
    if (pos != s.size()) throw ContractError("config: bad " + std::string(what) + " '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw ContractError("config: bad " + std::string(what) + " '" + s + "'");
  }
}

template <>
int parse_value<int>(const std::string& s) {
  return parse_number<int>(s, "integer", [](const std::string& v, std::size_t* p) {
    return std::stoi(v, p);
  });
}

template <>
double parse_value<double>(const std::string& s) {
  return parse_number<double>(s, "number", [](const std::string& v, std::size_t* p) {
    return std::stod(v, p);
  });
}

template <>
std::uint64_t parse_value<std::uint64_t>(const std::string& s) {
  return parse_number<std::uint64_t>(s, "seed", [](const std::string& v, std::size_t* p) {
    return static_cast<std::uint64_t>(std::stoull(v, p));
  });
}

template <>
std::string parse_value<std::string>(const std::string& s) {
  return s;
}

std::string format_value(int v) { return std::to_string(v); }
std::string format_value(std::uint64_t v) { return std::to_string(v); }
std::string format_value(const std::string& v) { return v; }
std::string format_value(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

const std::map<std::string, Field>& registry() {
  static const std::map<std::string, Field> fields = [] {
    std::map<std::string, Field> m;
    const auto add = [&m](const std::string& name, auto member) {
      m[name] = Field{
          [member](const PipelineConfig& c) { return format_value(c.*member); },
          [member, name](PipelineConfig& c, const std::string& v) {
            c.*member = parse_value<std::decay_t<decltype(c.*member)>>(v);
          }};
    };
    add("seed", &PipelineConfig::seed);
    add("sample_rate", &PipelineConfig::sample_rate);
    add("hop", &PipelineConfig::hop);
    add("window", &PipelineConfig::window);
    add("n_mels", &PipelineConfig::n_mels);
    add("mel_floor", &PipelineConfig::mel_floor);
    add("gl_iters", &PipelineConfig::gl_iters);
    add("synth_n_utts", &PipelineConfig::synth_n_utts);
    add("synth_inventory", &PipelineConfig::synth_inventory);
    add("synth_feat_dims", &PipelineConfig::synth_feat_dims);
    add("synth_min_len", &PipelineConfig::synth_min_len);
    add("synth_max_len", &PipelineConfig::synth_max_len);
    add("synth_dur_lo", &PipelineConfig::synth_dur_lo);
    add("synth_dur_hi", &PipelineConfig::synth_dur_hi);
    add("synth_sigma_w", &PipelineConfig::synth_sigma_w);
    add("synth_sigma_n", &PipelineConfig::synth_sigma_n);
    add("synth_mel_dims", &PipelineConfig::synth_mel_dims);
    add("synth_mel_noise", &PipelineConfig::synth_mel_noise);
    add("aligner_iters", &PipelineConfig::aligner_iters);
    add("align_channel", &PipelineConfig::align_channel);
    add("diff_steps", &PipelineConfig::diff_steps);
    add("diff_beta_start", &PipelineConfig::diff_beta_start);
    add("diff_beta_end", &PipelineConfig::diff_beta_end);
    add("diff_train_steps", &PipelineConfig::diff_train_steps);
    add("diff_batch", &PipelineConfig::diff_batch);
    add("diff_lr", &PipelineConfig::diff_lr);
    add("diff_drop_prob", &PipelineConfig::diff_drop_prob);
    add("diff_w", &PipelineConfig::diff_w);
    add("diff_hidden", &PipelineConfig::diff_hidden);
    add("diff_t_embed", &PipelineConfig::diff_t_embed);
    add("diff_segment_frames", &PipelineConfig::diff_segment_frames);
    add("units_k", &PipelineConfig::units_k);
    add("units_dim", &PipelineConfig::units_dim);
    add("units_iters", &PipelineConfig::units_iters);
    add("s2s_preset", &PipelineConfig::s2s_preset);
    add("s2s_model_dim", &PipelineConfig::s2s_model_dim);
    add("s2s_heads", &PipelineConfig::s2s_heads);
    add("s2s_conv_kernel", &PipelineConfig::s2s_conv_kernel);
    add("s2s_enc_blocks", &PipelineConfig::s2s_enc_blocks);
    add("s2s_dec_blocks", &PipelineConfig::s2s_dec_blocks);
    add("s2s_lr", &PipelineConfig::s2s_lr);
    add("s2s_momentum", &PipelineConfig::s2s_momentum);
    add("s2s_batch", &PipelineConfig::s2s_batch);
    add("s2s_epochs", &PipelineConfig::s2s_epochs);
    add("s2s_lambda_ctc", &PipelineConfig::s2s_lambda_ctc);
    add("s2s_lambda_units", &PipelineConfig::s2s_lambda_units);
    return m;
  }();
  return fields;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  const auto& fields = registry();
  const auto it = fields.find(key);
  if (it == fields.end()) throw ContractError("config: unknown key '" + key + "'");
  it->second.set(*this, value);
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  PipelineConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ContractError("config: line " + std::to_string(line_no) + " is not key=value");
    }
    config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

std::string PipelineConfig::canonical() const {
  std::string out;
  for (const auto& [name, field] : registry()) {
    out += name + "=" + field.get(*this) + "\n";
  }
  return out;
}

std::uint64_t PipelineConfig::hash() const { return fnv1a(canonical()); }

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json j;
  for (const auto& [name, field] : registry()) j[name] = field.get(*this);
  return j;
}

}  // namespace nam::pipeline
