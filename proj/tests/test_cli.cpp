#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nam/common.hpp"
#include "nam/dsp/feature_io.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string workspace() {
  static const std::string dir = [] {
    const auto d = fs::temp_directory_path() / "nam_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d.string();
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(NAM_CLI_PATH) + " " + args + " >> " + workspace() +
                          "/cli.log 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  json j;
  in >> j;
  return j;
}

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::vector<json> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(json::parse(line));
  }
  return lines;
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("gen-data is deterministic: identical manifests for the same seed") {
  const std::string a = workspace() + "/gen_a";
  const std::string b = workspace() + "/gen_b";
  REQUIRE(run("gen-data --seed 7 --n 6 --out-dir " + a) == 0);
  REQUIRE(run("gen-data --seed 7 --n 6 --out-dir " + b) == 0);
  CHECK(file_bytes(a + "/manifest.jsonl") == file_bytes(b + "/manifest.jsonl"));
  CHECK(file_bytes(a + "/inventory.namc") == file_bytes(b + "/inventory.namc"));

  const json ra = read_json(a + "/run-gen-data.json");
  const json rb = read_json(b + "/run-gen-data.json");
  CHECK(ra.at("outputs").at(a + "/manifest.jsonl") ==
        rb.at("outputs").at(b + "/manifest.jsonl"));
  CHECK(ra.at("config_hash") == rb.at("config_hash"));
  CHECK(ra.at("seed") == 7);

  // Different seed, different corpus.
  const std::string c = workspace() + "/gen_c";
  REQUIRE(run("gen-data --seed 8 --n 6 --out-dir " + c) == 0);
  CHECK(file_bytes(a + "/manifest.jsonl") != file_bytes(c + "/manifest.jsonl"));
}

TEST_CASE("align durations sum to the feature frame counts") {
  const std::string dir = workspace() + "/alignrun";
  REQUIRE(run("gen-data --seed 11 --n 8 --out-dir " + dir) == 0);
  REQUIRE(run("train-aligner --manifest " + dir + "/manifest.jsonl --iters 5 --out-dir " + dir) ==
          0);
  REQUIRE(run("align --manifest " + dir + "/manifest.jsonl --model " + dir +
              "/aligner.nama --out-dir " + dir) == 0);

  const auto manifest = read_jsonl(dir + "/manifest.jsonl");
  for (const auto& entry : manifest) {
    const std::string id = entry.at("id").get<std::string>();
    const json durations = read_json(dir + "/aligns/" + id + ".json");
    REQUIRE(durations.at("frame_rate") == 50.0);
    int sum = 0;
    for (const auto& d : durations.at("durations")) sum += d.get<int>();
    const auto feats = nam::dsp::read_features(
        dir + "/" + entry.at("files").at("whisper").get<std::string>());
    REQUIRE(sum == feats.data.rows());
    REQUIRE(durations.at("phonemes").size() == entry.at("text").size());
  }
}

TEST_CASE("dtw command emits a valid path") {
  const std::string dir = workspace() + "/dtwrun";
  REQUIRE(run("gen-data --seed 3 --n 2 --out-dir " + dir) == 0);
  const auto manifest = read_jsonl(dir + "/manifest.jsonl");
  const std::string fa =
      dir + "/" + manifest[0].at("files").at("whisper").get<std::string>();
  const std::string fb = dir + "/" + manifest[1].at("files").at("nam").get<std::string>();
  REQUIRE(run("dtw --a " + fa + " --b " + fb + " --out-dir " + dir) == 0);
  const json result = read_json(dir + "/dtw.json");
  CHECK(result.at("cost").get<double>() > 0.0);
  CHECK(result.at("path").front() == json::array({0, 0}));
}

TEST_CASE("emitted wavs flow through extract-mel") {
  const std::string dir = workspace() + "/melrun";
  REQUIRE(run("gen-data --seed 5 --n 2 --emit-wav --out-dir " + dir) == 0);
  const auto manifest = read_jsonl(dir + "/manifest.jsonl");
  const std::string wav = dir + "/" + manifest[0].at("files").at("wav").get<std::string>();
  REQUIRE(fs::exists(wav));
  REQUIRE(run("extract-mel --in " + wav + " --n-mels 16 --out-dir " + dir + "/mels") == 0);

  const std::string stem = fs::path(wav).stem().string();
  const auto mel = nam::dsp::read_features(dir + "/mels/" + stem + ".mel.namf");
  CHECK(mel.meta.n_mels == 16);
  // 50 frames per second of audio: frame count tracks duration exactly.
  const auto durations = manifest[0].at("durations");
  int planted = 0;
  for (const auto& d : durations) planted += d.get<int>();
  CHECK(mel.data.rows() == planted);  // gl output length is frames * hop
}

TEST_CASE("diffusion training and sampling round trip through checkpoints") {
  const std::string dir = workspace() + "/diffrun";
  const std::string cfg = dir + "/fast.cfg";
  fs::create_directories(dir);
  {
    std::ofstream f(cfg);
    f << "diff_train_steps = 40\n";
    f << "diff_hidden = 16\n";
    f << "diff_segment_frames = 30\n";
    f << "synth_n_utts = 6\n";
  }
  REQUIRE(run("gen-data --config " + cfg + " --seed 13 --out-dir " + dir) == 0);
  REQUIRE(run("train-diffusion --config " + cfg + " --manifest " + dir +
              "/manifest.jsonl --out-dir " + dir) == 0);
  REQUIRE(fs::exists(dir + "/diffusion.namc"));
  REQUIRE(run("sample --config " + cfg + " --ckpt " + dir + "/diffusion.namc --manifest " + dir +
              "/manifest.jsonl --out-dir " + dir + "/samples") == 0);
  const auto manifest = read_jsonl(dir + "/manifest.jsonl");
  const std::string id = manifest[0].at("id").get<std::string>();
  const auto sampled = nam::dsp::read_features(dir + "/samples/" + id + ".sampled.namf");
  int frames = 0;
  for (const auto& d : manifest[0].at("durations")) frames += d.get<int>();
  CHECK(sampled.data.rows() == frames);
  CHECK(sampled.data.allFinite());
}

TEST_CASE("seq2seq conversion and evaluation produce a report") {
  const std::string dir = workspace() + "/e2e";
  const std::string cfg = dir + "/fast.cfg";
  fs::create_directories(dir);
  {
    std::ofstream f(cfg);
    f << "s2s_epochs = 8\n";
    f << "s2s_model_dim = 16\n";
    f << "synth_n_utts = 8\n";
  }
  REQUIRE(run("gen-data --config " + cfg + " --seed 17 --out-dir " + dir) == 0);
  REQUIRE(run("train-seq2seq --config " + cfg + " --manifest " + dir +
              "/manifest.jsonl --out-dir " + dir) == 0);
  REQUIRE(run("convert --config " + cfg + " --model " + dir + "/seq2seq.namc --manifest " + dir +
              "/manifest.jsonl --out-dir " + dir) == 0);
  REQUIRE(run("eval --manifest " + dir + "/manifest.jsonl --hyp " + dir +
              "/transcripts.jsonl --out-dir " + dir) == 0);

  const json report = read_json(dir + "/eval.json");
  CHECK(report.at("n") == 8);
  CHECK(report.at("wer").get<double>() >= 0.0);
  CHECK(report.at("cer").get<double>() >= 0.0);
  CHECK(report.at("utterances").size() == 8);

  // Run records chain inputs to outputs by hash.
  const json record = read_json(dir + "/run-eval.json");
  CHECK(record.at("inputs").contains(dir + "/manifest.jsonl"));
  CHECK(record.at("outputs").contains(dir + "/eval.json"));
}

TEST_CASE("unit codebooks fit and feed the unit head") {
  const std::string dir = workspace() + "/units";
  const std::string cfg = dir + "/fast.cfg";
  fs::create_directories(dir);
  {
    std::ofstream f(cfg);
    f << "units_k = 12\n";
    f << "units_iters = 6\n";
    f << "s2s_epochs = 2\n";
    f << "s2s_model_dim = 16\n";
    f << "synth_n_utts = 4\n";
  }
  REQUIRE(run("gen-data --config " + cfg + " --seed 19 --out-dir " + dir) == 0);
  REQUIRE(run("fit-units --config " + cfg + " --manifest " + dir + "/manifest.jsonl --out-dir " +
              dir) == 0);
  REQUIRE(fs::exists(dir + "/units.bin"));
  REQUIRE(run("train-seq2seq --config " + cfg + " --manifest " + dir +
              "/manifest.jsonl --units-ckpt " + dir + "/units.bin --out-dir " + dir) == 0);
}

TEST_CASE("exit codes distinguish contract violations from i/o failures") {
  // Unknown config key: contract violation -> 2.
  const std::string dir = workspace() + "/errs";
  fs::create_directories(dir);
  const std::string bad_cfg = dir + "/bad.cfg";
  {
    std::ofstream f(bad_cfg);
    f << "no_such_key = 1\n";
  }
  CHECK(run("gen-data --config " + bad_cfg + " --out-dir " + dir) == 2);

  // Missing input file: i/o failure -> 3.
  CHECK(run("train-aligner --manifest " + dir + "/missing.jsonl --out-dir " + dir) == 3);

  // Missing required flag: CLI contract -> 2.
  CHECK(run("train-aligner --out-dir " + dir) == 2);
}
