#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nam/align/regulate.hpp"
#include "nam/synthdata/corpus.hpp"

#include <cmath>

using namespace nam;
using namespace nam::synthdata;

namespace {

// Per-frame nearest-template classification accuracy against the planted
// phoneme sequence; the oracle behind the whisper-vs-NAM separability check.
double classification_accuracy(const ToyInventory& inv, const Matrix& stream,
                               const ParallelUtterance& utt) {
  int correct = 0;
  int frame = 0;
  for (int p = 0; p < utt.text.size(); ++p) {
    for (int r = 0; r < utt.durations.frames[p]; ++r, ++frame) {
      int best = 0;
      double best_d = 1e300;
      for (int c = 0; c < inv.templates.rows(); ++c) {
        const double d = (inv.templates.row(c) - stream.row(frame)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (best == utt.text.ids[p]) ++correct;
    }
  }
  return static_cast<double>(correct) / stream.rows();
}

}  // namespace

TEST_CASE("same seed twice gives identical corpora") {
  SynthConfig c;
  c.n_utts = 10;
  const Corpus a = gen_corpus(c);
  const Corpus b = gen_corpus(c);
  REQUIRE(a.utterances.size() == b.utterances.size());
  CHECK(a.inventory.templates == b.inventory.templates);
  for (std::size_t i = 0; i < a.utterances.size(); ++i) {
    CHECK(a.utterances[i].text.ids == b.utterances[i].text.ids);
    CHECK(a.utterances[i].durations.frames == b.utterances[i].durations.frames);
    CHECK(a.utterances[i].whisper == b.utterances[i].whisper);
    CHECK(a.utterances[i].nam == b.utterances[i].nam);
    CHECK(a.utterances[i].lip == b.utterances[i].lip);
  }
}

TEST_CASE("zero utterances is an empty corpus, not an error") {
  SynthConfig c;
  c.n_utts = 0;
  const Corpus corpus = gen_corpus(c);
  CHECK(corpus.utterances.empty());
}

TEST_CASE("parameter violations are rejected") {
  SynthConfig c;
  c.sigma_n = c.sigma_w;  // need sigma_n > sigma_w
  CHECK_THROWS_AS(gen_corpus(c), ContractError);
  SynthConfig c2;
  c2.min_len = 0;
  CHECK_THROWS_AS(gen_corpus(c2), ContractError);
  SynthConfig c3;
  c3.feat_dims = 4;  // < inventory
  CHECK_THROWS_AS(gen_corpus(c3), ContractError);
}

TEST_CASE("templates keep their minimum pairwise distance") {
  const Corpus corpus = gen_corpus(SynthConfig{});
  const Matrix& t = corpus.inventory.templates;
  for (int a = 0; a < t.rows(); ++a) {
    for (int b = a + 1; b < t.rows(); ++b) {
      REQUIRE((t.row(a) - t.row(b)).norm() >= corpus.config.min_template_distance);
    }
  }
}

TEST_CASE("length and rate relations hold for 1000 fuzzed utterances") {
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 1000; ++seed) {
    SynthConfig c;
    c.n_utts = 50;
    c.seed = seed;
    const Corpus corpus = gen_corpus(c);
    for (const auto& u : corpus.utterances) {
      REQUIRE(u.whisper.rows() == u.durations.total());
      REQUIRE(u.nam.rows() == u.whisper.rows());
      REQUIRE(u.lip.rows() == (u.whisper.rows() + 1) / 2);  // 25 Hz vs 50 Hz
      REQUIRE(u.durations.size() == u.text.size());
      for (int d : u.durations.frames) REQUIRE(d >= 1);
      ++checked;
    }
  }
}

TEST_CASE("whisper channel is more separable than the NAM channel") {
  for (const double sigma_w : {0.2, 0.3, 0.5}) {
    SynthConfig c;
    c.n_utts = 20;
    c.sigma_w = sigma_w;
    c.sigma_n = 3.0 * sigma_w;
    c.seed = 11;
    const Corpus corpus = gen_corpus(c);
    double whisper_acc = 0.0, nam_acc = 0.0;
    for (const auto& u : corpus.utterances) {
      whisper_acc += classification_accuracy(corpus.inventory, u.whisper, u);
      nam_acc += classification_accuracy(corpus.inventory, u.nam, u);
    }
    CHECK(whisper_acc > nam_acc);
  }
}

TEST_CASE("mel targets: frame counts, piecewise structure, planted means") {
  SynthConfig c;
  c.n_utts = 100;
  c.seed = 5;
  const Corpus corpus = gen_corpus(c);

  // Zero noise: frames are piecewise constant per phoneme.
  const auto& u0 = corpus.utterances.front();
  const Matrix clean = mel_from_utterance(corpus.inventory, u0, 0.0);
  REQUIRE(clean.rows() == u0.durations.total());
  int frame = 0;
  for (int p = 0; p < u0.text.size(); ++p) {
    for (int r = 0; r < u0.durations.frames[p]; ++r, ++frame) {
      REQUIRE((clean.row(frame) - clean.row(frame - r)).norm() == 0.0);
    }
  }

  // Per-phoneme mel means match the planted projections within 3 sigma.
  const Matrix planted = corpus.inventory.template_mel_means();
  Matrix sums = Matrix::Zero(planted.rows(), planted.cols());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(planted.rows());
  for (const auto& u : corpus.utterances) {
    const Matrix mel = mel_from_utterance(corpus.inventory, u, c.mel_noise);
    int t = 0;
    for (int p = 0; p < u.text.size(); ++p) {
      for (int r = 0; r < u.durations.frames[p]; ++r, ++t) {
        sums.row(u.text.ids[p]) += mel.row(t);
        counts[u.text.ids[p]] += 1.0;
      }
    }
  }
  for (int q = 0; q < planted.rows(); ++q) {
    REQUIRE(counts[q] > 0);
    const Matrix mean = sums.row(q) / counts[q];
    const double se = c.mel_noise / std::sqrt(counts[q]);
    // Deviation of the whole mean vector, 3-sigma in the scaled norm.
    REQUIRE((mean - planted.row(q)).norm() <=
            3.0 * se * std::sqrt(static_cast<double>(planted.cols())));
  }
}

TEST_CASE("mel targets are deterministic per utterance") {
  const Corpus corpus = gen_corpus(SynthConfig{});
  const auto& u = corpus.utterances[3];
  CHECK(mel_from_utterance(corpus.inventory, u, 0.05) ==
        mel_from_utterance(corpus.inventory, u, 0.05));
}

TEST_CASE("speakers alternate round-robin") {
  SynthConfig c;
  c.n_utts = 4;
  const Corpus corpus = gen_corpus(c);
  CHECK(corpus.utterances[0].speaker == "s0");
  CHECK(corpus.utterances[1].speaker == "s1");
  CHECK(corpus.utterances[2].speaker == "s0");
}
