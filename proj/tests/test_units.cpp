#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nam/rng.hpp"
#include "nam/units/codebook.hpp"

#include <filesystem>

using namespace nam;
using namespace nam::units;

namespace {

Matrix random_frames(int n, int dim, Rng& rng, double scale = 1.0) {
  Matrix m(n, dim);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

}  // namespace

TEST_CASE("k equal to the frame count gives zero inertia") {
  Rng rng(1);
  const Matrix frames = random_frames(8, 4, rng);
  const auto fit = kmeans_fit(frames, 8, 10, 123);
  CHECK(fit.inertia_history.back() == doctest::Approx(0.0).epsilon(1e-12));
  // Every point is its own centroid.
  const auto ids = encode(fit.codebook, frames);
  for (int i = 0; i < 8; ++i) {
    CHECK((fit.codebook.centroids.row(ids[i]) - frames.row(i)).norm() == 0.0);
  }
}

TEST_CASE("three separated blobs are recovered within 0.1 sigma") {
  Rng rng(2);
  const double sigma = 0.5;
  Matrix means(3, 6);
  means.setZero();
  means(0, 0) = 20.0;
  means(1, 1) = -20.0;
  means(2, 2) = 20.0;
  const int per_blob = 2500;
  Matrix frames(3 * per_blob, 6);
  for (int b = 0; b < 3; ++b) {
    for (int i = 0; i < per_blob; ++i) {
      for (int d = 0; d < 6; ++d) {
        frames(b * per_blob + i, d) = means(b, d) + sigma * rng.normal();
      }
    }
  }
  const auto fit = kmeans_fit(frames, 3, 25, 7);
  for (int b = 0; b < 3; ++b) {
    double best = 1e300;
    for (int c = 0; c < 3; ++c) {
      best = std::min(best, (fit.codebook.centroids.row(c) - means.row(b)).norm());
    }
    CHECK(best < 0.1 * sigma);
  }
}

TEST_CASE("same seed, same codebook") {
  Rng rng(3);
  const Matrix frames = random_frames(200, 8, rng);
  const auto a = kmeans_fit(frames, 16, 15, 99);
  const auto b = kmeans_fit(frames, 16, 15, 99);
  CHECK(a.codebook.centroids == b.codebook.centroids);
}

TEST_CASE("inertia is monotone non-increasing across iterations") {
  Rng rng(4);
  const Matrix frames = random_frames(300, 5, rng, 3.0);
  const auto fit = kmeans_fit(frames, 12, 30, 5);
  for (std::size_t i = 1; i < fit.inertia_history.size(); ++i) {
    REQUIRE(fit.inertia_history[i] <= fit.inertia_history[i - 1] + 1e-9);
  }
}

TEST_CASE("bad arguments are rejected") {
  Rng rng(5);
  const Matrix frames = random_frames(4, 3, rng);
  CHECK_THROWS_AS(kmeans_fit(frames, 0, 5, 1), ContractError);
  CHECK_THROWS_AS(kmeans_fit(frames, 5, 5, 1), ContractError);
}

TEST_CASE("encode of an exact centroid returns its id") {
  Rng rng(6);
  const Matrix frames = random_frames(50, 4, rng);
  const auto fit = kmeans_fit(frames, 10, 10, 11);
  Matrix probe = fit.codebook.centroids.row(7);
  CHECK(encode(fit.codebook, probe) == std::vector<int>{7});
}

TEST_CASE("encode(decode(ids)) is the identity") {
  Rng rng(7);
  const Matrix frames = random_frames(120, 6, rng);
  const auto fit = kmeans_fit(frames, 15, 10, 2);
  std::vector<int> ids(40);
  for (int& id : ids) id = rng.uniform_int(0, 14);
  CHECK(encode(fit.codebook, decode(fit.codebook, ids)) == ids);
}

TEST_CASE("decode rejects out-of-range ids") {
  Rng rng(8);
  const auto fit = kmeans_fit(random_frames(30, 4, rng), 5, 5, 3);
  CHECK_THROWS_AS(decode(fit.codebook, {5}), ContractError);
  CHECK_THROWS_AS(decode(fit.codebook, {-1}), ContractError);
}

TEST_CASE("encode matches an exhaustive nearest-neighbor scan") {
  Rng rng(9);
  const Matrix frames = random_frames(200, 8, rng);
  const auto fit = kmeans_fit(frames, 24, 12, 17);
  const Matrix probes = random_frames(500, 8, rng);
  const auto ids = encode(fit.codebook, probes);
  for (int i = 0; i < probes.rows(); ++i) {
    // Brute-force oracle with the same lowest-id tie break.
    int best = 0;
    double best_d = 1e300;
    for (int c = 0; c < fit.codebook.size(); ++c) {
      const double d = (fit.codebook.centroids.row(c) - probes.row(i)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    REQUIRE(ids[i] == best);
    // Metric projection property.
    for (int c = 0; c < fit.codebook.size(); ++c) {
      REQUIRE((probes.row(i) - fit.codebook.centroids.row(ids[i])).squaredNorm() <=
              (probes.row(i) - fit.codebook.centroids.row(c)).squaredNorm() + 1e-12);
    }
  }
}

TEST_CASE("codebook checkpoint round trip") {
  Rng rng(10);
  const auto fit = kmeans_fit(random_frames(60, 7, rng), 9, 8, 21);
  const std::string path =
      (std::filesystem::temp_directory_path() / "codebook.bin").string();
  save_codebook(path, fit.codebook);
  const Codebook back = load_codebook(path);
  CHECK(back.size() == 9);
  CHECK(back.dim() == 7);
  CHECK(back.centroids == fit.codebook.centroids);
}
