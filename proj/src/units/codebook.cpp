#include "nam/units/codebook.hpp"

#include "nam/numerics/tensor.hpp"
#include "nam/rng.hpp"

#include <fstream>
#include <limits>

namespace nam::units {

namespace {

int nearest(const Matrix& centroids, const Eigen::Ref<const Eigen::RowVectorXd>& frame,
            double* dist2_out = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - frame).squaredNorm();
    if (d < best_d) {  // strict: ties keep the lowest id
      best_d = d;
      best = c;
    }
  }
  if (dist2_out != nullptr) *dist2_out = best_d;
  return best;
}

Matrix kmeans_pp_seed(const Matrix& features, int k, Rng& rng) {
  const int n = static_cast<int>(features.rows());
  Matrix centroids(k, features.cols());
  centroids.row(0) = features.row(rng.uniform_int(0, n - 1));
  Vector d2(n);
  for (int i = 0; i < n; ++i) d2[i] = (features.row(i) - centroids.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    int pick;
    if (total <= 0.0) {
      // All mass collapsed (duplicate points); fall back to uniform choice.
      pick = rng.uniform_int(0, n - 1);
    } else {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    }
    centroids.row(c) = features.row(pick);
    for (int i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (features.row(i) - centroids.row(c)).squaredNorm());
    }
  }
  return centroids;
}

}  // namespace

KmeansResult kmeans_fit(const Matrix& features, int k, int iterations, std::uint64_t seed) {
  const int n = static_cast<int>(features.rows());
  if (k <= 0) throw ContractError("kmeans_fit: k must be >= 1");
  if (k > n) {
    throw ContractError("kmeans_fit: k (" + std::to_string(k) + ") exceeds frame count (" +
                        std::to_string(n) + ")");
  }

  Rng rng(seed);
  Matrix centroids = kmeans_pp_seed(features, k, rng);
  std::vector<int> assignment(n, 0);
  KmeansResult result;

  for (int it = 0; it < iterations; ++it) {
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
      double d2;
      assignment[i] = nearest(centroids, features.row(i), &d2);
      inertia += d2;
    }
    result.inertia_history.push_back(inertia);

    Matrix sums = Matrix::Zero(k, features.cols());
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      sums.row(assignment[i]) += features.row(i);
      ++counts[assignment[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centroids.row(c) = sums.row(c) / counts[c];
      } else {
        // Re-seed an empty cluster to the point farthest from its centroid.
        int farthest = 0;
        double worst = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d = (features.row(i) - centroids.row(assignment[i])).squaredNorm();
          if (d > worst) {
            worst = d;
            farthest = i;
          }
        }
        centroids.row(c) = features.row(farthest);
      }
    }
  }

  result.codebook = Codebook{std::move(centroids)};
  return result;
}

std::vector<int> encode(const Codebook& codebook, const Matrix& features) {
  if (features.cols() != codebook.dim()) {
    throw ContractError("encode: feature dim " + std::to_string(features.cols()) +
                        " does not match codebook dim " + std::to_string(codebook.dim()));
  }
  std::vector<int> ids(features.rows());
  for (int i = 0; i < features.rows(); ++i) {
    ids[i] = nearest(codebook.centroids, features.row(i));
  }
  return ids;
}

Matrix decode(const Codebook& codebook, const std::vector<int>& ids) {
  Matrix out(static_cast<int>(ids.size()), codebook.dim());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= codebook.size()) {
      throw ContractError("decode: unit id " + std::to_string(ids[i]) + " out of range [0, " +
                          std::to_string(codebook.size()) + ")");
    }
    out.row(static_cast<int>(i)) = codebook.centroids.row(ids[i]);
  }
  return out;
}

void save_codebook(const std::string& path, const Codebook& codebook) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("codebook: cannot write " + path);
  const std::uint32_t k = static_cast<std::uint32_t>(codebook.size());
  const std::uint32_t dim = static_cast<std::uint32_t>(codebook.dim());
  out.write(reinterpret_cast<const char*>(&k), 4);
  out.write(reinterpret_cast<const char*>(&dim), 4);
  numerics::write_tensor(out, numerics::Tensor::from_matrix(codebook.centroids));
  if (!out) throw IoError("codebook: write failed for " + path);
}

Codebook load_codebook(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("codebook: cannot open " + path);
  std::uint32_t k = 0, dim = 0;
  in.read(reinterpret_cast<char*>(&k), 4);
  in.read(reinterpret_cast<char*>(&dim), 4);
  if (!in) throw IoError("codebook: truncated header in " + path);
  const numerics::Tensor t = numerics::read_tensor(in);
  if (t.rank() != 2 || t.shape()[0] != static_cast<int>(k) || t.shape()[1] != static_cast<int>(dim)) {
    throw IoError("codebook: header/tensor mismatch in " + path);
  }
  return Codebook{t.to_matrix()};
}

}  // namespace nam::units
