#pragma once

#include "nam/common.hpp"

#include <string>
#include <vector>

namespace nam::units {

// K x dim codebook of cluster centroids; discrete speech-unit vocabulary.
struct Codebook {
  Matrix centroids;

  int size() const { return static_cast<int>(centroids.rows()); }
  int dim() const { return static_cast<int>(centroids.cols()); }
};

struct KmeansResult {
  Codebook codebook;
  std::vector<double> inertia_history;  // one entry per Lloyd iteration, non-increasing
};

// Lloyd's algorithm with k-means++ seeding from `seed`. Empty clusters are
// re-seeded to the point farthest from its current centroid. Deterministic.
KmeansResult kmeans_fit(const Matrix& features, int k, int iterations, std::uint64_t seed);

// Nearest centroid in Euclidean distance; ties break to the lowest id.
std::vector<int> encode(const Codebook& codebook, const Matrix& features);

// Centroid lookup; ids must be < size().
Matrix decode(const Codebook& codebook, const std::vector<int>& ids);

// Checkpoint layout: u32 K, u32 dim, then the centroid tensor block.
void save_codebook(const std::string& path, const Codebook& codebook);
Codebook load_codebook(const std::string& path);

}  // namespace nam::units
