#pragma once

#include <map>
#include <string>
#include <vector>

#include "qcode/coder.hpp"
#include "qcode/llm.hpp"

namespace qcode {

// Code embeddings keyed by code id. All vectors share one dimension and unit
// norm (the gateway normalizes on the way in).
struct EmbeddingIndex {
  std::vector<CodeId> ids;
  std::vector<EmbeddingVector> vectors;
  std::map<CodeId, std::size_t> position;
  std::size_t dimension = 0;

  static EmbeddingIndex build(std::vector<CodeId> ids, std::vector<EmbeddingVector> vectors);

  std::size_t size() const { return ids.size(); }
  bool contains(const CodeId& id) const { return position.count(id) > 0; }
  const EmbeddingVector& of(const CodeId& id) const;

  double similarity(const CodeId& a, const CodeId& b) const;
};

struct Clustering {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> labels;                 // per index position, in [0, k)
  std::map<CodeId, int> assignment;        // code id -> cluster
  std::vector<EmbeddingVector> centroids;  // k centroids
  double silhouette = 0.0;
  double inertia = 0.0;

  std::vector<std::vector<CodeId>> members(const EmbeddingIndex& index) const;
};

struct KMeansOptions {
  int max_iterations = 300;
  double tolerance = 1e-4;              // max centroid shift for convergence
  std::size_t minibatch_threshold = 10000;  // full-batch Lloyd below this
  std::size_t batch_size = 1000;
  std::size_t silhouette_sample = 5000;
};

// Seeded k-means++ with full-batch Lloyd iterations (mini-batch above the
// threshold). Empty clusters are re-seeded from the farthest point. The
// returned clustering carries silhouette (0 when k < 2) and inertia.
Clustering kmeans(const EmbeddingIndex& index, int k, std::uint64_t seed,
                  const KMeansOptions& options = {});

// Mean silhouette over a seeded uniform sample (exact when n fits the cap),
// cosine distance. Singleton-cluster points score 0 by convention, as do
// points where both mean distances vanish. k < 2 is an error.
double silhouette_score(const std::vector<int>& labels, int k, const EmbeddingIndex& index,
                        std::uint64_t seed, std::size_t sample_cap = 5000);

// Scans [k_min, k_max] and returns the silhouette argmax; ties break on the
// largest second difference of inertia, then on the smaller k.
int select_k(const EmbeddingIndex& index, int k_min, int k_max, std::uint64_t seed,
             const KMeansOptions& options = {});

// min(ceil(sqrt(n)), 100, n-1), at least 1.
int default_k_max(std::size_t n);

}  // namespace qcode
