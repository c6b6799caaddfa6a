#include "qcode/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace qcode {

EmbeddingIndex EmbeddingIndex::build(std::vector<CodeId> ids,
                                     std::vector<EmbeddingVector> vectors) {
  if (ids.size() != vectors.size()) {
    throw ValidationError("embedding index requires one vector per id");
  }
  EmbeddingIndex index;
  index.ids = std::move(ids);
  index.vectors = std::move(vectors);
  for (std::size_t i = 0; i < index.ids.size(); ++i) {
    if (!index.position.emplace(index.ids[i], i).second) {
      throw ValidationError("duplicate code id in embedding index: " + index.ids[i]);
    }
  }
  if (!index.vectors.empty()) {
    index.dimension = index.vectors.front().size();
    for (const auto& v : index.vectors) {
      if (v.size() != index.dimension) {
        throw ValidationError("embedding index vectors must share one dimension");
      }
    }
  }
  return index;
}

const EmbeddingVector& EmbeddingIndex::of(const CodeId& id) const {
  auto it = position.find(id);
  if (it == position.end()) throw ValidationError("code id missing from embedding index: " + id);
  return vectors[it->second];
}

double EmbeddingIndex::similarity(const CodeId& a, const CodeId& b) const {
  return dot(of(a), of(b));
}

std::vector<std::vector<CodeId>> Clustering::members(const EmbeddingIndex& index) const {
  std::vector<std::vector<CodeId>> out(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < index.ids.size(); ++i) {
    out[static_cast<std::size_t>(labels[i])].push_back(index.ids[i]);
  }
  return out;
}

namespace {

double sq_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::vector<EmbeddingVector> kmeanspp_init(const EmbeddingIndex& index, int k, DetRng& rng) {
  const std::size_t n = index.size();
  std::vector<EmbeddingVector> centroids;
  centroids.reserve(static_cast<std::size_t>(k));
  centroids.push_back(index.vectors[rng.next_below(n)]);
  std::vector<double> dist_sq(n);
  while (centroids.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      for (const auto& c : centroids) best = std::min(best, sq_distance(index.vectors[i], c));
      dist_sq[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = rng.next_below(n);
    } else {
      double target = rng.next_double() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += dist_sq[i];
        if (acc >= target) {
          pick = i;
          break;
        }
        pick = i;
      }
    }
    centroids.push_back(index.vectors[pick]);
  }
  return centroids;
}

void assign_all(const EmbeddingIndex& index, const std::vector<EmbeddingVector>& centroids,
                std::vector<int>& labels) {
  const std::size_t n = index.size();
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::max();
    int best_c = 0;
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      const double d = sq_distance(index.vectors[i], centroids[c]);
      if (d < best) {
        best = d;
        best_c = static_cast<int>(c);
      }
    }
    labels[i] = best_c;
  }
}

// Re-seed every empty cluster from the point farthest from its centroid.
void fix_empty_clusters(const EmbeddingIndex& index, std::vector<EmbeddingVector>& centroids,
                        std::vector<int>& labels) {
  const std::size_t n = index.size();
  for (;;) {
    std::vector<std::size_t> sizes(centroids.size(), 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    std::size_t empty = centroids.size();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      if (sizes[c] == 0) {
        empty = c;
        break;
      }
    }
    if (empty == centroids.size()) return;
    double worst = -1.0;
    std::size_t worst_i = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (sizes[static_cast<std::size_t>(labels[i])] <= 1) continue;
      const double d = sq_distance(index.vectors[i], centroids[static_cast<std::size_t>(labels[i])]);
      if (d > worst) {
        worst = d;
        worst_i = i;
      }
    }
    centroids[empty] = index.vectors[worst_i];
    labels[worst_i] = static_cast<int>(empty);
  }
}

double update_centroids(const EmbeddingIndex& index, const std::vector<int>& labels,
                        std::vector<EmbeddingVector>& centroids) {
  const std::size_t dim = index.dimension;
  std::vector<EmbeddingVector> sums(centroids.size(), EmbeddingVector(dim, 0.0));
  std::vector<std::size_t> counts(centroids.size(), 0);
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    ++counts[c];
    for (std::size_t d = 0; d < dim; ++d) sums[c][d] += index.vectors[i][d];
  }
  double max_shift = 0.0;
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    if (counts[c] == 0) continue;
    EmbeddingVector next(dim);
    for (std::size_t d = 0; d < dim; ++d) next[d] = sums[c][d] / static_cast<double>(counts[c]);
    max_shift = std::max(max_shift, std::sqrt(sq_distance(next, centroids[c])));
    centroids[c] = std::move(next);
  }
  return max_shift;
}

}  // namespace

Clustering kmeans(const EmbeddingIndex& index, int k, std::uint64_t seed,
                  const KMeansOptions& options) {
  const std::size_t n = index.size();
  if (k < 1) throw ValidationError("k must be >= 1");
  if (static_cast<std::size_t>(k) > n) {
    throw ValidationError("k (" + std::to_string(k) + ") exceeds point count (" +
                          std::to_string(n) + ")");
  }
  Clustering result;
  result.k = k;
  result.seed = seed;
  result.labels.assign(n, 0);

  if (static_cast<std::size_t>(k) == n) {
    // Saturated case: every code its own cluster.
    result.centroids = index.vectors;
    std::iota(result.labels.begin(), result.labels.end(), 0);
    result.inertia = 0.0;
  } else {
    DetRng rng(seed ^ fnv1a64("kmeans"));
    result.centroids = kmeanspp_init(index, k, rng);
    const bool minibatch = n > options.minibatch_threshold;
    if (!minibatch) {
      for (int iter = 0; iter < options.max_iterations; ++iter) {
        assign_all(index, result.centroids, result.labels);
        fix_empty_clusters(index, result.centroids, result.labels);
        const double shift = update_centroids(index, result.labels, result.centroids);
        if (shift < options.tolerance) break;
      }
    } else {
      std::vector<std::size_t> counts(result.centroids.size(), 0);
      for (int iter = 0; iter < options.max_iterations; ++iter) {
        double max_shift = 0.0;
        for (std::size_t b = 0; b < options.batch_size; ++b) {
          const std::size_t i = rng.next_below(n);
          double best = std::numeric_limits<double>::max();
          std::size_t best_c = 0;
          for (std::size_t c = 0; c < result.centroids.size(); ++c) {
            const double d = sq_distance(index.vectors[i], result.centroids[c]);
            if (d < best) {
              best = d;
              best_c = c;
            }
          }
          ++counts[best_c];
          const double eta = 1.0 / static_cast<double>(counts[best_c]);
          double shift_sq = 0.0;
          for (std::size_t d = 0; d < index.dimension; ++d) {
            const double delta = eta * (index.vectors[i][d] - result.centroids[best_c][d]);
            result.centroids[best_c][d] += delta;
            shift_sq += delta * delta;
          }
          max_shift = std::max(max_shift, std::sqrt(shift_sq));
        }
        if (max_shift < options.tolerance) break;
      }
      assign_all(index, result.centroids, result.labels);
      fix_empty_clusters(index, result.centroids, result.labels);
    }
    assign_all(index, result.centroids, result.labels);
    fix_empty_clusters(index, result.centroids, result.labels);
    result.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      result.inertia +=
          sq_distance(index.vectors[i], result.centroids[static_cast<std::size_t>(result.labels[i])]);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    result.assignment[index.ids[i]] = result.labels[i];
  }
  result.silhouette =
      k >= 2 ? silhouette_score(result.labels, k, index, seed, options.silhouette_sample) : 0.0;
  return result;
}

double silhouette_score(const std::vector<int>& labels, int k, const EmbeddingIndex& index,
                        std::uint64_t seed, std::size_t sample_cap) {
  if (k < 2) throw ValidationError("silhouette requires k >= 2");
  const std::size_t n = index.size();
  if (labels.size() != n) throw ValidationError("labels size mismatch");

  std::vector<std::size_t> sample(n);
  std::iota(sample.begin(), sample.end(), 0);
  if (n > sample_cap) {
    DetRng rng(seed ^ fnv1a64("silhouette-sample"));
    rng.shuffle(sample);
    sample.resize(sample_cap);
    std::sort(sample.begin(), sample.end());
  }

  std::vector<std::size_t> cluster_sizes(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++cluster_sizes[static_cast<std::size_t>(l)];

  double total = 0.0;
  for (std::size_t si = 0; si < sample.size(); ++si) {
    const std::size_t i = sample[si];
    const auto own = static_cast<std::size_t>(labels[i]);
    std::vector<double> sums(static_cast<std::size_t>(k), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = 1.0 - dot(index.vectors[i], index.vectors[j]);
      sums[static_cast<std::size_t>(labels[j])] += d;
    }
    double s = 0.0;
    if (cluster_sizes[own] > 1) {
      const double a = sums[own] / static_cast<double>(cluster_sizes[own] - 1);
      double b = std::numeric_limits<double>::max();
      for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
        if (c == own || cluster_sizes[c] == 0) continue;
        b = std::min(b, sums[c] / static_cast<double>(cluster_sizes[c]));
      }
      const double denom = std::max(a, b);
      s = denom > 0.0 ? (b - a) / denom : 0.0;
    }
    total += s;
  }
  return sample.empty() ? 0.0 : total / static_cast<double>(sample.size());
}

int default_k_max(std::size_t n) {
  if (n < 2) return 1;
  const int root = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  return std::max(1, std::min({root, 100, static_cast<int>(n) - 1}));
}

int select_k(const EmbeddingIndex& index, int k_min, int k_max, std::uint64_t seed,
             const KMeansOptions& options) {
  const std::size_t n = index.size();
  if (n < 2) throw ValidationError("k selection requires at least 2 codes");
  if (k_min < 1) throw ValidationError("k_min must be >= 1");
  if (k_max <= 0) k_max = default_k_max(n);
  k_max = std::min(k_max, static_cast<int>(n) - 1);
  if (k_max < k_min) return std::min(k_min, static_cast<int>(n));

  struct Scan {
    int k;
    double silhouette;
    double inertia;
  };
  std::vector<Scan> scans;
  for (int k = k_min; k <= k_max; ++k) {
    std::uint64_t mix = seed;
    const Clustering c = kmeans(index, k, splitmix64(mix) ^ static_cast<std::uint64_t>(k), options);
    const double sil =
        k >= 2 ? silhouette_score(c.labels, k, index, seed, options.silhouette_sample) : 0.0;
    scans.push_back({k, sil, c.inertia});
  }

  double best_sil = -std::numeric_limits<double>::max();
  for (const auto& s : scans) best_sil = std::max(best_sil, s.silhouette);

  // Tie break: largest second difference of inertia (0 where undefined at the
  // scan boundaries), then the smaller k.
  auto second_diff = [&](std::size_t i) {
    if (i == 0 || i + 1 >= scans.size()) return 0.0;
    return scans[i - 1].inertia - 2.0 * scans[i].inertia + scans[i + 1].inertia;
  };
  int chosen = scans.front().k;
  double chosen_diff = -std::numeric_limits<double>::max();
  bool have = false;
  for (std::size_t i = 0; i < scans.size(); ++i) {
    if (scans[i].silhouette != best_sil) continue;
    const double d2 = second_diff(i);
    if (!have || d2 > chosen_diff) {
      have = true;
      chosen = scans[i].k;
      chosen_diff = d2;
    }
  }
  return chosen;
}

}  // namespace qcode
