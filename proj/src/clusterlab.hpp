// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "matrix.hpp"

namespace seqembed {

struct PointSet {
  Matrix points;  // P x n
  std::optional<std::vector<std::int64_t>> truth;
};

enum class ClusterMethod { kmeans_pp, agglomerative_single_cosine };

struct ClusterResult {
  std::vector<std::int64_t> labels;
  Index k = 0;
  ClusterMethod method = ClusterMethod::kmeans_pp;
  std::optional<double> inertia;
  std::optional<std::uint64_t> seed;
  // Empty clusters are permitted but surfaced to the caller.
  bool has_empty_cluster = false;
};

// D^2-weighted seeding then Lloyd iterations until the largest centroid
// move falls under tol. Ties in assignment go to the lowest centroid index,
// so results are deterministic per seed.
ClusterResult kmeans_pp(const PointSet& ps, Index k, std::uint64_t seed,
                        Index max_iter = 300, double tol = 1e-9);

// Single-linkage agglomeration under d(u, v) = 1 - cos(u, v). Merge ties
// are broken by the smallest point-index pair.
ClusterResult agglomerative_cosine(const PointSet& ps, Index k);

// Contingency-table Adjusted Rand Index; 1.0 when the chance-adjusted
// denominator vanishes (both partitions degenerate the same way).
double ari(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b);

// Best frame agreement over injective cluster-to-truth assignments,
// exhaustive up to 10 labels per side and greedy beyond.
double matched_accuracy(const std::vector<std::int64_t>& pred,
                        const std::vector<std::int64_t>& truth);

const char* cluster_method_name(ClusterMethod method);

// point_index, pred_label, truth_label rows (truth column empty when
// absent).
void write_cluster_csv(const std::string& path, const ClusterResult& result,
                       const std::optional<std::vector<std::int64_t>>& truth);

// JSON document with method, k, inertia, seed and, when truth is given,
// ari and matched_accuracy.
std::string cluster_summary_json(const ClusterResult& result,
                                 const std::optional<std::vector<std::int64_t>>& truth);

}  // namespace seqembed
