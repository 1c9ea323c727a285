// SPDX-License-Identifier: Apache-2.0
#include "clusterlab.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include "json.hpp"

#include "csvio.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace seqembed {

namespace {

void validate_points(const PointSet& ps, Index k, const char* op) {
  if (ps.points.rows() < 1)
    throw InvalidInput(std::string(op) + ": empty point set");
  if (!ps.points.allFinite())
    throw InvalidInput(std::string(op) + ": non-finite point");
  if (k < 1 || k > ps.points.rows())
    throw InvalidInput(std::string(op) + ": k must be in [1, point count]");
}

Index nearest_centroid(const Matrix& points, Index i, const Matrix& centroids) {
  Index best = 0;
  double best_d = (points.row(i) - centroids.row(0)).squaredNorm();
  for (Index c = 1; c < centroids.rows(); ++c) {
    const double d = (points.row(i) - centroids.row(c)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

// Sorted-label contingency counts shared by ari and matched_accuracy.
std::map<std::pair<std::int64_t, std::int64_t>, double> contingency(
    const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  std::map<std::pair<std::int64_t, std::int64_t>, double> counts;
  for (std::size_t i = 0; i < a.size(); ++i) counts[{a[i], b[i]}] += 1.0;
  return counts;
}

double comb2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

namespace {

ClusterResult kmeans_once(const Matrix& pts, Index k, Rng rng, Index max_iter,
                          double tol) {
  const Index p = pts.rows();

  // D^2 seeding.
  Matrix centroids(k, pts.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(p), false);
  Index first = rng.uniform_int(p);
  centroids.row(0) = pts.row(first);
  chosen[static_cast<std::size_t>(first)] = true;
  Vector d2(p);
  for (Index i = 0; i < p; ++i)
    d2(i) = (pts.row(i) - centroids.row(0)).squaredNorm();
  for (Index c = 1; c < k; ++c) {
    const double total = d2.sum();
    Index pick = -1;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double cum = 0.0;
      for (Index i = 0; i < p; ++i) {
        cum += d2(i);
        if (cum > r) {
          pick = i;
          break;
        }
      }
      if (pick < 0) pick = p - 1;  // rounding fell past the last mass
    } else {
      // All remaining mass is zero (duplicate points); take the first
      // unchosen index.
      for (Index i = 0; i < p; ++i)
        if (!chosen[static_cast<std::size_t>(i)]) {
          pick = i;
          break;
        }
      if (pick < 0) pick = 0;
    }
    centroids.row(c) = pts.row(pick);
    chosen[static_cast<std::size_t>(pick)] = true;
    for (Index i = 0; i < p; ++i)
      d2(i) = std::min(d2(i), (pts.row(i) - centroids.row(c)).squaredNorm());
  }

  // Lloyd iterations.
  std::vector<Index> labels(static_cast<std::size_t>(p), 0);
  for (Index iter = 0; iter < max_iter; ++iter) {
    for (Index i = 0; i < p; ++i)
      labels[static_cast<std::size_t>(i)] = nearest_centroid(pts, i, centroids);
    Matrix next = Matrix::Zero(k, pts.cols());
    std::vector<Index> sizes(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < p; ++i) {
      next.row(labels[static_cast<std::size_t>(i)]) += pts.row(i);
      ++sizes[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }
    double shift = 0.0;
    for (Index c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] == 0) {
        next.row(c) = centroids.row(c);  // keep an empty cluster in place
      } else {
        next.row(c) /= static_cast<double>(sizes[static_cast<std::size_t>(c)]);
      }
      shift = std::max(shift, (next.row(c) - centroids.row(c)).norm());
    }
    centroids = next;
    if (shift < tol) break;
  }

  ClusterResult out;
  out.k = k;
  out.method = ClusterMethod::kmeans_pp;
  out.labels.resize(static_cast<std::size_t>(p));
  double inertia = 0.0;
  std::vector<bool> used(static_cast<std::size_t>(k), false);
  for (Index i = 0; i < p; ++i) {
    const Index c = nearest_centroid(pts, i, centroids);
    out.labels[static_cast<std::size_t>(i)] = c;
    used[static_cast<std::size_t>(c)] = true;
    inertia += (pts.row(i) - centroids.row(c)).squaredNorm();
  }
  out.inertia = inertia;
  out.has_empty_cluster =
      std::find(used.begin(), used.end(), false) != used.end();
  return out;
}

}  // namespace

ClusterResult kmeans_pp(const PointSet& ps, Index k, std::uint64_t seed,
                        Index max_iter, double tol) {
  validate_points(ps, k, "kmeans_pp");
  if (max_iter < 0) throw InvalidInput("kmeans_pp: negative max_iter");

  // Lloyd only reaches a local optimum, so restart from independent seedings
  // and keep the lowest inertia; the first run wins exact ties.
  constexpr int kRestarts = 10;
  const Rng root(seed);
  ClusterResult best;
  for (int r = 0; r < kRestarts; ++r) {
    ClusterResult run = kmeans_once(ps.points, k, root.fork(static_cast<std::uint64_t>(r)),
                                    max_iter, tol);
    if (r == 0 || *run.inertia < *best.inertia) best = std::move(run);
  }
  best.seed = seed;
  return best;
}

ClusterResult agglomerative_cosine(const PointSet& ps, Index k) {
  validate_points(ps, k, "agglomerative_cosine");
  const Matrix& pts = ps.points;
  const Index p = pts.rows();
  Matrix unit(p, pts.cols());
  for (Index i = 0; i < p; ++i) {
    const double norm = pts.row(i).norm();
    if (norm == 0.0)
      throw InvalidInput("agglomerative_cosine: point " + std::to_string(i) +
                         " has zero norm");
    unit.row(i) = pts.row(i) / norm;
  }

  // Single linkage is the Kruskal process on the complete graph; sorting by
  // (distance, i, j) realizes the smallest-pair tie rule.
  struct Edge {
    double d;
    Index i, j;
  };
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(p) * static_cast<std::size_t>(p - 1) / 2);
  for (Index i = 0; i < p; ++i)
    for (Index j = i + 1; j < p; ++j)
      edges.push_back({1.0 - unit.row(i).dot(unit.row(j)), i, j});
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.d, a.i, a.j) < std::tie(b.d, b.i, b.j);
  });

  std::vector<Index> parent(static_cast<std::size_t>(p));
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&parent](Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  Index components = p;
  for (const Edge& e : edges) {
    if (components == k) break;
    const Index ri = find(e.i);
    const Index rj = find(e.j);
    if (ri == rj) continue;
    parent[static_cast<std::size_t>(std::max(ri, rj))] = std::min(ri, rj);
    --components;
  }

  ClusterResult out;
  out.k = k;
  out.method = ClusterMethod::agglomerative_single_cosine;
  out.labels.resize(static_cast<std::size_t>(p));
  std::map<Index, std::int64_t> dense;
  for (Index i = 0; i < p; ++i) {
    const Index root = find(i);
    const auto it = dense.find(root);
    if (it == dense.end()) {
      const std::int64_t id = static_cast<std::int64_t>(dense.size());
      dense.emplace(root, id);
      out.labels[static_cast<std::size_t>(i)] = id;
    } else {
      out.labels[static_cast<std::size_t>(i)] = it->second;
    }
  }
  return out;
}

double ari(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  if (a.size() != b.size()) throw InvalidInput("ari: length mismatch");
  if (a.size() < 2) throw InvalidInput("ari: need at least 2 points");
  const auto counts = contingency(a, b);
  std::map<std::int64_t, double> row_sum, col_sum;
  double index = 0.0;
  for (const auto& [key, count] : counts) {
    row_sum[key.first] += count;
    col_sum[key.second] += count;
    index += comb2(count);
  }
  double rows = 0.0, cols = 0.0;
  for (const auto& [label, count] : row_sum) rows += comb2(count);
  for (const auto& [label, count] : col_sum) cols += comb2(count);
  const double total = comb2(static_cast<double>(a.size()));
  const double expected = rows * cols / total;
  const double max_index = 0.5 * (rows + cols);
  const double denom = max_index - expected;
  if (denom == 0.0) return 1.0;
  return (index - expected) / denom;
}

double matched_accuracy(const std::vector<std::int64_t>& pred,
                        const std::vector<std::int64_t>& truth) {
  if (pred.size() != truth.size())
    throw InvalidInput("matched_accuracy: length mismatch");
  if (pred.empty()) throw InvalidInput("matched_accuracy: empty labels");

  // Dense confusion matrix over the distinct labels of each side.
  std::map<std::int64_t, Index> pred_ids, truth_ids;
  for (const auto label : pred)
    pred_ids.emplace(label, static_cast<Index>(pred_ids.size()));
  for (const auto label : truth)
    truth_ids.emplace(label, static_cast<Index>(truth_ids.size()));
  const Index r = static_cast<Index>(pred_ids.size());
  const Index s = static_cast<Index>(truth_ids.size());
  Matrix confusion = Matrix::Zero(r, s);
  for (std::size_t i = 0; i < pred.size(); ++i)
    confusion(pred_ids[pred[i]], truth_ids[truth[i]]) += 1.0;

  double best = 0.0;
  const Index m = std::max(r, s);
  if (m <= 10) {
    // Exhaustive injective assignment via permutations of the padded square.
    std::vector<Index> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), Index{0});
    do {
      double sum = 0.0;
      for (Index i = 0; i < r; ++i) {
        const Index j = perm[static_cast<std::size_t>(i)];
        if (j < s) sum += confusion(i, j);
      }
      best = std::max(best, sum);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    // Greedy: repeatedly take the largest unassigned cell.
    std::vector<bool> used_row(static_cast<std::size_t>(r), false);
    std::vector<bool> used_col(static_cast<std::size_t>(s), false);
    for (Index step = 0; step < std::min(r, s); ++step) {
      double top = -1.0;
      Index ti = -1, tj = -1;
      for (Index i = 0; i < r; ++i) {
        if (used_row[static_cast<std::size_t>(i)]) continue;
        for (Index j = 0; j < s; ++j) {
          if (used_col[static_cast<std::size_t>(j)]) continue;
          if (confusion(i, j) > top) {
            top = confusion(i, j);
            ti = i;
            tj = j;
          }
        }
      }
      used_row[static_cast<std::size_t>(ti)] = true;
      used_col[static_cast<std::size_t>(tj)] = true;
      best += top;
    }
  }
  return best / static_cast<double>(pred.size());
}

const char* cluster_method_name(ClusterMethod method) {
  switch (method) {
    case ClusterMethod::kmeans_pp: return "kmeans++";
    case ClusterMethod::agglomerative_single_cosine:
      return "agglomerative-single-cosine";
  }
  return "kmeans++";
}

void write_cluster_csv(const std::string& path, const ClusterResult& result,
                       const std::optional<std::vector<std::int64_t>>& truth) {
  if (truth && truth->size() != result.labels.size())
    throw InvalidInput("write_cluster_csv: truth length mismatch");
  std::vector<std::string> lines;
  lines.push_back("point_index,pred_label,truth_label");
  for (std::size_t i = 0; i < result.labels.size(); ++i) {
    std::string line = std::to_string(i);
    line += ',';
    line += std::to_string(result.labels[i]);
    line += ',';
    if (truth) line += std::to_string((*truth)[i]);
    lines.push_back(std::move(line));
  }
  write_lines_atomic(path, lines);
}

std::string cluster_summary_json(const ClusterResult& result,
                                 const std::optional<std::vector<std::int64_t>>& truth) {
  nlohmann::json doc;
  doc["method"] = cluster_method_name(result.method);
  doc["k"] = result.k;
  doc["inertia"] = result.inertia ? nlohmann::json(*result.inertia) : nlohmann::json(nullptr);
  doc["seed"] = result.seed ? nlohmann::json(*result.seed) : nlohmann::json(nullptr);
  doc["has_empty_cluster"] = result.has_empty_cluster;
  if (truth) {
    doc["ari"] = ari(result.labels, *truth);
    doc["matched_accuracy"] = matched_accuracy(result.labels, *truth);
  } else {
    doc["ari"] = nullptr;
    doc["matched_accuracy"] = nullptr;
  }
  return doc.dump();
}

}  // namespace seqembed
