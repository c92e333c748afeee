#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pianoeval/features.hpp"
#include "pianoeval/types.hpp"

namespace pianoeval {

/// How one point is chosen inside each Ward cluster.
///   A          farthest from the centroid of every other row
///   A_outside  farthest from the centroid of the rows outside its cluster
///   B          maximizes the min distance to the other clusters' centroids
///   C          maximizes the min distance to points of other clusters
///   D          maximizes the min distance to every other point
enum class DispersionMethod { A, A_outside, B, C, D };

std::string_view to_string(DispersionMethod m);
std::optional<DispersionMethod> parse_method(std::string_view s);
std::string_view to_string(Metric m);
std::optional<Metric> parse_metric(std::string_view s);

struct WardMerge {
  Index cluster_i;  // lowest member index of the surviving cluster
  Index cluster_j;  // lowest member index of the absorbed cluster, > cluster_i
  double cost;      // increase of within-cluster sum of squares
};

struct ClusterLabels {
  VectorXi labels;  // in [0, p), numbered by lowest member index
  std::vector<WardMerge> merges;

  int clusters() const { return labels.size() ? labels.maxCoeff() + 1 : 0; }
};

/// Agglomerative Ward clustering through the Lance-Williams recurrence, cut
/// at `p` clusters. Merge ties go to the lowest (i, j) pair.
template <typename Derived>
ClusterLabels ward_cluster(const Eigen::MatrixBase<Derived>& X, Index p) {
  using Scalar = typename Derived::Scalar;
  const Index n = X.rows();
  if (p < 1 || p > n)
    throw std::invalid_argument("ward_cluster: p must lie in [1, " + std::to_string(n) + "]");

  // Ward cost of merging two singletons is half their squared distance.
  Matrix<Scalar> cost(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j)
      cost(i, j) = cost(j, i) = Scalar(0.5) * (X.row(i) - X.row(j)).squaredNorm();

  std::vector<Index> size(static_cast<std::size_t>(n), 1);
  std::vector<bool> active(static_cast<std::size_t>(n), true);
  std::vector<Index> parent(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = i;

  ClusterLabels out;
  for (Index step = 0; step < n - p; ++step) {
    Index bi = -1, bj = -1;
    Scalar best = std::numeric_limits<Scalar>::infinity();
    for (Index i = 0; i < n; ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      for (Index j = i + 1; j < n; ++j) {
        if (!active[static_cast<std::size_t>(j)]) continue;
        if (cost(i, j) < best || bi < 0) {
          best = cost(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    const auto ni = static_cast<Scalar>(size[static_cast<std::size_t>(bi)]);
    const auto nj = static_cast<Scalar>(size[static_cast<std::size_t>(bj)]);
    for (Index k = 0; k < n; ++k) {
      if (!active[static_cast<std::size_t>(k)] || k == bi || k == bj) continue;
      const auto nk = static_cast<Scalar>(size[static_cast<std::size_t>(k)]);
      const Scalar merged =
          ((ni + nk) * cost(bi, k) + (nj + nk) * cost(bj, k) - nk * best) / (ni + nj + nk);
      cost(bi, k) = cost(k, bi) = merged;
    }
    size[static_cast<std::size_t>(bi)] += size[static_cast<std::size_t>(bj)];
    active[static_cast<std::size_t>(bj)] = false;
    parent[static_cast<std::size_t>(bj)] = bi;
    out.merges.push_back({bi, bj, static_cast<double>(best)});
  }

  auto root = [&](Index i) {
    while (parent[static_cast<std::size_t>(i)] != i) i = parent[static_cast<std::size_t>(i)];
    return i;
  };
  out.labels.resize(n);
  std::vector<int> label_of_root(static_cast<std::size_t>(n), -1);
  int next = 0;
  for (Index i = 0; i < n; ++i) {
    auto& l = label_of_root[static_cast<std::size_t>(root(i))];
    if (l < 0) l = next++;
    out.labels[i] = l;
  }
  return out;
}

template <typename Scalar>
struct SelectionResult {
  std::vector<Index> indices;
  /// Minimum pairwise distance among `indices`; infinity for fewer than two.
  Scalar min_pairwise = std::numeric_limits<Scalar>::infinity();
};

template <typename Derived>
typename Derived::Scalar min_pairwise_distance(const Eigen::MatrixBase<Derived>& X,
                                               const std::vector<Index>& indices,
                                               Metric metric = Metric::euclidean) {
  using Scalar = typename Derived::Scalar;
  if (indices.size() < 2) throw std::invalid_argument("min_pairwise_distance needs at least two indices");
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (std::size_t a = 0; a < indices.size(); ++a)
    for (std::size_t b = a + 1; b < indices.size(); ++b)
      best = std::min(best, distance(X.row(indices[a]), X.row(indices[b]), metric));
  return best;
}

template <typename Derived>
SelectionResult<typename Derived::Scalar> make_selection(const Eigen::MatrixBase<Derived>& X,
                                                         std::vector<Index> indices,
                                                         Metric metric) {
  SelectionResult<typename Derived::Scalar> r;
  r.indices = std::move(indices);
  if (r.indices.size() >= 2) r.min_pairwise = min_pairwise_distance(X, r.indices, metric);
  return r;
}

/// Score of every row under a selection criterion; the pick of a cluster is
/// its highest-scoring member.
template <typename Derived>
Vector<typename Derived::Scalar> dispersion_scores(const Eigen::MatrixBase<Derived>& X,
                                                   const ClusterLabels& labels,
                                                   DispersionMethod method,
                                                   Metric metric = Metric::euclidean) {
  using Scalar = typename Derived::Scalar;
  const Index n = X.rows();
  const int p = labels.clusters();
  if (labels.labels.size() != n) throw std::invalid_argument("labels do not cover every row");
  constexpr Scalar inf = std::numeric_limits<Scalar>::infinity();

  Matrix<Scalar> centroids = Matrix<Scalar>::Zero(p, X.cols());
  Vector<Scalar> counts = Vector<Scalar>::Zero(p);
  for (Index i = 0; i < n; ++i) {
    centroids.row(labels.labels[i]) += X.row(i);
    counts[labels.labels[i]] += 1;
  }
  const RowVector<Scalar> total = centroids.colwise().sum();
  for (int c = 0; c < p; ++c) centroids.row(c) /= counts[c];

  Vector<Scalar> score(n);
  for (Index i = 0; i < n; ++i) {
    const int own = labels.labels[i];
    switch (method) {
      case DispersionMethod::A:
      case DispersionMethod::A_outside: {
        const bool outside = method == DispersionMethod::A_outside && counts[own] < n;
        if (outside) {
          const RowVector<Scalar> sum = total - centroids.row(own) * counts[own];
          score[i] = distance(X.row(i), sum / (Scalar(n) - counts[own]), metric);
        } else if (n > 1) {
          score[i] = distance(X.row(i), (total - X.row(i)) / Scalar(n - 1), metric);
        } else {
          score[i] = 0;
        }
        break;
      }
      case DispersionMethod::B: {
        Scalar m = inf;
        for (int c = 0; c < p; ++c)
          if (c != own) m = std::min(m, distance(X.row(i), centroids.row(c), metric));
        score[i] = m;
        break;
      }
      case DispersionMethod::C:
      case DispersionMethod::D: {
        Scalar m = inf;
        for (Index j = 0; j < n; ++j) {
          if (j == i) continue;
          if (method == DispersionMethod::C && labels.labels[j] == own) continue;
          m = std::min(m, distance(X.row(i), X.row(j), metric));
        }
        score[i] = m;
        break;
      }
    }
  }
  return score;
}

/// One row per cluster, ordered by cluster label. Ties go to the lowest index.
template <typename Derived>
SelectionResult<typename Derived::Scalar> select_dispersed(const Eigen::MatrixBase<Derived>& X,
                                                           const ClusterLabels& labels,
                                                           DispersionMethod method,
                                                           Metric metric = Metric::euclidean) {
  const auto score = dispersion_scores(X, labels, method, metric);
  const int p = labels.clusters();
  std::vector<Index> pick(static_cast<std::size_t>(p), -1);
  for (Index i = 0; i < X.rows(); ++i) {
    auto& best = pick[static_cast<std::size_t>(labels.labels[i])];
    if (best < 0 || score[i] > score[best]) best = i;
  }
  return make_selection(X, std::move(pick), metric);
}

/// Number of p-subsets of n items, saturating at infinity.
double subset_count(Index n, Index p);

inline constexpr double kExactSubsetLimit = 1e6;

/// Exhaustive max-min dispersion with incumbent pruning. Ties go to the
/// lexicographically smallest index set.
template <typename Derived>
SelectionResult<typename Derived::Scalar> exact_pdispersion(const Eigen::MatrixBase<Derived>& X,
                                                            Index p,
                                                            Metric metric = Metric::euclidean,
                                                            double max_subsets = kExactSubsetLimit) {
  using Scalar = typename Derived::Scalar;
  const Index n = X.rows();
  if (p < 1 || p > n) throw std::invalid_argument("exact_pdispersion: p must lie in [1, n]");
  if (subset_count(n, p) > max_subsets)
    throw std::invalid_argument("exact_pdispersion: C(" + std::to_string(n) + ", " +
                                std::to_string(p) +
                                ") subsets exceed the exhaustive-search limit; use a heuristic method");

  Matrix<Scalar> dist(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) dist(i, j) = dist(j, i) = distance(X.row(i), X.row(j), metric);

  std::vector<Index> chosen, best;
  Scalar best_min = -std::numeric_limits<Scalar>::infinity();
  bool found = false;

  auto search = [&](auto&& self, Index start, Scalar running) -> void {
    const auto depth = static_cast<Index>(chosen.size());
    if (depth == p) {
      if (!found || running > best_min) {
        best_min = running;
        best = chosen;
        found = true;
      }
      return;
    }
    for (Index i = start; i <= n - (p - depth); ++i) {
      Scalar m = running;
      for (Index c : chosen) m = std::min(m, dist(c, i));
      if (found && m <= best_min) continue;
      chosen.push_back(i);
      self(self, i + 1, m);
      chosen.pop_back();
    }
  };
  search(search, 0, std::numeric_limits<Scalar>::infinity());

  SelectionResult<Scalar> r;
  r.indices = best;
  r.min_pairwise = best_min;
  return r;
}

/// Most distant pair of rows; ties go to the lexicographically smallest pair.
template <typename Derived>
std::pair<Index, Index> farthest_pair(const Eigen::MatrixBase<Derived>& X,
                                      Metric metric = Metric::euclidean) {
  using Scalar = typename Derived::Scalar;
  if (X.rows() < 2) throw std::invalid_argument("farthest_pair needs at least two rows");
  std::pair<Index, Index> best{0, 1};
  Scalar best_dist = -1;
  for (Index i = 0; i < X.rows(); ++i)
    for (Index j = i + 1; j < X.rows(); ++j) {
      const Scalar d = distance(X.row(i), X.row(j), metric);
      if (d > best_dist) {
        best_dist = d;
        best = {i, j};
      }
    }
  return best;
}

struct SelectionConfig {
  Index p = 4;
  Metric metric = Metric::euclidean;
  DispersionMethod method = DispersionMethod::A;
  bool add_medoid = false;
  double pca_variance = 0.92;
};

struct PipelineResult {
  SelectionResult<double> selection;  // dispersed picks, then the medoid if requested
  std::optional<Index> medoid;
  Index pca_components_kept = 0;
  ClusterLabels clusters;
  MatrixXd embedded;  // standardized, PCA-projected rows
};

/// Standardize columns, project with PCA, cluster, pick one row per cluster
/// and optionally append the medoid of the projected data. A medoid that is
/// already picked yields to the next-lowest-cost row.
PipelineResult selection_pipeline(const ConstMatRef& features, const SelectionConfig& cfg);

}  // namespace pianoeval
