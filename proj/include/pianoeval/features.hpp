#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Eigenvalues>

#include "pianoeval/midi.hpp"
#include "pianoeval/types.hpp"

namespace pianoeval {

inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "pitch_mean",        "pitch_std",        "vel_mean",          "vel_std",
    "dur_mean",          "dur_std",          "poly_mean",         "poly_std",
    "harm_mean",         "harm_std",         "onsetrate01_mean",  "onsetrate01_std",
    "onsetrate1_mean",   "onsetrate1_std",   "onsetrate10_mean",  "onsetrate10_std"};

inline constexpr std::array<double, 3> kOnsetRateWindows = {0.1, 1.0, 10.0};

using FeatureVector = Vector16;

/// Number of half-overlapping windows of size `window` over `span` seconds.
Index onset_window_count(double window, double span);

/// Onset counts per half-overlapping window of size `window` over [0, span).
std::vector<double> onset_counts(const Performance& perf, double window, double span);

/// Symbolic descriptors of one performance window, in kFeatureNames order.
/// Polyphony and harmony statistics are taken over the 5 ms pianoroll columns
/// holding at least one active note. All standard deviations are population.
FeatureVector extract_features(const Performance& window, double window_span = 20.0);

/// Per-column mean and population std. Std below 1e-9 is clamped to 1.
struct StandardizationParams {
  VectorXd mean;
  VectorXd std;

  Index dims() const { return mean.size(); }
  /// Identity transform (mean 0, std 1) over `dims` columns.
  static StandardizationParams identity(Index dims);
};

inline constexpr double kStdClamp = 1e-9;

template <typename Derived>
StandardizationParams fit_standardization(const Eigen::MatrixBase<Derived>& rows) {
  if (rows.rows() == 0) throw std::invalid_argument("cannot fit standardization on an empty corpus");
  StandardizationParams p;
  p.mean = rows.colwise().mean().transpose().template cast<double>();
  const MatrixXd centered = rows.template cast<double>().rowwise() - p.mean.transpose();
  p.std = (centered.array().square().colwise().sum() / static_cast<double>(rows.rows()))
              .sqrt()
              .transpose();
  for (Index i = 0; i < p.std.size(); ++i)
    if (p.std[i] < kStdClamp) p.std[i] = 1.0;
  return p;
}

StandardizationParams fit_standardization(const std::vector<FeatureVector>& corpus);

template <typename Derived>
VectorXd standardize(const Eigen::MatrixBase<Derived>& v, const StandardizationParams& p) {
  if (v.size() != p.dims())
    throw std::invalid_argument("standardize: vector has " + std::to_string(v.size()) +
                                " entries, parameters have " + std::to_string(p.dims()));
  return ((v.template cast<double>() - p.mean).array() / p.std.array()).matrix();
}

/// Row-wise standardization of an n x d matrix.
MatrixXd standardize_rows(const ConstMatRef& rows, const StandardizationParams& p);

template <typename Scalar>
struct PcaProjection {
  Matrix<Scalar> components;  // d_in x d_out, orthonormal columns
  Vector<Scalar> mean;        // d_in
  Vector<Scalar> explained_variance;
  Vector<Scalar> explained_variance_ratio;  // descending

  Index kept() const { return components.cols(); }

  template <typename Derived>
  Matrix<Scalar> transform(const Eigen::MatrixBase<Derived>& X) const {
    return (X.rowwise() - mean.transpose()) * components;
  }
  template <typename Derived>
  Matrix<Scalar> inverse_transform(const Eigen::MatrixBase<Derived>& Y) const {
    return (Y * components.transpose()).rowwise() + mean.transpose();
  }
};

template <typename Scalar>
struct PcaResult {
  PcaProjection<Scalar> projection;
  Matrix<Scalar> projected;
};

/// Covariance-eigendecomposition PCA. Keeps the smallest number of leading
/// components whose cumulative explained variance reaches the threshold.
/// Each component is signed so its largest-magnitude entry is positive.
template <typename Derived>
PcaResult<typename Derived::Scalar> pca(const Eigen::MatrixBase<Derived>& X,
                                         typename Derived::Scalar variance_threshold) {
  using Scalar = typename Derived::Scalar;
  const Index n = X.rows();
  const Index d = X.cols();
  if (n < 2) throw std::invalid_argument("pca needs at least two rows");
  if (!(variance_threshold > 0) || variance_threshold > 1)
    throw std::invalid_argument("pca variance threshold must lie in (0, 1]");

  PcaResult<Scalar> out;
  auto& proj = out.projection;
  proj.mean = X.colwise().mean().transpose();
  const Matrix<Scalar> centered = X.rowwise() - proj.mean.transpose();
  const Matrix<Scalar> cov = (centered.transpose() * centered) / static_cast<Scalar>(n - 1);

  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("pca: eigendecomposition failed");
  // Eigen returns ascending eigenvalues.
  const Vector<Scalar> values = eig.eigenvalues().reverse().cwiseMax(Scalar(0));
  const Matrix<Scalar> vectors = eig.eigenvectors().rowwise().reverse();
  const Scalar total = values.sum();
  if (!(total > 0)) throw std::invalid_argument("pca: data has zero variance");

  // Components with negligible variance never count toward the threshold.
  const Scalar negligible = total * Scalar(1e-12);
  Index keep = 0;
  Scalar cumulative = 0;
  while (keep < d && values[keep] > negligible) {
    cumulative += values[keep];
    ++keep;
    if (cumulative / total >= variance_threshold - Scalar(1e-12)) break;
  }

  proj.components = vectors.leftCols(keep);
  for (Index k = 0; k < keep; ++k) {
    Index arg = 0;
    proj.components.col(k).cwiseAbs().maxCoeff(&arg);
    if (proj.components(arg, k) < 0) proj.components.col(k) *= Scalar(-1);
  }
  proj.explained_variance = values.head(keep);
  proj.explained_variance_ratio = proj.explained_variance / total;
  out.projected = centered * proj.components;
  return out;
}

/// Per-row sum of distances to every row.
template <typename Derived>
Vector<typename Derived::Scalar> medoid_costs(const Eigen::MatrixBase<Derived>& X,
                                              Metric metric = Metric::euclidean) {
  using Scalar = typename Derived::Scalar;
  const Index n = X.rows();
  Vector<Scalar> cost = Vector<Scalar>::Zero(n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const Scalar dist = distance(X.row(i), X.row(j), metric);
      cost[i] += dist;
      cost[j] += dist;
    }
  return cost;
}

/// Row indices ordered by medoid cost, ties by lowest index.
template <typename Derived>
std::vector<Index> medoid_ranking(const Eigen::MatrixBase<Derived>& X,
                                  Metric metric = Metric::euclidean) {
  const auto cost = medoid_costs(X, metric);
  std::vector<Index> order(static_cast<std::size_t>(X.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return cost[a] < cost[b]; });
  return order;
}

template <typename Derived>
Index medoid(const Eigen::MatrixBase<Derived>& X, Metric metric = Metric::euclidean) {
  if (X.rows() < 1) throw std::invalid_argument("medoid of an empty set");
  return medoid_ranking(X, metric).front();
}

}  // namespace pianoeval
