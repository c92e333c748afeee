#pragma once

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pianoeval/midi.hpp"
#include "pianoeval/types.hpp"

namespace pianoeval {

/// Monotone alignment from (0, 0) to (m-1, n-1) with unit steps.
struct WarpPath {
  std::vector<std::pair<Index, Index>> pairs;

  std::size_t size() const { return pairs.size(); }
  /// True when the path starts at (0,0), ends at (m-1,n-1) and only takes
  /// (1,0), (0,1) or (1,1) steps.
  bool valid(Index m, Index n) const;
};

template <typename Scalar>
struct DtwResult {
  WarpPath path;
  Scalar cost = 0;
};

/// Inclusive column range [first, second] allowed in each row of the cost
/// matrix.
using SearchWindow = std::vector<std::pair<Index, Index>>;

inline SearchWindow full_window(Index m, Index n) {
  return SearchWindow(static_cast<std::size_t>(m), {Index{0}, n - 1});
}

/// DTW restricted to `window`; frames are matrix rows. Backtracking prefers
/// the diagonal step, then the step that advances only `a`.
template <typename DerivedA, typename DerivedB>
DtwResult<typename DerivedA::Scalar> dtw_windowed(const Eigen::MatrixBase<DerivedA>& a,
                                                  const Eigen::MatrixBase<DerivedB>& b,
                                                  const SearchWindow& window,
                                                  Metric metric = Metric::euclidean) {
  using Scalar = typename DerivedA::Scalar;
  const Index m = a.rows();
  const Index n = b.rows();
  if (m == 0 || n == 0) throw std::invalid_argument("dtw: sequences must be non-empty");
  if (a.cols() != b.cols()) throw std::invalid_argument("dtw: frame dimensions differ");
  if (static_cast<Index>(window.size()) != m) throw std::invalid_argument("dtw: window rows mismatch");
  constexpr Scalar inf = std::numeric_limits<Scalar>::infinity();

  std::vector<std::size_t> offset(static_cast<std::size_t>(m) + 1, 0);
  for (Index i = 0; i < m; ++i) {
    const auto [lo, hi] = window[static_cast<std::size_t>(i)];
    offset[static_cast<std::size_t>(i) + 1] =
        offset[static_cast<std::size_t>(i)] + static_cast<std::size_t>(std::max<Index>(0, hi - lo + 1));
  }
  std::vector<Scalar> acc(offset.back(), inf);

  auto at = [&](Index i, Index j) -> Scalar {
    if (i < 0 || j < 0) return inf;
    const auto [lo, hi] = window[static_cast<std::size_t>(i)];
    if (j < lo || j > hi) return inf;
    return acc[offset[static_cast<std::size_t>(i)] + static_cast<std::size_t>(j - lo)];
  };

  for (Index i = 0; i < m; ++i) {
    const auto [lo, hi] = window[static_cast<std::size_t>(i)];
    for (Index j = lo; j <= hi; ++j) {
      const Scalar d = distance(a.row(i), b.row(j), metric);
      Scalar prev;
      if (i == 0 && j == 0) {
        prev = 0;
      } else {
        prev = std::min({at(i - 1, j - 1), at(i - 1, j), at(i, j - 1)});
      }
      acc[offset[static_cast<std::size_t>(i)] + static_cast<std::size_t>(j - lo)] = prev + d;
    }
  }

  DtwResult<Scalar> out;
  out.cost = at(m - 1, n - 1);
  if (!(out.cost < inf)) throw std::runtime_error("dtw: search window does not connect the corners");

  Index i = m - 1, j = n - 1;
  out.path.pairs.emplace_back(i, j);
  while (i > 0 || j > 0) {
    const Scalar diag = at(i - 1, j - 1);
    const Scalar up = at(i - 1, j);
    const Scalar left = at(i, j - 1);
    if (diag <= up && diag <= left) {
      --i;
      --j;
    } else if (up <= left) {
      --i;
    } else {
      --j;
    }
    out.path.pairs.emplace_back(i, j);
  }
  std::reverse(out.path.pairs.begin(), out.path.pairs.end());
  return out;
}

template <typename DerivedA, typename DerivedB>
DtwResult<typename DerivedA::Scalar> dtw_exact(const Eigen::MatrixBase<DerivedA>& a,
                                               const Eigen::MatrixBase<DerivedB>& b,
                                               Metric metric = Metric::euclidean) {
  if (a.rows() == 0 || b.rows() == 0) throw std::invalid_argument("dtw: sequences must be non-empty");
  return dtw_windowed(a, b, full_window(a.rows(), b.rows()), metric);
}

/// Halves the number of frames by averaging adjacent pairs; an odd final
/// frame is kept as is.
template <typename Derived>
Matrix<typename Derived::Scalar> coarsen(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Index m = x.rows();
  Matrix<Scalar> out((m + 1) / 2, x.cols());
  for (Index k = 0; k < out.rows(); ++k) {
    if (2 * k + 1 < m) {
      out.row(k) = (x.row(2 * k) + x.row(2 * k + 1)) / Scalar(2);
    } else {
      out.row(k) = x.row(2 * k);
    }
  }
  return out;
}

/// Projects a path found on coarsened sequences onto an m x n matrix and
/// widens it by `radius` cells in every direction.
SearchWindow expand_window(const WarpPath& coarse, Index m, Index n, Index radius);

/// Recursive-coarsening approximate DTW. Sequences no longer than
/// radius + 2 frames are solved exactly.
template <typename DerivedA, typename DerivedB>
DtwResult<typename DerivedA::Scalar> fastdtw(const Eigen::MatrixBase<DerivedA>& a,
                                             const Eigen::MatrixBase<DerivedB>& b, Index radius,
                                             Metric metric = Metric::euclidean) {
  if (radius < 0) throw std::invalid_argument("fastdtw: radius must be non-negative");
  if (a.rows() == 0 || b.rows() == 0) throw std::invalid_argument("dtw: sequences must be non-empty");
  const Index min_size = radius + 2;
  if (a.rows() <= min_size || b.rows() <= min_size) return dtw_exact(a, b, metric);
  const auto ca = coarsen(a);
  const auto cb = coarsen(b);
  const auto low = fastdtw(ca, cb, radius, metric);
  return dtw_windowed(a, b, expand_window(low.path, a.rows(), b.rows(), radius), metric);
}

enum class AlignFeature { onset_count, pianoroll_column };

struct AlignConfig {
  Index radius = 10;
  double frame_rate = 20.0;
  AlignFeature feature = AlignFeature::onset_count;

  void validate() const;
};

/// Frames x 128 matrix describing the performance at `cfg.frame_rate`.
MatrixXd performance_frames(const Performance& perf, const AlignConfig& cfg);

/// Maps every onset and offset through the piecewise-linear time map implied
/// by `path` (perf frame i -> mean of the j frames paired with it).
Performance remap_performance(const Performance& perf, const WarpPath& path, double frame_rate);

struct AlignResult {
  Performance aligned;
  WarpPath path;
  double cost = 0.0;
};

/// Warps `est` onto the time axis of `ref`.
AlignResult align_performance(const Performance& ref, const Performance& est,
                              const AlignConfig& cfg = {});

}  // namespace pianoeval
