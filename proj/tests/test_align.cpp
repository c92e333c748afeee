#include "doctest.h"

#include <set>

#include "pianoeval/align.hpp"
#include "test_support.hpp"

using namespace pianoeval;
using namespace testing;

namespace {

// Plain O(mn) DTW cost with a dense table.
double oracle_dtw_cost(const MatrixXd& a, const MatrixXd& b) {
  const Index m = a.rows(), n = b.rows();
  const double inf = std::numeric_limits<double>::infinity();
  MatrixXd D = MatrixXd::Constant(m + 1, n + 1, inf);
  D(0, 0) = 0.0;
  for (Index i = 1; i <= m; ++i)
    for (Index j = 1; j <= n; ++j)
      D(i, j) = (a.row(i - 1) - b.row(j - 1)).norm() + std::min({D(i - 1, j - 1), D(i - 1, j), D(i, j - 1)});
  return D(m, n);
}

double path_cost(const MatrixXd& a, const MatrixXd& b, const WarpPath& p) {
  double s = 0.0;
  for (const auto& [i, j] : p.pairs) s += (a.row(i) - b.row(j)).norm();
  return s;
}

}  // namespace

TEST_CASE("exact DTW basics") {
  std::mt19937_64 rng(1);
  const MatrixXd a = random_matrix(rng, 15, 3);
  const auto self = dtw_exact(a, a);
  CHECK(self.cost == 0.0);
  REQUIRE(self.path.size() == 15);
  for (Index k = 0; k < 15; ++k) CHECK(self.path.pairs[static_cast<std::size_t>(k)] == std::pair<Index, Index>{k, k});

  MatrixXd x(1, 2), y(1, 2);
  x << 0, 0;
  y << 3, 4;
  const auto single = dtw_exact(x, y);
  CHECK(single.cost == 5.0);
  CHECK(single.path.pairs == std::vector<std::pair<Index, Index>>{{0, 0}});

  CHECK_THROWS_AS(dtw_exact(MatrixXd(0, 2), y), std::invalid_argument);
}

TEST_CASE("exact DTW matches the dense oracle and is symmetric") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const MatrixXd a = random_matrix(rng, 1 + trial % 17, 2);
    const MatrixXd b = random_matrix(rng, 1 + (trial * 5) % 23, 2);
    const auto ab = dtw_exact(a, b);
    CHECK(ab.path.valid(a.rows(), b.rows()));
    CHECK(ab.cost == doctest::Approx(oracle_dtw_cost(a, b)).epsilon(1e-12));
    CHECK(ab.cost == doctest::Approx(path_cost(a, b, ab.path)).epsilon(1e-12));
    CHECK(dtw_exact(b, a).cost == doctest::Approx(ab.cost).epsilon(1e-12));
  }
}

TEST_CASE("coarsen averages pairs and keeps an odd tail") {
  MatrixXd x(5, 1);
  x << 1, 3, 5, 7, 9;
  const MatrixXd c = coarsen(x);
  REQUIRE(c.rows() == 3);
  CHECK(c(0, 0) == 2.0);
  CHECK(c(1, 0) == 6.0);
  CHECK(c(2, 0) == 9.0);
}

TEST_CASE("fastdtw equals exact DTW when the radius covers the matrix") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const MatrixXd a = random_walk(rng, 5 + trial * 3, 2);
    const MatrixXd b = random_walk(rng, 7 + trial * 2, 2);
    const Index radius = std::max(a.rows(), b.rows());
    const auto fast = fastdtw(a, b, radius);
    const auto exact = dtw_exact(a, b);
    CHECK(fast.cost == exact.cost);
    CHECK(fast.path.pairs == exact.path.pairs);
  }
}

TEST_CASE("fastdtw of a sequence with itself costs zero") {
  std::mt19937_64 rng(4);
  const MatrixXd a = random_walk(rng, 150, 3);
  for (Index r : {0, 1, 2, 5, 20}) CHECK(fastdtw(a, a, r).cost == 0.0);
}

TEST_CASE("fastdtw never undercuts exact DTW") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len(2, 200);
  std::vector<double> overshoot;
  int below = 0, invalid = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const MatrixXd a = random_walk(rng, len(rng), 2);
    const MatrixXd b = random_walk(rng, len(rng), 2);
    const auto fast = fastdtw(a, b, 1);
    const double exact = oracle_dtw_cost(a, b);
    if (fast.cost < exact * (1 - 1e-12)) ++below;
    if (!fast.path.valid(a.rows(), b.rows())) ++invalid;
    overshoot.push_back(fast.cost / exact);
  }
  std::sort(overshoot.begin(), overshoot.end());
  const double median = overshoot[overshoot.size() / 2];
  MESSAGE("radius-1 overshoot ratio: median " << median << ", p90 " << overshoot[450] << ", max "
                                             << overshoot.back());
  CHECK(below == 0);
  CHECK(invalid == 0);
  CHECK(median < 1.2);
}

TEST_CASE("expand_window covers the projected path") {
  WarpPath coarse{{{0, 0}, {1, 1}, {2, 1}}};
  const auto w = expand_window(coarse, 6, 4, 0);
  REQUIRE(w.size() == 6);
  CHECK(w[0] == std::pair<Index, Index>{0, 1});
  CHECK(w[2] == std::pair<Index, Index>{2, 3});
  CHECK(w[5] == std::pair<Index, Index>{2, 3});
  // Radius 1 at fine resolution: row 0 sees rows 0..1, columns 0..1, widened by one.
  const auto wide = expand_window(coarse, 6, 4, 1);
  CHECK(wide[0] == std::pair<Index, Index>{0, 2});
  CHECK(wide[1] == std::pair<Index, Index>{0, 3});
}

TEST_CASE("warp path validity") {
  CHECK(WarpPath{{{0, 0}, {1, 1}, {1, 2}}}.valid(2, 3));
  CHECK_FALSE(WarpPath{{{0, 0}, {2, 2}}}.valid(3, 3));
  CHECK_FALSE(WarpPath{{{0, 0}, {1, 0}, {0, 1}}}.valid(1, 2));
  CHECK_FALSE(WarpPath{{{0, 1}, {1, 1}}}.valid(2, 2));
}

TEST_CASE("remap through the identity path") {
  std::mt19937_64 rng(6);
  const Performance perf = random_performance(rng, 40, 10.0);
  const AlignConfig cfg;
  const Index frames = performance_frames(perf, cfg).rows();
  WarpPath id;
  for (Index k = 0; k < frames; ++k) id.pairs.emplace_back(k, k);
  const Performance out = remap_performance(perf, id, cfg.frame_rate);
  REQUIRE(out.size() == perf.size());
  for (std::size_t k = 0; k < perf.size(); ++k) {
    CHECK(out[k].pitch == perf[k].pitch);
    CHECK(out[k].velocity == perf[k].velocity);
    CHECK(out[k].onset == doctest::Approx(perf[k].onset).epsilon(1e-12));
    CHECK(out[k].offset == doctest::Approx(perf[k].offset).epsilon(1e-12));
  }
}

TEST_CASE("remap through a uniform 2x stretch doubles every time") {
  std::mt19937_64 rng(7);
  const Performance perf = random_performance(rng, 30, 5.0);
  const double fr = 20.0;
  // One extra source frame so offsets at the very end stay inside the path.
  const Index m = static_cast<Index>(std::floor(perf.end_time() * fr)) + 2;
  WarpPath stretch;
  for (Index i = 0; i < m; ++i) {
    if (i) stretch.pairs.emplace_back(i, 2 * i - 1);
    stretch.pairs.emplace_back(i, 2 * i);
  }
  REQUIRE(stretch.valid(m, 2 * m - 1));
  const Performance out = remap_performance(perf, stretch, fr);
  REQUIRE(out.size() == perf.size());
  for (std::size_t k = 0; k < perf.size(); ++k) {
    CHECK(std::abs(out[k].onset - 2 * perf[k].onset) <= 1.0 / fr);
    CHECK(std::abs(out[k].offset - 2 * perf[k].offset) <= 1.0 / fr);
  }
}

TEST_CASE("remap keeps onsets monotone, fields intact, and clamps past the end") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Performance perf = random_performance(rng, 50, 8.0);
    const MatrixXd a = random_walk(rng, 100, 1);
    const MatrixXd b = random_walk(rng, 90, 1);
    const auto path = dtw_exact(a, b).path;
    const Performance out = remap_performance(perf, path, 10.0);
    REQUIRE(out.size() == perf.size());
    // Notes mapped one at a time, in input onset order, stay in order.
    double prev = -1.0;
    for (const auto& n : perf) {
      const double t = remap_performance(Performance({n}), path, 10.0)[0].onset;
      CHECK(t >= prev);
      prev = t;
    }
    std::multiset<std::pair<int, int>> in_fields, out_fields;
    for (const auto& n : perf) in_fields.insert({n.pitch, n.velocity});
    for (const auto& n : out) {
      out_fields.insert({n.pitch, n.velocity});
      CHECK(n.offset > n.onset);
      CHECK(n.onset <= 89.0 / 10.0 + 1e-12);
    }
    CHECK(in_fields == out_fields);
  }
}

TEST_CASE("remap gives collapsed notes one frame of length") {
  // Every source frame maps to target frame 0.
  WarpPath flat{{{0, 0}, {1, 0}, {2, 0}}};
  const Performance out = remap_performance(Performance({{60, 0.0, 0.1, 70}}), flat, 10.0);
  CHECK(out[0].onset == 0.0);
  CHECK(out[0].offset == doctest::Approx(0.1));
}

TEST_CASE("performance frames") {
  const Performance perf({{60, 0.0, 0.5, 127}, {64, 0.0, 0.2, 64}, {60, 0.5, 1.0, 32}});
  AlignConfig cfg;
  const MatrixXd onsets = performance_frames(perf, cfg);
  CHECK(onsets.rows() == 21);
  CHECK(onsets.cols() == 128);
  CHECK(onsets(0, 60) == 1.0);
  CHECK(onsets(0, 64) == 1.0);
  CHECK(onsets(10, 60) == 1.0);
  CHECK(onsets.sum() == 3.0);

  cfg.feature = AlignFeature::pianoroll_column;
  const MatrixXd roll = performance_frames(perf, cfg);
  CHECK(roll(0, 60) == 1.0);
  CHECK(roll(9, 60) == 1.0);
  CHECK(roll(10, 60) == doctest::Approx(32.0 / 127.0));
  CHECK(roll(3, 64) == doctest::Approx(64.0 / 127.0));
  CHECK(roll(4, 64) == 0.0);

  cfg.frame_rate = 0.0;
  CHECK_THROWS_AS(performance_frames(perf, cfg), std::invalid_argument);
}

TEST_CASE("aligning a time-stretched copy recovers the reference timing") {
  std::vector<Note> ref_notes, est_notes;
  for (int k = 0; k < 40; ++k) {
    const double t = 0.5 * k;
    ref_notes.push_back({48 + (k * 7) % 36, t, t + 0.3, 80});
    est_notes.push_back({48 + (k * 7) % 36, 1.25 * t, 1.25 * (t + 0.3), 80});
  }
  const Performance ref(ref_notes), est(est_notes);
  const AlignResult r = align_performance(ref, est);
  REQUIRE(r.aligned.size() == ref.size());
  for (std::size_t k = 0; k < ref.size(); ++k) CHECK(std::abs(r.aligned[k].onset - ref[k].onset) <= 0.1);
}
