#include "doctest.h"

#include <map>
#include <numeric>
#include <set>

#include "pianoeval/dispersion.hpp"
#include "test_support.hpp"

using namespace pianoeval;
using namespace testing;

namespace {

constexpr DispersionMethod kAllMethods[] = {DispersionMethod::A, DispersionMethod::A_outside,
                                            DispersionMethod::B, DispersionMethod::C,
                                            DispersionMethod::D};

MatrixXd column(std::initializer_list<double> v) {
  MatrixXd X(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) X(i++, 0) = x;
  return X;
}

double euclid(const MatrixXd& X, Index i, Index j) {
  return std::sqrt((X.row(i) - X.row(j)).array().square().sum());
}

Eigen::RowVectorXd mean_of(const MatrixXd& X, const std::function<bool(Index)>& take) {
  Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(X.cols());
  int k = 0;
  for (Index i = 0; i < X.rows(); ++i)
    if (take(i)) {
      s += X.row(i);
      ++k;
    }
  return s / k;
}

// Each criterion written from its definition, without the library's
// centroid bookkeeping.
double criterion(const MatrixXd& X, const VectorXi& lab, Index i, DispersionMethod m) {
  const Index n = X.rows();
  switch (m) {
    case DispersionMethod::A:
      return (X.row(i) - mean_of(X, [&](Index j) { return j != i; })).norm();
    case DispersionMethod::A_outside:
      return (X.row(i) - mean_of(X, [&](Index j) { return lab[j] != lab[i]; })).norm();
    case DispersionMethod::B: {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c <= lab.maxCoeff(); ++c)
        if (c != lab[i]) best = std::min(best, (X.row(i) - mean_of(X, [&](Index j) { return lab[j] == c; })).norm());
      return best;
    }
    case DispersionMethod::C:
    case DispersionMethod::D: {
      double best = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < n; ++j)
        if (j != i && (m == DispersionMethod::D || lab[j] != lab[i])) best = std::min(best, euclid(X, i, j));
      return best;
    }
  }
  return 0;
}

MatrixXd four_clusters(std::mt19937_64& rng, Index per_cluster, bool with_center = false) {
  const double centers[4][2] = {{-10, -10}, {-10, 10}, {10, -10}, {10, 10}};
  std::normal_distribution<double> jitter(0.0, 0.3);
  MatrixXd X(4 * per_cluster + (with_center ? 1 : 0), 2);
  for (Index c = 0; c < 4; ++c)
    for (Index k = 0; k < per_cluster; ++k) {
      X(c * per_cluster + k, 0) = centers[c][0] + jitter(rng);
      X(c * per_cluster + k, 1) = centers[c][1] + jitter(rng);
    }
  if (with_center) X.row(X.rows() - 1) << 0.01, -0.02;
  return X;
}

std::vector<Index> random_subset(std::mt19937_64& rng, Index n, Index p) {
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(p));
  return all;
}

}  // namespace

TEST_CASE("ward separates two distant groups") {
  MatrixXd X(6, 1);
  X << 0.0, 0.1, 0.2, 50.0, 50.1, 50.3;
  const auto c = ward_cluster(X, 2);
  CHECK(c.labels == (VectorXi(6) << 0, 0, 0, 1, 1, 1).finished());
  CHECK(c.clusters() == 2);
}

TEST_CASE("ward with p = n leaves singletons") {
  std::mt19937_64 rng(1);
  const auto c = ward_cluster(random_matrix(rng, 7, 3), 7);
  for (Index i = 0; i < 7; ++i) CHECK(c.labels[i] == i);
  CHECK(c.merges.empty());
  CHECK_THROWS_AS(ward_cluster(random_matrix(rng, 3, 2), 4), std::invalid_argument);
  CHECK_THROWS_AS(ward_cluster(random_matrix(rng, 3, 2), 0), std::invalid_argument);
}

TEST_CASE("ward merge sequence matches the naive oracle") {
  std::mt19937_64 rng(400);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 2 + trial % 9;
    const MatrixXd X = random_matrix(rng, n, 1 + trial % 4);
    const auto fast = ward_cluster(X, 1);
    const auto naive = naive_ward(X);
    REQUIRE(fast.merges.size() == naive.size());
    for (std::size_t k = 0; k < naive.size(); ++k) {
      CHECK(fast.merges[k].cluster_i == naive[k].i);
      CHECK(fast.merges[k].cluster_j == naive[k].j);
      CHECK(fast.merges[k].cost == doctest::Approx(naive[k].cost).epsilon(1e-9));
      if (k) CHECK(fast.merges[k].cost >= fast.merges[k - 1].cost - 1e-12);
    }
  }
}

TEST_CASE("ward labels are numbered by lowest member") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const MatrixXd X = random_matrix(rng, 12, 2);
    const auto c = ward_cluster(X, 1 + trial % 6);
    int next = 0;
    for (Index i = 0; i < 12; ++i) {
      CHECK(c.labels[i] <= next);
      if (c.labels[i] == next) ++next;
    }
    CHECK(next == 1 + trial % 6);
  }
}

TEST_CASE("every method picks the criterion argmax in each of four clusters") {
  std::mt19937_64 rng(4);
  const MatrixXd X = four_clusters(rng, 6);
  const auto labels = ward_cluster(X, 4);
  for (Index c = 0; c < 4; ++c)
    for (Index k = 0; k < 6; ++k) CHECK(labels.labels[c * 6 + k] == c);

  for (auto m : kAllMethods) {
    CAPTURE(to_string(m));
    const auto sel = select_dispersed(X, labels, m);
    REQUIRE(sel.indices.size() == 4);
    for (int c = 0; c < 4; ++c) {
      const Index pick = sel.indices[static_cast<std::size_t>(c)];
      CHECK(labels.labels[pick] == c);
      for (Index j = 0; j < X.rows(); ++j)
        if (labels.labels[j] == c) {
          const double cj = criterion(X, labels.labels, j, m);
          const double cp = criterion(X, labels.labels, pick, m);
          CHECK(cj <= cp + 1e-12);
          if (j < pick) CHECK(cj < cp - 1e-12);
        }
    }
    const auto scores = dispersion_scores(X, labels, m);
    for (Index j = 0; j < X.rows(); ++j)
      CHECK(scores[j] == doctest::Approx(criterion(X, labels.labels, j, m)).epsilon(1e-12));
  }
}

TEST_CASE("method D on a single cluster") {
  const MatrixXd X = column({0, 1, 2, 10});
  const auto labels = ward_cluster(X, 1);
  CHECK(select_dispersed(X, labels, DispersionMethod::D).indices == std::vector<Index>{3});
}

TEST_CASE("singleton clusters force the selection") {
  std::mt19937_64 rng(6);
  const MatrixXd X = random_matrix(rng, 5, 3);
  const auto labels = ward_cluster(X, 5);
  for (auto m : kAllMethods) {
    const auto sel = select_dispersed(X, labels, m);
    CHECK(sel.indices == std::vector<Index>{0, 1, 2, 3, 4});
  }
}

TEST_CASE("exact p-dispersion hand cases") {
  const MatrixXd line = column({0, 1, 2, 3, 4});
  auto r = exact_pdispersion(line, 2);
  CHECK(r.indices == std::vector<Index>{0, 4});
  CHECK(r.min_pairwise == 4.0);
  r = exact_pdispersion(line, 3);
  CHECK(r.indices == std::vector<Index>{0, 2, 4});
  CHECK(r.min_pairwise == 2.0);

  MatrixXd square(4, 2);
  square << 0, 0, 0, 1, 1, 0, 1, 1;
  r = exact_pdispersion(square, 4);
  CHECK(r.indices == std::vector<Index>{0, 1, 2, 3});
  CHECK(r.min_pairwise == 1.0);

  CHECK_THROWS_WITH_AS(exact_pdispersion(MatrixXd::Zero(100, 2), 10), doctest::Contains("heuristic"),
                       std::invalid_argument);
}

TEST_CASE("min_pairwise_distance") {
  MatrixXd two(2, 2);
  two << 0, 0, 3, 0;
  CHECK(min_pairwise_distance(two, {0, 1}) == 3.0);
  CHECK(min_pairwise_distance(two, {0, 1}, Metric::manhattan) == 3.0);
  CHECK(min_pairwise_distance(column({1, 5, 1}), {0, 1, 2}) == 0.0);
  CHECK_THROWS_AS(min_pairwise_distance(two, {0}), std::invalid_argument);

  std::mt19937_64 rng(10);
  const MatrixXd X = random_matrix(rng, 40, 5);
  const auto idx = random_subset(rng, 40, 10);
  double direct = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b) direct = std::min(direct, euclid(X, idx[a], idx[b]));
  CHECK(min_pairwise_distance(X, idx) == doctest::Approx(direct).epsilon(1e-14));
}

TEST_CASE("farthest pair") {
  CHECK(farthest_pair(column({0, 1, 5})) == std::pair<Index, Index>{0, 2});
  MatrixXd square(4, 2);
  square << 0, 0, 0, 1, 1, 0, 1, 1;
  const auto [i, j] = farthest_pair(square);
  CHECK(euclid(square, i, j) == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(farthest_pair(column({1})), std::invalid_argument);

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd X = random_matrix(rng, 12, 3);
    const auto pair = farthest_pair(X);
    CHECK(exact_pdispersion(X, 2).indices == std::vector<Index>{pair.first, pair.second});
  }
}

TEST_CASE("exact solver dominates the heuristics and heuristics beat random subsets") {
  std::mt19937_64 rng(2025);
  int violations = 0;
  std::map<std::string, int> beats;
  std::map<std::string, std::vector<double>> ratios;
  const int instances = 200;
  for (int trial = 0; trial < instances; ++trial) {
    const Index p = 2 + trial % 3;
    const Index n = 8 + trial % 11;
    const MatrixXd X = random_matrix(rng, n, 2 + trial % 4);
    const auto exact = exact_pdispersion(X, p);
    CHECK(exact.min_pairwise == doctest::Approx(brute_force_dispersion(X, p)).epsilon(1e-14));

    std::vector<double> random_min;
    for (int k = 0; k < 100; ++k) random_min.push_back(min_pairwise_distance(X, random_subset(rng, n, p)));
    std::nth_element(random_min.begin(), random_min.begin() + 50, random_min.end());
    const double upper = random_min[50];
    std::nth_element(random_min.begin(), random_min.begin() + 49, random_min.end());
    const double median = 0.5 * (random_min[49] + upper);

    const auto labels = ward_cluster(X, p);
    for (auto m : kAllMethods) {
      const auto sel = select_dispersed(X, labels, m);
      const std::string name(to_string(m));
      if (sel.min_pairwise > exact.min_pairwise + 1e-12) ++violations;
      if (sel.min_pairwise >= median) ++beats[name];
      ratios[name].push_back(sel.min_pairwise / exact.min_pairwise);
    }
  }
  CHECK(violations == 0);
  for (auto& [name, list] : ratios) {
    std::sort(list.begin(), list.end());
    MESSAGE("method " << name << ": beats random median in " << beats[name] << "/" << instances
                      << ", ratio to optimum median " << list[list.size() / 2] << ", p10 "
                      << list[list.size() / 10]);
    CHECK(beats[name] >= 0.9 * instances);
  }
}

TEST_CASE("selection pipeline returns p + 1 distinct indices with medoid") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd F = random_matrix(rng, 30, 16, -5, 5);
    SelectionConfig cfg;
    cfg.add_medoid = true;
    cfg.method = kAllMethods[trial % 5];
    const auto r = selection_pipeline(F, cfg);
    auto idx = r.selection.indices;
    CHECK(idx.size() == 5);
    std::sort(idx.begin(), idx.end());
    CHECK(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
    REQUIRE(r.medoid.has_value());
    CHECK(r.selection.indices.back() == *r.medoid);
    CHECK(r.selection.min_pairwise ==
          doctest::Approx(min_pairwise_distance(r.embedded, r.selection.indices)).epsilon(1e-14));
    CHECK(r.pca_components_kept == r.embedded.cols());
  }
}

TEST_CASE("selection pipeline boundary n = p + 1") {
  std::mt19937_64 rng(13);
  const MatrixXd F = random_matrix(rng, 5, 6);
  SelectionConfig cfg;
  cfg.add_medoid = true;
  const auto r = selection_pipeline(F, cfg);
  auto idx = r.selection.indices;
  std::sort(idx.begin(), idx.end());
  CHECK(idx == std::vector<Index>{0, 1, 2, 3, 4});
  CHECK_THROWS_AS(selection_pipeline(F.topRows(4), cfg), std::invalid_argument);
}

TEST_CASE("selection pipeline on four clusters plus a central point") {
  std::mt19937_64 rng(14);
  const MatrixXd X = four_clusters(rng, 5, true);
  SelectionConfig cfg;
  cfg.add_medoid = true;
  cfg.pca_variance = 1.0;
  const auto r = selection_pipeline(X, cfg);
  const Index center = X.rows() - 1;
  REQUIRE(r.medoid.has_value());
  CHECK(*r.medoid == center);
  // Exhaustive medoid check in the embedded space.
  for (Index i = 0; i < X.rows(); ++i) {
    double c = 0.0, cc = 0.0;
    for (Index j = 0; j < X.rows(); ++j) {
      c += (r.embedded.row(i) - r.embedded.row(j)).norm();
      cc += (r.embedded.row(center) - r.embedded.row(j)).norm();
    }
    if (i != center) CHECK(cc < c);
  }
  std::set<Index> groups;
  for (std::size_t k = 0; k < 4; ++k) {
    const Index pick = r.selection.indices[k];
    REQUIRE(pick != center);
    groups.insert(pick / 5);
  }
  CHECK(groups.size() == 4);
}

TEST_CASE("medoid already picked falls back to the next-best row") {
  // With p = n - 1 every row but one is picked, so the medoid is usually taken.
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd F = random_matrix(rng, 6, 4);
    SelectionConfig cfg;
    cfg.p = 5;
    cfg.add_medoid = true;
    const auto r = selection_pipeline(F, cfg);
    const auto ranking = medoid_ranking(r.embedded);
    Index expected = -1;
    for (Index cand : ranking)
      if (std::find(r.selection.indices.begin(), r.selection.indices.begin() + 5, cand) ==
          r.selection.indices.begin() + 5) {
        expected = cand;
        break;
      }
    CHECK(*r.medoid == expected);
  }
}

TEST_CASE("method and metric names") {
  for (auto m : kAllMethods) CHECK(parse_method(to_string(m)) == m);
  CHECK(parse_method("A-outside") == DispersionMethod::A_outside);
  CHECK_FALSE(parse_method("Z").has_value());
  CHECK(parse_metric("manhattan") == Metric::manhattan);
  CHECK_FALSE(parse_metric("cosine").has_value());
}
