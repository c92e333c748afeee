#include "pianoeval/features.hpp"

#include <cmath>

namespace pianoeval {

namespace {

constexpr double kTimeEps = 1e-9;

// Population mean and standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n)};
}

}  // namespace

Index onset_window_count(double window, double span) {
  if (!(window > 0.0) || !(span > 0.0)) throw std::invalid_argument("window and span must be positive");
  if (window > span + kTimeEps) return 1;
  return static_cast<Index>(std::floor((span - window) / (window / 2.0) + kTimeEps)) + 1;
}

std::vector<double> onset_counts(const Performance& perf, double window, double span) {
  const Index count = onset_window_count(window, span);
  const bool full_span = window > span + kTimeEps;
  const double width = full_span ? span : window;
  const double hop = window / 2.0;
  std::vector<double> counts(static_cast<std::size_t>(count), 0.0);
  for (Index k = 0; k < count; ++k) {
    const double start = static_cast<double>(k) * hop;
    const double end = start + width;
    for (const auto& n : perf)
      if (n.onset >= start - kTimeEps && n.onset < end - kTimeEps) counts[static_cast<std::size_t>(k)] += 1.0;
  }
  return counts;
}

FeatureVector extract_features(const Performance& window, double window_span) {
  if (!(window_span > 0.0)) throw std::invalid_argument("window span must be positive");
  FeatureVector f = FeatureVector::Zero();
  if (window.empty()) return f;

  std::vector<double> pitches, velocities, durations;
  for (const auto& n : window) {
    pitches.push_back(n.pitch);
    velocities.push_back(n.velocity);
    durations.push_back(n.duration());
  }
  std::tie(f[0], f[1]) = mean_std(pitches);
  std::tie(f[2], f[3]) = mean_std(velocities);
  std::tie(f[4], f[5]) = mean_std(durations);

  const Pianoroll roll = build_pianoroll(window);
  std::vector<double> polyphony, harmony;
  for (Index c = 0; c < roll.columns(); ++c) {
    int active = 0;
    int lowest = -1;
    double pitch_sum = 0.0;
    for (int p = 0; p < 128; ++p) {
      if (roll.cells(p, c) == 0) continue;
      if (lowest < 0) lowest = p;
      ++active;
      pitch_sum += p;
    }
    if (active == 0) continue;
    polyphony.push_back(active);
    harmony.push_back(pitch_sum / active - lowest);
  }
  std::tie(f[6], f[7]) = mean_std(polyphony);
  std::tie(f[8], f[9]) = mean_std(harmony);

  for (std::size_t w = 0; w < kOnsetRateWindows.size(); ++w) {
    const auto [m, s] = mean_std(onset_counts(window, kOnsetRateWindows[w], window_span));
    f[static_cast<Index>(10 + 2 * w)] = m;
    f[static_cast<Index>(11 + 2 * w)] = s;
  }
  return f;
}

StandardizationParams StandardizationParams::identity(Index dims) {
  return {VectorXd::Zero(dims), VectorXd::Ones(dims)};
}

StandardizationParams fit_standardization(const std::vector<FeatureVector>& corpus) {
  MatrixXd rows(static_cast<Index>(corpus.size()), kNumFeatures);
  for (std::size_t i = 0; i < corpus.size(); ++i) rows.row(static_cast<Index>(i)) = corpus[i].transpose();
  return fit_standardization(rows);
}

MatrixXd standardize_rows(const ConstMatRef& rows, const StandardizationParams& p) {
  if (rows.cols() != p.dims())
    throw std::invalid_argument("standardize_rows: column count does not match parameters");
  return ((rows.rowwise() - p.mean.transpose()).array().rowwise() / p.std.transpose().array())
      .matrix();
}

}  // namespace pianoeval
