#include "pianoeval/align.hpp"

#include <cmath>

namespace pianoeval {

bool WarpPath::valid(Index m, Index n) const {
  if (pairs.empty() || pairs.front() != std::pair<Index, Index>{0, 0} ||
      pairs.back() != std::pair<Index, Index>{m - 1, n - 1})
    return false;
  for (std::size_t k = 1; k < pairs.size(); ++k) {
    const Index di = pairs[k].first - pairs[k - 1].first;
    const Index dj = pairs[k].second - pairs[k - 1].second;
    if (di < 0 || dj < 0 || di > 1 || dj > 1 || (di == 0 && dj == 0)) return false;
  }
  return true;
}

SearchWindow expand_window(const WarpPath& coarse, Index m, Index n, Index radius) {
  // Column span of the projected path in each fine row.
  std::vector<Index> lo(static_cast<std::size_t>(m), n);
  std::vector<Index> hi(static_cast<std::size_t>(m), -1);
  for (const auto& [ci, cj] : coarse.pairs) {
    for (Index i = 2 * ci; i <= std::min(2 * ci + 1, m - 1); ++i) {
      auto& l = lo[static_cast<std::size_t>(i)];
      auto& h = hi[static_cast<std::size_t>(i)];
      l = std::min(l, 2 * cj);
      h = std::max(h, std::min(2 * cj + 1, n - 1));
    }
  }
  SearchWindow window(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) {
    Index l = n, h = -1;
    for (Index k = std::max<Index>(0, i - radius); k <= std::min(m - 1, i + radius); ++k) {
      if (hi[static_cast<std::size_t>(k)] < 0) continue;
      l = std::min(l, lo[static_cast<std::size_t>(k)]);
      h = std::max(h, hi[static_cast<std::size_t>(k)]);
    }
    window[static_cast<std::size_t>(i)] = {std::max<Index>(0, l - radius), std::min(n - 1, h + radius)};
  }
  return window;
}

void AlignConfig::validate() const {
  if (radius < 0) throw std::invalid_argument("radius must be non-negative");
  if (!(frame_rate > 0.0)) throw std::invalid_argument("frame_rate must be positive");
}

namespace {

Index frame_of(double t, double frame_rate) {
  return static_cast<Index>(std::floor(t * frame_rate + 1e-9));
}

}  // namespace

MatrixXd performance_frames(const Performance& perf, const AlignConfig& cfg) {
  cfg.validate();
  const Index frames = frame_of(perf.end_time(), cfg.frame_rate) + 1;
  MatrixXd out = MatrixXd::Zero(frames, 128);
  for (const auto& n : perf) {
    if (cfg.feature == AlignFeature::onset_count) {
      out(frame_of(n.onset, cfg.frame_rate), n.pitch) += 1.0;
      continue;
    }
    // Frame k samples the instant k / frame_rate.
    const auto first = static_cast<Index>(std::ceil(n.onset * cfg.frame_rate - 1e-9));
    const double v = n.velocity / 127.0;
    for (Index k = first; k < frames && static_cast<double>(k) / cfg.frame_rate < n.offset; ++k)
      out(k, n.pitch) = std::max(out(k, n.pitch), v);
  }
  return out;
}

Performance remap_performance(const Performance& perf, const WarpPath& path, double frame_rate) {
  if (!(frame_rate > 0.0)) throw std::invalid_argument("frame_rate must be positive");
  if (path.pairs.empty()) throw std::invalid_argument("remap: empty warp path");
  const Index m = path.pairs.back().first + 1;

  // Mean target frame for each source frame.
  std::vector<double> target(static_cast<std::size_t>(m), 0.0);
  std::vector<double> count(static_cast<std::size_t>(m), 0.0);
  for (const auto& [i, j] : path.pairs) {
    target[static_cast<std::size_t>(i)] += static_cast<double>(j);
    count[static_cast<std::size_t>(i)] += 1.0;
  }
  for (Index i = 0; i < m; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (count[k] == 0.0) throw std::invalid_argument("remap: warp path skips a source frame");
    target[k] /= count[k];
  }

  auto map_time = [&](double t) {
    const double x = std::max(0.0, t * frame_rate);
    // Past the last source frame, advance at unit slope for at most one frame.
    const double last = static_cast<double>(m - 1);
    if (x >= last) return (target.back() + std::min(x - last, 1.0)) / frame_rate;
    const auto i0 = static_cast<std::size_t>(std::floor(x));
    const double frac = x - static_cast<double>(i0);
    return (target[i0] + frac * (target[i0 + 1] - target[i0])) / frame_rate;
  };

  std::vector<Note> out;
  out.reserve(perf.size());
  for (Note n : perf) {
    n.onset = map_time(n.onset);
    n.offset = map_time(n.offset);
    if (!(n.offset > n.onset)) n.offset = n.onset + 1.0 / frame_rate;
    out.push_back(n);
  }
  return Performance(std::move(out));
}

AlignResult align_performance(const Performance& ref, const Performance& est,
                              const AlignConfig& cfg) {
  cfg.validate();
  const MatrixXd ref_frames = performance_frames(ref, cfg);
  const MatrixXd est_frames = performance_frames(est, cfg);
  auto warp = fastdtw(est_frames, ref_frames, cfg.radius);
  AlignResult out;
  out.aligned = remap_performance(est, warp.path, cfg.frame_rate);
  out.path = std::move(warp.path);
  out.cost = warp.cost;
  return out;
}

}  // namespace pianoeval
