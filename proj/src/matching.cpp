#include "pianoeval/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace pianoeval {

void ToleranceConfig::validate() const {
  if (onset_tol < 0 || offset_tol < 0 || pitch_tol < 0 || velocity_tol < 0)
    throw std::invalid_argument("tolerances must be non-negative");
}

namespace {

constexpr std::size_t kNil = std::numeric_limits<std::size_t>::max();
constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();

class HopcroftKarp {
 public:
  HopcroftKarp(std::size_t n_left, std::size_t n_right, const std::vector<IndexPair>& edges)
      : adj_(n_left), match_left_(n_left, kNil), match_right_(n_right, kNil), dist_(n_left) {
    for (const auto& [u, v] : edges) adj_[u].push_back(v);
  }

  void run() {
    while (bfs()) {
      for (std::size_t u = 0; u < adj_.size(); ++u)
        if (match_left_[u] == kNil) dfs(u);
    }
  }

  std::vector<IndexPair> pairs() const {
    std::vector<IndexPair> out;
    for (std::size_t u = 0; u < match_left_.size(); ++u)
      if (match_left_[u] != kNil) out.emplace_back(u, match_left_[u]);
    return out;
  }

 private:
  bool bfs() {
    std::queue<std::size_t> q;
    bool found = false;
    for (std::size_t u = 0; u < adj_.size(); ++u) {
      if (match_left_[u] == kNil) {
        dist_[u] = 0;
        q.push(u);
      } else {
        dist_[u] = kInf;
      }
    }
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (std::size_t v : adj_[u]) {
        const std::size_t w = match_right_[v];
        if (w == kNil) {
          found = true;
        } else if (dist_[w] == kInf) {
          dist_[w] = dist_[u] + 1;
          q.push(w);
        }
      }
    }
    return found;
  }

  // Iterative DFS along the BFS layering; recursion depth could reach the
  // matching size on long performances.
  bool dfs(std::size_t root) {
    struct Frame {
      std::size_t u;
      std::size_t next;
    };
    std::vector<Frame> stack{{root, 0}};
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next == adj_[f.u].size()) {
        dist_[f.u] = kInf;
        stack.pop_back();
        continue;
      }
      const std::size_t v = adj_[f.u][f.next++];
      const std::size_t w = match_right_[v];
      if (w == kNil) {
        // Augment along the stack.
        std::size_t right = v;
        for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
          const std::size_t left = it->u;
          const std::size_t prev = match_left_[left];
          match_left_[left] = right;
          match_right_[right] = left;
          right = prev;
        }
        return true;
      }
      if (dist_[w] == dist_[f.u] + 1) stack.push_back({w, 0});
    }
    return false;
  }

  std::vector<std::vector<std::size_t>> adj_;
  std::vector<std::size_t> match_left_;
  std::vector<std::size_t> match_right_;
  std::vector<std::size_t> dist_;
};

}  // namespace

std::vector<IndexPair> max_bipartite_matching(const std::vector<IndexPair>& edges) {
  std::size_t n_left = 0, n_right = 0;
  for (const auto& [u, v] : edges) {
    n_left = std::max(n_left, u + 1);
    n_right = std::max(n_right, v + 1);
  }
  HopcroftKarp hk(n_left, n_right, edges);
  hk.run();
  return hk.pairs();
}

namespace {
// Tolerance comparisons absorb representation error in second-valued times.
constexpr double kGateEps = 1e-9;
}  // namespace

std::vector<IndexPair> candidate_edges(const Performance& ref, const Performance& est,
                                       const ToleranceConfig& tol) {
  tol.validate();
  std::vector<IndexPair> edges;
  const auto& en = est.notes();
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const Note& r = ref[i];
    const double lo = r.onset - tol.onset_tol - kGateEps;
    auto it = std::lower_bound(en.begin(), en.end(), lo,
                               [](const Note& n, double t) { return n.onset < t; });
    for (; it != en.end() && it->onset <= r.onset + tol.onset_tol + kGateEps; ++it) {
      if (std::abs(it->pitch - r.pitch) > tol.pitch_tol + kGateEps) continue;
      if (tol.use_offset && std::abs(it->offset - r.offset) > tol.offset_tol + kGateEps) continue;
      edges.emplace_back(i, static_cast<std::size_t>(it - en.begin()));
    }
  }
  return edges;
}

VelocityScale fit_velocity_scale(const Performance& ref, const Performance& est,
                                 const std::vector<IndexPair>& pairs) {
  if (pairs.empty()) return {1.0, 0.0};
  const auto n = static_cast<double>(pairs.size());
  double mean_ref = 0.0, mean_est = 0.0;
  for (const auto& [i, j] : pairs) {
    mean_ref += ref[i].velocity;
    mean_est += est[j].velocity;
  }
  mean_ref /= n;
  mean_est /= n;
  double cov = 0.0, var = 0.0;
  for (const auto& [i, j] : pairs) {
    const double de = est[j].velocity - mean_est;
    cov += de * (ref[i].velocity - mean_ref);
    var += de * de;
  }
  if (pairs.size() < 2 || var == 0.0) return {1.0, mean_ref - mean_est};
  const double a = cov / var;
  return {a, mean_ref - a * mean_est};
}

Matching match_notes(const Performance& ref, const Performance& est, const ToleranceConfig& tol) {
  std::vector<IndexPair> edges = candidate_edges(ref, est, tol);
  Matching m;
  if (!tol.use_velocity) {
    m.pairs = max_bipartite_matching(edges);
    return m;
  }
  const auto provisional = max_bipartite_matching(edges);
  m.velocity_scale = fit_velocity_scale(ref, est, provisional);
  if (tol.velocity_gated()) {
    const double limit = tol.velocity_tol * 127.0 + kGateEps;
    std::erase_if(edges, [&](const IndexPair& e) {
      return std::abs(ref[e.first].velocity - m.velocity_scale(est[e.second].velocity)) > limit;
    });
  }
  m.pairs = max_bipartite_matching(edges);
  return m;
}

ObjScore score_from_counts(std::size_t matched, std::size_t n_ref, std::size_t n_est) {
  auto ratio = [](std::size_t num, std::size_t den, std::size_t other) {
    if (den == 0) return other == 0 ? 1.0 : 0.0;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  ObjScore s;
  s.precision = ratio(matched, n_est, n_ref);
  s.recall = ratio(matched, n_ref, n_est);
  const double sum = s.precision + s.recall;
  s.f_measure = sum > 0.0 ? 2.0 * s.precision * s.recall / sum : 0.0;
  return s;
}

ObjScore obj_measure(const Performance& ref, const Performance& est, const ToleranceConfig& tol) {
  const Matching m = match_notes(ref, est, tol);
  return score_from_counts(m.pairs.size(), ref.size(), est.size());
}

}  // namespace pianoeval
