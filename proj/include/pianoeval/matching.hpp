#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "pianoeval/midi.hpp"

namespace pianoeval {

/// Gates used to decide whether an estimated note matches a reference note.
/// Velocity tolerance is a fraction of the full MIDI range (127).
struct ToleranceConfig {
  double onset_tol = 0.05;
  double offset_tol = 0.05;
  double pitch_tol = 0.5;
  double velocity_tol = 0.1;
  bool use_offset = true;
  bool use_velocity = true;

  void validate() const;
  /// A velocity tolerance of 1 or more admits every rescaled velocity.
  bool velocity_gated() const { return use_velocity && velocity_tol < 1.0; }
};

using IndexPair = std::pair<std::size_t, std::size_t>;

/// Hopcroft-Karp on the bipartite graph given as (left, right) edges.
/// Returns pairs sorted by left index. Deterministic for a fixed edge order.
std::vector<IndexPair> max_bipartite_matching(const std::vector<IndexPair>& edges);

struct VelocityScale {
  double a = 1.0;
  double b = 0.0;

  double operator()(double v) const { return a * v + b; }
};

struct Matching {
  std::vector<IndexPair> pairs;  // (ref index, est index)
  VelocityScale velocity_scale;
};

/// Pairs passing the pitch, onset and (optionally) offset gates.
std::vector<IndexPair> candidate_edges(const Performance& ref, const Performance& est,
                                       const ToleranceConfig& tol);

/// Least-squares v_ref ~ a * v_est + b over the given pairs. With fewer than
/// two pairs, or constant estimated velocities, a = 1 and b zeroes the mean
/// residual.
VelocityScale fit_velocity_scale(const Performance& ref, const Performance& est,
                                 const std::vector<IndexPair>& pairs);

Matching match_notes(const Performance& ref, const Performance& est,
                     const ToleranceConfig& tol = {});

struct ObjScore {
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
};

ObjScore obj_measure(const Performance& ref, const Performance& est,
                     const ToleranceConfig& tol = {});

/// Precision/recall/F from raw counts, with the empty-side conventions.
ObjScore score_from_counts(std::size_t matched, std::size_t n_ref, std::size_t n_est);

}  // namespace pianoeval
