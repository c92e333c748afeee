#include "pianoeval/dispersion.hpp"

#include <algorithm>

namespace pianoeval {

std::string_view to_string(DispersionMethod m) {
  switch (m) {
    case DispersionMethod::A: return "A";
    case DispersionMethod::A_outside: return "A-outside";
    case DispersionMethod::B: return "B";
    case DispersionMethod::C: return "C";
    case DispersionMethod::D: return "D";
  }
  return "?";
}

std::optional<DispersionMethod> parse_method(std::string_view s) {
  for (auto m : {DispersionMethod::A, DispersionMethod::A_outside, DispersionMethod::B,
                 DispersionMethod::C, DispersionMethod::D})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

std::string_view to_string(Metric m) {
  return m == Metric::manhattan ? "manhattan" : "euclidean";
}

std::optional<Metric> parse_metric(std::string_view s) {
  if (s == "euclidean") return Metric::euclidean;
  if (s == "manhattan") return Metric::manhattan;
  return std::nullopt;
}

double subset_count(Index n, Index p) {
  if (p < 0 || p > n) return 0.0;
  p = std::min(p, n - p);
  double c = 1.0;
  for (Index k = 1; k <= p; ++k) {
    c = c * static_cast<double>(n - p + k) / static_cast<double>(k);
    if (!std::isfinite(c)) break;
  }
  return std::round(c);
}

PipelineResult selection_pipeline(const ConstMatRef& features, const SelectionConfig& cfg) {
  const Index n = features.rows();
  if (cfg.p < 1) throw std::invalid_argument("p must be at least 1");
  if (n <= cfg.p)
    throw std::invalid_argument("selection needs more rows (" + std::to_string(n) +
                                ") than dispersed points (" + std::to_string(cfg.p) + ")");
  if (!features.allFinite()) throw std::invalid_argument("feature matrix contains non-finite values");

  PipelineResult out;
  const MatrixXd standardized = standardize_rows(features, fit_standardization(features));
  auto reduced = pca(standardized, cfg.pca_variance);
  out.pca_components_kept = reduced.projection.kept();
  out.embedded = std::move(reduced.projected);

  out.clusters = ward_cluster(out.embedded, cfg.p);
  auto picked = select_dispersed(out.embedded, out.clusters, cfg.method, cfg.metric);
  std::vector<Index> indices = std::move(picked.indices);

  if (cfg.add_medoid) {
    for (Index candidate : medoid_ranking(out.embedded)) {
      if (std::find(indices.begin(), indices.end(), candidate) == indices.end()) {
        out.medoid = candidate;
        indices.push_back(candidate);
        break;
      }
    }
  }
  out.selection = make_selection(out.embedded, std::move(indices), cfg.metric);
  return out;
}

}  // namespace pianoeval
