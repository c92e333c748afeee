#include "pianoeval/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace pianoeval {

std::string_view to_string(Task t) {
  switch (t) {
    case Task::transcription: return "transcription";
    case Task::resynthesis: return "resynthesis";
    case Task::restoration: return "restoration";
  }
  return "?";
}

std::string_view to_string(System s) {
  switch (s) {
    case System::HR: return "HR";
    case System::NR: return "NR";
    case System::OF: return "OF";
    case System::SI: return "SI";
  }
  return "?";
}

std::optional<Task> parse_task(std::string_view s) {
  for (auto t : {Task::transcription, Task::resynthesis, Task::restoration})
    if (s == to_string(t)) return t;
  return std::nullopt;
}

std::optional<System> parse_system(std::string_view s) {
  for (auto m : {System::HR, System::NR, System::OF, System::SI})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

namespace {

bool parse_bool(const std::string& s, const std::string& context) {
  if (s == "true" || s == "1" || s == "True" || s == "TRUE") return true;
  if (s == "false" || s == "0" || s == "False" || s == "FALSE") return false;
  throw std::runtime_error(context + ": '" + s + "' is not a boolean");
}

}  // namespace

std::vector<RatingRow> parse_ratings(const CsvTable& table) {
  std::vector<std::size_t> col;
  for (const auto& name : kRatingsColumns) col.push_back(table.require_column(name));
  const auto min_col = table.column("rating_min");
  const auto max_col = table.column("rating_max");
  if (min_col.has_value() != max_col.has_value())
    throw std::runtime_error("rating_min and rating_max must be given together");

  std::vector<RatingRow> rows;
  rows.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& f = table.rows[r];
    const std::string where = "row at line " + std::to_string(table.lines[r]);
    RatingRow row;
    row.subject_id = f[col[0]];
    const auto task = parse_task(f[col[1]]);
    if (!task) throw std::runtime_error(where + ": unknown task '" + f[col[1]] + "'");
    row.task = *task;
    row.excerpt_id = f[col[2]];
    const auto method = parse_system(f[col[3]]);
    if (!method) throw std::runtime_error(where + ": unknown method '" + f[col[3]] + "'");
    row.method = *method;
    row.rating = parse_double(f[col[4]], where + " rating");
    if (min_col) {
      const double lo = parse_double(f[*min_col], where + " rating_min");
      const double hi = parse_double(f[*max_col], where + " rating_max");
      if (!(hi > lo)) throw std::runtime_error(where + ": rating_max must exceed rating_min");
      row.rating = (row.rating - lo) / (hi - lo);
    }
    if (!(row.rating >= 0.0 && row.rating <= 1.0))
      throw std::runtime_error(where + ": rating " + f[col[4]] + " outside [0, 1]");
    row.listen_seconds = parse_double(f[col[5]], where + " listen_seconds");
    if (!(row.listen_seconds >= 0.0)) throw std::runtime_error(where + ": negative listen_seconds");
    row.moved_cursor = parse_bool(f[col[6]], where + " moved_cursor");
    rows.push_back(std::move(row));
  }
  return rows;
}

RatingsTable filter_ratings(std::vector<RatingRow> rows) {
  RatingsTable out;
  out.report.total = rows.size();
  for (auto& row : rows) {
    if (row.listen_seconds < kMinListenSeconds) {
      ++out.report.dropped_short_listen;
    } else if (!row.moved_cursor) {
      ++out.report.dropped_no_cursor;
    } else {
      out.rows.push_back(std::move(row));
    }
  }
  out.report.kept = out.rows.size();
  return out;
}

RatingsTable load_and_filter_ratings(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  try {
    return filter_ratings(parse_ratings(table));
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

double median(VectorXd values) {
  if (values.size() == 0) throw std::invalid_argument("median of an empty sample");
  std::sort(values.begin(), values.end());
  const Index n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::map<GroupKey, GroupStats> aggregate_ratings(const RatingsTable& table) {
  std::map<GroupKey, std::vector<double>> buckets;
  for (const auto& row : table.rows)
    buckets[{row.task, row.excerpt_id, row.method}].push_back(row.rating);
  std::map<GroupKey, GroupStats> out;
  for (auto& [key, values] : buckets) {
    GroupStats s;
    s.samples = Eigen::Map<const VectorXd>(values.data(), static_cast<Index>(values.size()));
    s.count = values.size();
    s.mean = s.samples.mean();
    s.median = median(s.samples);
    out.emplace(key, std::move(s));
  }
  return out;
}

void BootstrapConfig::validate() const {
  if (!(confidence > 0.0 && confidence < 1.0)) throw std::invalid_argument("confidence must lie in (0, 1)");
  if (resamples < 100) throw std::invalid_argument("at least 100 bootstrap resamples are required");
}

namespace {

// Linear interpolation between order statistics.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

double bootstrap_margin(const ConstVecRef& samples, const BootstrapConfig& cfg) {
  cfg.validate();
  const Index n = samples.size();
  if (n < 2) throw std::invalid_argument("bootstrap needs at least two samples");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  std::vector<double> means(static_cast<std::size_t>(cfg.resamples));
  for (auto& m : means) {
    double sum = 0.0;
    for (Index k = 0; k < n; ++k) sum += samples[pick(rng)];
    m = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double upper = quantile_sorted(means, (1.0 + cfg.confidence) / 2.0);
  const double lower = quantile_sorted(means, (1.0 - cfg.confidence) / 2.0);
  return (upper - lower) / 2.0;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must lie in (0, 1)");
  // Newton iterations on Phi(x) - p, Phi written through erfc.
  constexpr double kSqrt2 = 1.4142135623730951;
  constexpr double kInvSqrt2Pi = 0.3989422804014327;
  double x = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double cdf = 0.5 * std::erfc(-x / kSqrt2);
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    const double step = (cdf - p) / pdf;
    x -= step;
    if (std::abs(step) < 1e-14) break;
  }
  return x;
}

double normal_margin(const ConstVecRef& samples, double confidence) {
  const Index n = samples.size();
  if (n < 2) throw std::invalid_argument("normal margin needs at least two samples");
  const double mean = samples.mean();
  const double var = (samples.array() - mean).square().sum() / static_cast<double>(n - 1);
  return normal_quantile((1.0 + confidence) / 2.0) * std::sqrt(var / static_cast<double>(n));
}

VectorXd average_ranks(const ConstVecRef& x) {
  const Index n = x.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return x[a] < x[b]; });
  VectorXd ranks(n);
  for (Index i = 0; i < n;) {
    Index j = i;
    while (j + 1 < n && x[order[static_cast<std::size_t>(j + 1)]] == x[order[static_cast<std::size_t>(i)]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Index k = i; k <= j; ++k) ranks[order[static_cast<std::size_t>(k)]] = rank;
    i = j + 1;
  }
  return ranks;
}

double correlation(const ConstVecRef& x, const ConstVecRef& y, CorrelationKind kind) {
  if (x.size() != y.size()) throw std::invalid_argument("correlation: lengths differ");
  if (x.size() < 2) throw std::invalid_argument("correlation needs at least two points");
  if (kind == CorrelationKind::spearman)
    return correlation(average_ranks(x), average_ranks(y), CorrelationKind::pearson);
  const VectorXd xc = x.array() - x.mean();
  const VectorXd yc = y.array() - y.mean();
  const double sxx = xc.squaredNorm();
  const double syy = yc.squaredNorm();
  if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("correlation undefined for constant input");
  return std::clamp(xc.dot(yc) / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace pianoeval
