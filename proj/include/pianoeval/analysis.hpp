#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pianoeval/csv.hpp"
#include "pianoeval/types.hpp"

namespace pianoeval {

enum class Task { transcription, resynthesis, restoration };
/// Candidate shown to listeners: hidden reference, negative reference and
/// the two transcription systems.
enum class System { HR, NR, OF, SI };

std::string_view to_string(Task t);
std::string_view to_string(System s);
std::optional<Task> parse_task(std::string_view s);
std::optional<System> parse_system(std::string_view s);

struct RatingRow {
  std::string subject_id;
  Task task = Task::transcription;
  std::string excerpt_id;
  System method = System::HR;
  double rating = 0.0;  // [0, 1], higher means the same interpretation
  double listen_seconds = 0.0;
  bool moved_cursor = false;
};

struct FilterReport {
  std::size_t total = 0;
  std::size_t kept = 0;
  std::size_t dropped_short_listen = 0;
  /// Rows that passed the listening-time check but never moved the cursor.
  std::size_t dropped_no_cursor = 0;
};

struct RatingsTable {
  std::vector<RatingRow> rows;
  FilterReport report;
};

inline constexpr double kMinListenSeconds = 5.0;

inline const std::vector<std::string> kRatingsColumns = {
    "subject_id", "task", "excerpt_id", "method", "rating", "listen_seconds", "moved_cursor"};

/// Parses every row without filtering. Optional `rating_min`/`rating_max`
/// columns rescale raw ratings onto [0, 1].
std::vector<RatingRow> parse_ratings(const CsvTable& table);

/// Drops answers listened to for less than 5 s or whose cursor never moved.
RatingsTable filter_ratings(std::vector<RatingRow> rows);

RatingsTable load_and_filter_ratings(const std::filesystem::path& path);

struct GroupKey {
  Task task;
  std::string excerpt_id;
  System method;

  auto operator<=>(const GroupKey&) const = default;
};

struct GroupStats {
  double mean = 0.0;
  double median = 0.0;
  std::size_t count = 0;
  VectorXd samples;
};

std::map<GroupKey, GroupStats> aggregate_ratings(const RatingsTable& table);

double median(VectorXd values);

struct BootstrapConfig {
  double confidence = 0.95;
  int resamples = 10000;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Half-width of the percentile bootstrap interval of the mean.
double bootstrap_margin(const ConstVecRef& samples, const BootstrapConfig& cfg = {});

/// z * s / sqrt(n) with the sample standard deviation.
double normal_margin(const ConstVecRef& samples, double confidence = 0.95);

/// Inverse CDF of the standard normal distribution.
double normal_quantile(double p);

enum class CorrelationKind { pearson, spearman };

/// Ranks starting at 1; tied values share their mean rank.
VectorXd average_ranks(const ConstVecRef& x);

double correlation(const ConstVecRef& x, const ConstVecRef& y, CorrelationKind kind);

}  // namespace pianoeval
