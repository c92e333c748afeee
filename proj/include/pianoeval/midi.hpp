#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pianoeval/types.hpp"

namespace pianoeval {

/// A single sounding note. Times are in seconds.
struct Note {
  int pitch = 60;
  double onset = 0.0;
  double offset = 0.0;
  int velocity = 64;

  bool valid() const {
    return pitch >= 0 && pitch <= 127 && velocity >= 1 && velocity <= 127 &&
           onset >= 0.0 && offset > onset;
  }
  double duration() const { return offset - onset; }

  friend bool operator==(const Note&, const Note&) = default;
};

/// Ordering used everywhere a performance is sorted: onset, then pitch.
/// Offset and velocity only break remaining ties so the order is total.
bool note_less(const Note& a, const Note& b);

/// Note list kept sorted by (onset, pitch). Every constructor sorts.
class Performance {
 public:
  Performance() = default;
  explicit Performance(std::vector<Note> notes);

  const std::vector<Note>& notes() const { return notes_; }
  std::size_t size() const { return notes_.size(); }
  bool empty() const { return notes_.empty(); }
  const Note& operator[](std::size_t i) const { return notes_[i]; }

  auto begin() const { return notes_.begin(); }
  auto end() const { return notes_.end(); }

  /// Latest offset, 0 for an empty performance.
  double end_time() const;
  /// Earliest onset, 0 for an empty performance.
  double start_time() const;

  /// Returns a copy with every onset and offset moved by `delta` seconds.
  Performance shifted(double delta) const;

  friend bool operator==(const Performance&, const Performance&) = default;

 private:
  std::vector<Note> notes_;
};

class SmfError : public std::runtime_error {
 public:
  SmfError(const std::string& what, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Non-fatal conditions met while parsing.
struct SmfDiagnostics {
  int format = 0;
  int tracks = 0;
  /// Note-ons with no matching note-off, closed at the end of their track.
  std::size_t dangling_notes = 0;
  /// Note-on/off pairs at the same tick, which carry no duration and are dropped.
  std::size_t zero_length_notes = 0;
  std::size_t tempo_events = 0;
  std::size_t sustain_events = 0;

  bool had_dangling_notes() const { return dangling_notes > 0; }
};

Performance parse_smf(std::span<const std::uint8_t> bytes,
                      SmfDiagnostics* diagnostics = nullptr);
Performance read_smf(const std::filesystem::path& path,
                     SmfDiagnostics* diagnostics = nullptr);

inline constexpr double kDefaultRollResolution = 0.005;

/// 128 x T velocity grid.
struct Pianoroll {
  Eigen::Matrix<std::uint8_t, 128, Eigen::Dynamic> cells;
  double resolution = kDefaultRollResolution;

  Index columns() const { return cells.cols(); }
};

/// Column index containing time `t` at the given resolution.
Index time_to_column(double t, double resolution);

Pianoroll build_pianoroll(const Performance& perf,
                          double resolution = kDefaultRollResolution);

/// Shifts the performance so the first onset sits at 0, then cuts windows of
/// `length` seconds every `hop` seconds. Notes overlapping a window are
/// clipped to it and re-based to the window start.
std::vector<Performance> trim_and_window(const Performance& perf,
                                         double length = 20.0,
                                         double hop = 10.0);

/// Window start times (after trimming) produced by trim_and_window.
std::vector<double> window_starts(double trimmed_duration, double length,
                                  double hop);

/// Cuts [start, start + length) out of an already-trimmed performance.
Performance cut_window(const Performance& perf, double start, double length);

/// onset<TAB>offset<TAB>pitch<TAB>velocity, six decimals, one note per line.
std::string to_text_table(const Performance& perf);
Performance from_text_table(const std::string& text);

}  // namespace pianoeval
