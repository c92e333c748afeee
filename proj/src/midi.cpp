#include "pianoeval/midi.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <tuple>

namespace pianoeval {

bool note_less(const Note& a, const Note& b) {
  return std::tie(a.onset, a.pitch, a.offset, a.velocity) <
         std::tie(b.onset, b.pitch, b.offset, b.velocity);
}

Performance::Performance(std::vector<Note> notes) : notes_(std::move(notes)) {
  std::sort(notes_.begin(), notes_.end(), note_less);
}

double Performance::end_time() const {
  double end = 0.0;
  for (const auto& n : notes_) end = std::max(end, n.offset);
  return end;
}

double Performance::start_time() const {
  return notes_.empty() ? 0.0 : notes_.front().onset;
}

Performance Performance::shifted(double delta) const {
  std::vector<Note> out = notes_;
  for (auto& n : out) {
    n.onset += delta;
    n.offset += delta;
  }
  return Performance(std::move(out));
}

SmfError::SmfError(const std::string& what, std::size_t offset)
    : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
      offset_(offset) {}

namespace {

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::size_t pos, std::size_t end)
      : bytes_(bytes), pos_(pos), end_(end) {}

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ >= end_; }

  std::uint8_t u8() {
    if (pos_ >= end_) throw SmfError("unexpected end of chunk", pos_);
    return bytes_[pos_++];
  }
  std::uint8_t peek() const {
    if (pos_ >= end_) throw SmfError("unexpected end of chunk", pos_);
    return bytes_[pos_];
  }
  std::uint32_t u16() {
    std::uint32_t hi = u8();
    return (hi << 8) | u8();
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | u8();
    return v;
  }
  std::uint32_t varlen() {
    const std::size_t start = pos_;
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      const std::uint8_t b = u8();
      v = (v << 7) | (b & 0x7F);
      if ((b & 0x80) == 0) return v;
    }
    throw SmfError("variable-length quantity longer than 4 bytes", start);
  }
  void skip(std::size_t n) {
    if (n > end_ - pos_) throw SmfError("data runs past end of chunk", pos_);
    pos_ += n;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
  std::size_t end_;
};

struct TempoEvent {
  std::uint64_t tick;
  std::uint32_t usec_per_quarter;
};

struct RawNote {
  std::uint64_t on_tick;
  std::uint64_t off_tick;
  int pitch;
  int velocity;
};

// Piecewise-constant tempo map. Tempo changes from every track apply globally.
class TickClock {
 public:
  TickClock(std::uint32_t division, std::vector<TempoEvent> tempi) {
    if (division & 0x8000) {
      const int fps_code = -static_cast<std::int8_t>(division >> 8);
      const double fps = fps_code == 29 ? 29.97 : static_cast<double>(fps_code);
      smpte_seconds_per_tick_ = 1.0 / (fps * static_cast<double>(division & 0xFF));
      return;
    }
    ticks_per_quarter_ = static_cast<double>(division);
    std::stable_sort(tempi.begin(), tempi.end(),
                     [](const TempoEvent& a, const TempoEvent& b) { return a.tick < b.tick; });
    segments_.push_back({0, 0.0, 500000});
    for (const auto& t : tempi) {
      auto& last = segments_.back();
      if (t.tick == last.tick) {
        last.usec_per_quarter = t.usec_per_quarter;
        continue;
      }
      const double start = seconds_in(last, t.tick);
      segments_.push_back({t.tick, start, t.usec_per_quarter});
    }
  }

  double seconds(std::uint64_t tick) const {
    if (smpte_seconds_per_tick_ > 0.0)
      return static_cast<double>(tick) * smpte_seconds_per_tick_;
    auto it = std::upper_bound(segments_.begin(), segments_.end(), tick,
                               [](std::uint64_t t, const Segment& s) { return t < s.tick; });
    return seconds_in(*std::prev(it), tick);
  }

 private:
  struct Segment {
    std::uint64_t tick;
    double start_seconds;
    std::uint32_t usec_per_quarter;
  };

  double seconds_in(const Segment& s, std::uint64_t tick) const {
    return s.start_seconds + static_cast<double>(tick - s.tick) *
                                 static_cast<double>(s.usec_per_quarter) /
                                 (1e6 * ticks_per_quarter_);
  }

  double ticks_per_quarter_ = 480.0;
  double smpte_seconds_per_tick_ = 0.0;
  std::vector<Segment> segments_;
};

int channel_data_bytes(std::uint8_t status) {
  switch (status & 0xF0) {
    case 0xC0:
    case 0xD0:
      return 1;
    default:
      return 2;
  }
}

void parse_track(ByteReader& in, std::vector<RawNote>& notes,
                 std::vector<TempoEvent>& tempi, SmfDiagnostics& diag) {
  // Open notes per (channel, pitch), closed first-in first-out.
  std::map<std::pair<int, int>, std::deque<std::pair<std::uint64_t, int>>> open;
  std::uint64_t tick = 0;
  std::uint8_t running = 0;

  auto close = [&](int channel, int pitch) {
    auto it = open.find({channel, pitch});
    if (it == open.end() || it->second.empty()) return;
    const auto [on_tick, velocity] = it->second.front();
    it->second.pop_front();
    if (tick == on_tick) {
      ++diag.zero_length_notes;
      return;
    }
    notes.push_back({on_tick, tick, pitch, velocity});
  };

  while (!in.done()) {
    tick += in.varlen();
    const std::size_t event_pos = in.pos();
    std::uint8_t status = in.peek();
    if (status < 0x80) {
      if (running == 0) throw SmfError("data byte without running status", event_pos);
      status = running;
    } else {
      in.u8();
    }

    if (status == 0xFF) {
      const std::uint8_t type = in.u8();
      const std::uint32_t len = in.varlen();
      if (type == 0x51) {
        if (len != 3) throw SmfError("tempo meta event must carry 3 bytes", event_pos);
        std::uint32_t usec = 0;
        for (int i = 0; i < 3; ++i) usec = (usec << 8) | in.u8();
        if (usec == 0) throw SmfError("zero tempo", event_pos);
        tempi.push_back({tick, usec});
        ++diag.tempo_events;
      } else {
        in.skip(len);
      }
      if (type == 0x2F) break;
      continue;
    }
    if (status == 0xF0 || status == 0xF7) {
      running = 0;
      in.skip(in.varlen());
      continue;
    }
    if (status >= 0xF0) throw SmfError("unexpected system message in track", event_pos);

    running = status;
    const int channel = status & 0x0F;
    const std::uint8_t d1 = in.u8();
    const std::uint8_t d2 = channel_data_bytes(status) == 2 ? in.u8() : 0;
    if ((d1 | d2) & 0x80) throw SmfError("data byte out of range", event_pos);

    switch (status & 0xF0) {
      case 0x90:
        if (d2 == 0) {
          close(channel, d1);
        } else {
          open[{channel, d1}].emplace_back(tick, d2);
        }
        break;
      case 0x80:
        close(channel, d1);
        break;
      case 0xB0:
        if (d1 == 64) ++diag.sustain_events;
        break;
      default:
        break;
    }
  }

  for (auto& [key, queue] : open) {
    while (!queue.empty()) {
      ++diag.dangling_notes;
      close(key.first, key.second);
    }
  }
}

}  // namespace

Performance parse_smf(std::span<const std::uint8_t> bytes, SmfDiagnostics* diagnostics) {
  SmfDiagnostics diag;
  ByteReader header(bytes, 0, bytes.size());
  if (bytes.size() < 14 || !std::equal(bytes.begin(), bytes.begin() + 4, "MThd"))
    throw SmfError("missing MThd header", 0);
  header.skip(4);
  const std::uint32_t header_len = header.u32();
  if (header_len < 6) throw SmfError("header chunk shorter than 6 bytes", 4);
  if (header_len > bytes.size() - 8) throw SmfError("header chunk runs past end of file", 4);
  diag.format = static_cast<int>(header.u16());
  const std::uint32_t ntracks = header.u16();
  const std::uint32_t division = header.u16();
  if (diag.format > 2) throw SmfError("unsupported SMF format " + std::to_string(diag.format), 8);
  if (division == 0) throw SmfError("zero time division", 12);

  std::vector<RawNote> raw;
  std::vector<TempoEvent> tempi;
  std::size_t pos = 8 + header_len;
  while (pos < bytes.size() && diag.tracks < static_cast<int>(ntracks)) {
    if (bytes.size() - pos < 8) throw SmfError("truncated chunk header", pos);
    ByteReader chunk(bytes, pos, bytes.size());
    const bool is_track = std::equal(bytes.begin() + pos, bytes.begin() + pos + 4, "MTrk");
    chunk.skip(4);
    const std::uint32_t len = chunk.u32();
    if (len > bytes.size() - pos - 8) throw SmfError("chunk runs past end of file", pos);
    if (is_track) {
      ByteReader track(bytes, pos + 8, pos + 8 + len);
      parse_track(track, raw, tempi, diag);
      ++diag.tracks;
    }
    pos += 8 + len;
  }
  if (diag.tracks < static_cast<int>(ntracks))
    throw SmfError("file declares " + std::to_string(ntracks) + " tracks but holds " +
                       std::to_string(diag.tracks),
                   pos);

  const TickClock clock(division, std::move(tempi));
  std::vector<Note> notes;
  notes.reserve(raw.size());
  for (const auto& r : raw) {
    notes.push_back({r.pitch, clock.seconds(r.on_tick), clock.seconds(r.off_tick), r.velocity});
  }
  if (diagnostics) *diagnostics = diag;
  return Performance(std::move(notes));
}

Performance read_smf(const std::filesystem::path& path, SmfDiagnostics* diagnostics) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)),
                                        std::istreambuf_iterator<char>());
  try {
    return parse_smf(bytes, diagnostics);
  } catch (const SmfError& e) {
    throw SmfError(path.string() + ": " + e.what(), e.offset());
  }
}

namespace {
// Guards against t / res landing a hair below an exact integer.
constexpr double kColumnEps = 1e-9;
}  // namespace

Index time_to_column(double t, double resolution) {
  return static_cast<Index>(std::floor(t / resolution + kColumnEps));
}

Pianoroll build_pianoroll(const Performance& perf, double resolution) {
  if (!(resolution > 0.0)) throw std::invalid_argument("pianoroll resolution must be positive");
  Pianoroll roll;
  roll.resolution = resolution;
  const Index cols =
      perf.empty() ? 0
                   : static_cast<Index>(std::ceil(perf.end_time() / resolution - kColumnEps));
  roll.cells.setZero(128, cols);
  for (const auto& n : perf) {
    const Index first = std::clamp<Index>(time_to_column(n.onset, resolution), 0, cols);
    const Index last = std::clamp<Index>(time_to_column(n.offset, resolution), 0, cols);
    const auto v = static_cast<std::uint8_t>(n.velocity);
    for (Index c = first; c < last; ++c) {
      auto& cell = roll.cells(n.pitch, c);
      cell = std::max(cell, v);
    }
  }
  return roll;
}

std::vector<double> window_starts(double trimmed_duration, double length, double hop) {
  if (!(length > 0.0) || !(hop > 0.0))
    throw std::invalid_argument("window length and hop must be positive");
  std::vector<double> starts{0.0};
  if (trimmed_duration < length) return starts;
  const auto count =
      static_cast<std::size_t>(std::floor((trimmed_duration - length) / hop + 1e-9)) + 1;
  for (std::size_t k = 1; k < count; ++k) starts.push_back(static_cast<double>(k) * hop);
  return starts;
}

Performance cut_window(const Performance& perf, double start, double length) {
  const double end = start + length;
  std::vector<Note> out;
  for (const auto& n : perf) {
    if (n.onset >= end || n.offset <= start) continue;
    Note c = n;
    c.onset = std::max(n.onset, start) - start;
    c.offset = std::min(n.offset, end) - start;
    if (c.offset > c.onset) out.push_back(c);
  }
  return Performance(std::move(out));
}

std::vector<Performance> trim_and_window(const Performance& perf, double length, double hop) {
  if (!(length > 0.0) || !(hop > 0.0))
    throw std::invalid_argument("window length and hop must be positive");
  if (perf.empty()) return {};
  const Performance trimmed = perf.shifted(-perf.start_time());
  std::vector<Performance> windows;
  for (double start : window_starts(trimmed.end_time(), length, hop))
    windows.push_back(cut_window(trimmed, start, length));
  return windows;
}

std::string to_text_table(const Performance& perf) {
  std::string out;
  std::array<char, 128> line{};
  for (const auto& n : perf) {
    const int len = std::snprintf(line.data(), line.size(), "%.6f\t%.6f\t%d\t%d\n", n.onset,
                                  n.offset, n.pitch, n.velocity);
    out.append(line.data(), static_cast<std::size_t>(len));
  }
  return out;
}

Performance from_text_table(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<Note> notes;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    Note n;
    if (!(fields >> n.onset >> n.offset >> n.pitch >> n.velocity) || !n.valid())
      throw std::runtime_error("malformed note table line " + std::to_string(lineno));
    notes.push_back(n);
  }
  return Performance(std::move(notes));
}

}  // namespace pianoeval
