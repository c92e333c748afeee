#include "doctest.h"

#include "pianoeval/midi.hpp"
#include "test_support.hpp"

using namespace pianoeval;
using namespace testing;

TEST_CASE("type-0 note at 120 BPM converts ticks to seconds") {
  const auto bytes = make_smf(0, 480, {make_track({tempo_event(0, 500000), note_on(0, 60, 80),
                                                   note_off(480, 60)})});
  const Performance perf = parse_smf(bytes);
  REQUIRE(perf.size() == 1);
  CHECK(perf[0] == Note{60, 0.0, 0.5, 80});
}

TEST_CASE("missing tempo defaults to 120 BPM") {
  const auto bytes = make_smf(0, 96, {make_track({note_on(96, 64, 70), note_off(192, 64)})});
  const Performance perf = parse_smf(bytes);
  REQUIRE(perf.size() == 1);
  CHECK(perf[0].onset == doctest::Approx(0.5));
  CHECK(perf[0].offset == doctest::Approx(1.0));
}

TEST_CASE("meta-only track yields an empty performance") {
  const auto bytes = make_smf(1, 480, {make_track({tempo_event(0, 600000)})});
  CHECK(parse_smf(bytes).empty());
}

TEST_CASE("note-on with velocity 0 acts as note-off") {
  const auto a = make_smf(0, 480, {make_track({note_on(0, 60, 80), note_on(480, 60, 0)})});
  const auto b = make_smf(0, 480, {make_track({note_on(0, 60, 80), note_off(480, 60)})});
  CHECK(parse_smf(a) == parse_smf(b));
}

TEST_CASE("tempo map is applied across tracks of a type-1 file") {
  // 120 BPM for the first quarter, then 240 BPM.
  const auto conductor = make_track({tempo_event(0, 500000), tempo_event(480, 250000)});
  const auto notes = make_track({note_on(0, 60, 90), note_off(480, 60), note_on(480, 62, 91),
                                 note_off(960, 62)});
  const Performance perf = parse_smf(make_smf(1, 480, {conductor, notes}));
  REQUIRE(perf.size() == 2);
  CHECK(perf[1].pitch == 62);
  CHECK(perf[1].onset == doctest::Approx(0.5));
  CHECK(perf[1].offset == doctest::Approx(0.75));
}

TEST_CASE("running status and sustain pedal events") {
  // 0x90 status reused for the second note-on and for the velocity-0 releases.
  std::vector<MidiEvent> ev{{0, {0x90, 60, 100}}, {0, {64, 90}},      {0, {0xB0, 64, 127}},
                            {240, {0x90, 60, 0}}, {240, {64, 0}},     {240, {0xB0, 64, 0}}};
  SmfDiagnostics diag;
  const Performance perf = parse_smf(make_smf(0, 480, {make_track(ev)}), &diag);
  REQUIRE(perf.size() == 2);
  CHECK(perf[0].pitch == 60);
  CHECK(perf[1].pitch == 64);
  CHECK(perf[1].offset == doctest::Approx(0.25));
  CHECK(diag.sustain_events == 2);
}

TEST_CASE("dangling note-on is closed at end of track and flagged") {
  SmfDiagnostics diag;
  const auto bytes = make_smf(0, 480, {make_track({note_on(0, 60, 80), note_off(480, 61),
                                                   {960, {0xFF, 0x01, 0x00}}})});
  const Performance perf = parse_smf(bytes, &diag);
  REQUIRE(perf.size() == 1);
  CHECK(perf[0].offset == doctest::Approx(1.0));
  CHECK(diag.had_dangling_notes());
}

TEST_CASE("SMPTE division") {
  // 25 fps, 40 ticks per frame -> 1000 ticks per second.
  const std::uint16_t division = static_cast<std::uint16_t>((0x100 - 25) << 8 | 40);
  const Performance perf =
      parse_smf(make_smf(0, division, {make_track({note_on(500, 60, 80), note_off(1500, 60)})}));
  REQUIRE(perf.size() == 1);
  CHECK(perf[0].onset == doctest::Approx(0.5));
  CHECK(perf[0].offset == doctest::Approx(1.5));
}

TEST_CASE("malformed input reports a byte offset") {
  SUBCASE("bad magic") {
    std::vector<std::uint8_t> bytes{'R', 'I', 'F', 'F', 0, 0, 0, 6, 0, 0, 0, 1, 1, 224};
    try {
      parse_smf(bytes);
      FAIL("expected SmfError");
    } catch (const SmfError& e) {
      CHECK(e.offset() == 0);
    }
  }
  SUBCASE("chunk longer than the file") {
    auto bytes = make_smf(0, 480, {make_track({note_on(0, 60, 80), note_off(10, 60)})});
    bytes.resize(bytes.size() - 3);
    try {
      parse_smf(bytes);
      FAIL("expected SmfError");
    } catch (const SmfError& e) {
      CHECK(e.offset() == 14);
    }
  }
  SUBCASE("data byte without running status") {
    const auto bytes = make_smf(0, 480, {make_track({{0, {0x3C, 0x40}}})});
    try {
      parse_smf(bytes);
      FAIL("expected SmfError");
    } catch (const SmfError& e) {
      CHECK(e.offset() == 23);
    }
  }
  SUBCASE("missing track") {
    auto bytes = make_smf(1, 480, {make_track({})});
    bytes[11] = 2;
    CHECK_THROWS_AS(parse_smf(bytes), SmfError);
  }
}

TEST_CASE("parsing is deterministic") {
  std::mt19937_64 rng(7);
  const auto bytes = smf_from_notes(random_performance(rng, 200, 30.0).notes());
  CHECK(parse_smf(bytes) == parse_smf(bytes));
}

TEST_CASE("performance stays sorted by onset then pitch") {
  const Performance perf({{64, 1.0, 2.0, 50}, {60, 1.0, 1.5, 50}, {72, 0.5, 0.7, 50}});
  CHECK(perf[0].pitch == 72);
  CHECK(perf[1].pitch == 60);
  CHECK(perf[2].pitch == 64);
  CHECK(std::is_sorted(perf.begin(), perf.end(), note_less));
}

TEST_CASE("pianoroll of a 50 ms note spans 10 columns") {
  const Pianoroll roll = build_pianoroll(Performance({{60, 0.0, 0.05, 80}}), 0.005);
  REQUIRE(roll.columns() == 10);
  CHECK((roll.cells.row(60).array() == 80).all());
  CHECK(roll.cells.cast<int>().sum() == 800);
}

TEST_CASE("empty performance gives a 128 x 0 roll") {
  const Pianoroll roll = build_pianoroll(Performance{});
  CHECK(roll.cells.rows() == 128);
  CHECK(roll.columns() == 0);
}

TEST_CASE("overlapping same-pitch notes keep the louder velocity") {
  const Pianoroll roll = build_pianoroll(Performance({{60, 0, 1, 50}, {60, 0.5, 1.5, 90}}), 0.005);
  CHECK(roll.columns() == 300);
  CHECK((roll.cells.row(60).segment(0, 100).array() == 50).all());
  CHECK((roll.cells.row(60).segment(100, 200).array() == 90).all());
}

TEST_CASE("pianoroll columns reproduce each note span") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    // One note per pitch, so notes never overlap.
    std::vector<Note> notes;
    std::uniform_int_distribution<int> col(0, 400), len(1, 200);
    for (int p = 30; p < 40; ++p) {
      const int c0 = col(rng);
      notes.push_back({p, c0 * 0.005, (c0 + len(rng)) * 0.005, 64});
    }
    const Pianoroll roll = build_pianoroll(Performance(notes));
    for (const auto& n : notes) {
      Index first = -1, last = -1;
      for (Index c = 0; c < roll.columns(); ++c)
        if (roll.cells(n.pitch, c)) {
          if (first < 0) first = c;
          last = c;
        }
      CHECK(first == time_to_column(n.onset, 0.005));
      CHECK(last + 1 == time_to_column(n.offset, 0.005));
    }
  }
}

TEST_CASE("trim and window") {
  SUBCASE("40 s performance gives windows at 0, 10, 20") {
    const Performance perf({{60, 3.0, 4.0, 64}, {62, 40.0, 43.0, 64}});
    const auto windows = trim_and_window(perf, 20, 10);
    CHECK(windows.size() == 3);
    CHECK(window_starts(40.0, 20, 10) == std::vector<double>{0, 10, 20});
    CHECK(windows[0][0].onset == 0.0);
  }
  SUBCASE("short performance gives one window") {
    const Performance perf({{60, 1.0, 2.0, 64}, {62, 5.0, 6.0, 64}});
    const auto windows = trim_and_window(perf, 20, 10);
    REQUIRE(windows.size() == 1);
    CHECK(windows[0].size() == 2);
    CHECK(windows[0][1].offset == doctest::Approx(5.0));
  }
  SUBCASE("straddling note is clipped to the window end") {
    const Performance perf({{60, 0.0, 1.0, 64}, {64, 19.0, 21.0, 64}, {62, 39.0, 40.0, 64}});
    const auto windows = trim_and_window(perf, 20, 10);
    REQUIRE(windows.size() == 3);
    CHECK(windows[0][1].offset == 20.0);
    // The same note enters window 1 from its start.
    CHECK(windows[1][0].onset == doctest::Approx(9.0));
  }
  SUBCASE("empty performance gives no windows") {
    CHECK(trim_and_window(Performance{}).empty());
  }
}

TEST_CASE("window count and onset range properties") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Performance perf = random_performance(rng, 60, 25.0 + 50.0 * (trial % 7) / 7.0);
    const double length = 20.0, hop = 10.0;
    const auto windows = trim_and_window(perf, length, hop);
    const double d = perf.end_time() - perf.start_time();
    if (d >= length) {
      CHECK(windows.size() == static_cast<std::size_t>(std::floor((d - length) / hop)) + 1);
    }
    for (const auto& w : windows)
      for (const auto& n : w) {
        CHECK(n.onset >= 0.0);
        CHECK(n.onset < length);
        CHECK(n.offset <= length);
        CHECK(n.valid());
      }
  }
}

TEST_CASE("text table export") {
  const Performance perf({{60, 0.0, 0.5, 80}, {67, 0.25, 1.125, 12}});
  const std::string text = to_text_table(perf);
  CHECK(text == "0.000000\t0.500000\t60\t80\n0.250000\t1.125000\t67\t12\n");
  CHECK(from_text_table(text) == perf);
  CHECK_THROWS(from_text_table("0.5\tx\t60\t80\n"));
}
