#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "pianoeval/align.hpp"
#include "pianoeval/analysis.hpp"
#include "pianoeval/dispersion.hpp"
#include "pianoeval/matching.hpp"
#include "pianoeval/measure.hpp"

namespace pianoeval {

inline constexpr const char* kToolVersion = "0.1.0";

/// Effective settings shared by the CLI subcommands. A config file is a flat
/// JSON object whose keys override these defaults; command-line flags
/// override the file.
struct CliConfig {
  ToleranceConfig tolerance;
  TrainingConfig training;
  TrainingGrid grid;
  SelectionConfig selection;
  std::optional<Index> p;  // selection.p is only meaningful once set
  AlignConfig align;
  double window_length = 20.0;
  double window_hop = 10.0;
  std::uint64_t seed = 0;
  BootstrapConfig bootstrap;
};

/// Applies the keys of `doc` to `cfg`. Unknown keys and type mismatches throw
/// std::runtime_error naming the key.
void apply_config(CliConfig& cfg, const nlohmann::json& doc);

CliConfig parse_config(const std::string& text);
CliConfig load_config(const std::filesystem::path& path);

nlohmann::json config_to_json(const CliConfig& cfg);

}  // namespace pianoeval
