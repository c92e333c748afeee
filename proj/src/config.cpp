#include "pianoeval/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace pianoeval {

using nlohmann::json;

namespace {

[[noreturn]] void mismatch(const std::string& key, const char* expected) {
  throw std::runtime_error("config key '" + key + "' expects " + expected);
}

double as_number(const std::string& key, const json& v) {
  if (!v.is_number()) mismatch(key, "a number");
  return v.get<double>();
}

std::int64_t as_integer(const std::string& key, const json& v) {
  if (!v.is_number_integer()) mismatch(key, "an integer");
  return v.get<std::int64_t>();
}

bool as_bool(const std::string& key, const json& v) {
  if (!v.is_boolean()) mismatch(key, "a boolean");
  return v.get<bool>();
}

std::string as_string(const std::string& key, const json& v) {
  if (!v.is_string()) mismatch(key, "a string");
  return v.get<std::string>();
}

std::vector<double> as_number_list(const std::string& key, const json& v) {
  if (!v.is_array() || v.empty()) mismatch(key, "a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(as_number(key, x));
  return out;
}

using Setter = std::function<void(CliConfig&, const std::string&, const json&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"onset_tol", [](CliConfig& c, const std::string& k, const json& v) { c.tolerance.onset_tol = as_number(k, v); }},
      {"offset_tol", [](CliConfig& c, const std::string& k, const json& v) { c.tolerance.offset_tol = as_number(k, v); }},
      {"pitch_tol", [](CliConfig& c, const std::string& k, const json& v) { c.tolerance.pitch_tol = as_number(k, v); }},
      {"velocity_tol", [](CliConfig& c, const std::string& k, const json& v) { c.tolerance.velocity_tol = as_number(k, v); }},
      {"use_offset", [](CliConfig& c, const std::string& k, const json& v) { c.tolerance.use_offset = as_bool(k, v); }},
      {"use_velocity", [](CliConfig& c, const std::string& k, const json& v) { c.tolerance.use_velocity = as_bool(k, v); }},
      {"lambda_grid", [](CliConfig& c, const std::string& k, const json& v) { c.grid.lambdas = as_number_list(k, v); }},
      {"alpha_grid", [](CliConfig& c, const std::string& k, const json& v) { c.grid.alphas = as_number_list(k, v); }},
      {"tol", [](CliConfig& c, const std::string& k, const json& v) { c.training.tol = as_number(k, v); }},
      {"max_iter", [](CliConfig& c, const std::string& k, const json& v) { c.training.max_iter = static_cast<int>(as_integer(k, v)); }},
      {"prune_threshold", [](CliConfig& c, const std::string& k, const json& v) { c.training.prune_threshold = as_number(k, v); }},
      {"p", [](CliConfig& c, const std::string& k, const json& v) {
         if (v.is_null()) {
           c.p.reset();
           return;
         }
         const auto p = as_integer(k, v);
         if (p < 1) mismatch(k, "a positive integer");
         c.p = p;
       }},
      {"method", [](CliConfig& c, const std::string& k, const json& v) {
         const auto m = parse_method(as_string(k, v));
         if (!m) mismatch(k, "one of A, A-outside, B, C, D");
         c.selection.method = *m;
       }},
      {"metric", [](CliConfig& c, const std::string& k, const json& v) {
         const auto m = parse_metric(as_string(k, v));
         if (!m) mismatch(k, "euclidean or manhattan");
         c.selection.metric = *m;
       }},
      {"medoid", [](CliConfig& c, const std::string& k, const json& v) { c.selection.add_medoid = as_bool(k, v); }},
      {"pca_variance", [](CliConfig& c, const std::string& k, const json& v) { c.selection.pca_variance = as_number(k, v); }},
      {"radius", [](CliConfig& c, const std::string& k, const json& v) { c.align.radius = as_integer(k, v); }},
      {"frame_rate", [](CliConfig& c, const std::string& k, const json& v) { c.align.frame_rate = as_number(k, v); }},
      {"align_feature", [](CliConfig& c, const std::string& k, const json& v) {
         const auto s = as_string(k, v);
         if (s == "onset_count") c.align.feature = AlignFeature::onset_count;
         else if (s == "pianoroll_column") c.align.feature = AlignFeature::pianoroll_column;
         else mismatch(k, "onset_count or pianoroll_column");
       }},
      {"window_length", [](CliConfig& c, const std::string& k, const json& v) { c.window_length = as_number(k, v); }},
      {"window_hop", [](CliConfig& c, const std::string& k, const json& v) { c.window_hop = as_number(k, v); }},
      {"seed", [](CliConfig& c, const std::string& k, const json& v) {
         const auto s = as_integer(k, v);
         if (s < 0) mismatch(k, "a non-negative integer");
         c.seed = static_cast<std::uint64_t>(s);
       }},
      {"bootstrap_resamples", [](CliConfig& c, const std::string& k, const json& v) { c.bootstrap.resamples = static_cast<int>(as_integer(k, v)); }},
      {"confidence", [](CliConfig& c, const std::string& k, const json& v) { c.bootstrap.confidence = as_number(k, v); }},
  };
  return table;
}

}  // namespace

void apply_config(CliConfig& cfg, const json& doc) {
  if (doc.is_null()) return;
  if (!doc.is_object()) throw std::runtime_error("config file must hold a JSON object");
  for (const auto& [key, value] : doc.items()) {
    const auto it = setters().find(key);
    if (it == setters().end()) throw std::runtime_error("unknown key '" + key + "' in config");
    it->second(cfg, key, value);
  }
}

CliConfig parse_config(const std::string& text) {
  CliConfig cfg;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return cfg;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("config file is not valid JSON: ") + e.what());
  }
  apply_config(cfg, doc);
  return cfg;
}

CliConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

json config_to_json(const CliConfig& c) {
  json j;
  j["onset_tol"] = c.tolerance.onset_tol;
  j["offset_tol"] = c.tolerance.offset_tol;
  j["pitch_tol"] = c.tolerance.pitch_tol;
  j["velocity_tol"] = c.tolerance.velocity_tol;
  j["use_offset"] = c.tolerance.use_offset;
  j["use_velocity"] = c.tolerance.use_velocity;
  j["lambda_grid"] = c.grid.lambdas;
  j["alpha_grid"] = c.grid.alphas;
  j["tol"] = c.training.tol;
  j["max_iter"] = c.training.max_iter;
  j["prune_threshold"] = c.training.prune_threshold;
  j["p"] = c.p ? json(*c.p) : json(nullptr);
  j["method"] = std::string(to_string(c.selection.method));
  j["metric"] = std::string(to_string(c.selection.metric));
  j["medoid"] = c.selection.add_medoid;
  j["pca_variance"] = c.selection.pca_variance;
  j["radius"] = c.align.radius;
  j["frame_rate"] = c.align.frame_rate;
  j["align_feature"] = c.align.feature == AlignFeature::onset_count ? "onset_count" : "pianoroll_column";
  j["window_length"] = c.window_length;
  j["window_hop"] = c.window_hop;
  j["seed"] = c.seed;
  j["bootstrap_resamples"] = c.bootstrap.resamples;
  j["confidence"] = c.bootstrap.confidence;
  return j;
}

}  // namespace pianoeval
