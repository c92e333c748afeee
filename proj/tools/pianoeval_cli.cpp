// pianoeval-cli: evaluate transcriptions, extract window features, train the
// perceptual measure, select excerpts, align performances, analyze ratings.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pianoeval/align.hpp"
#include "pianoeval/analysis.hpp"
#include "pianoeval/config.hpp"
#include "pianoeval/csv.hpp"
#include "pianoeval/dispersion.hpp"
#include "pianoeval/features.hpp"
#include "pianoeval/matching.hpp"
#include "pianoeval/measure.hpp"
#include "pianoeval/midi.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pianoeval;

namespace {

/// Invalid flag combinations detected after parsing; reported like parse errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

json provenance(const CliConfig& cfg) {
  return {{"tool_version", kToolVersion}, {"config", config_to_json(cfg)}};
}

std::string header_line(const CliConfig& cfg) {
  return std::string("# pianoeval-cli ") + kToolVersion + " config=" + config_to_json(cfg).dump();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_file(out_path, text);
  }
}

bool is_midi(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".mid" || ext == ".midi";
}

std::vector<fs::path> midi_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && is_midi(entry.path())) out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

Performance load_performance(const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("no such file: " + path.string());
  return read_smf(path);
}

struct WindowFeatures {
  std::string source;
  double start;
  FeatureVector features;
};

std::vector<WindowFeatures> corpus_features(const fs::path& dir, const CliConfig& cfg) {
  std::vector<WindowFeatures> out;
  for (const auto& file : midi_files(dir)) {
    const Performance perf = read_smf(file);
    if (perf.empty()) continue;
    const double duration = perf.end_time() - perf.start_time();
    const double span = std::min(cfg.window_length, duration);
    const auto starts = window_starts(duration, cfg.window_length, cfg.window_hop);
    const auto windows = trim_and_window(perf, cfg.window_length, cfg.window_hop);
    for (std::size_t k = 0; k < windows.size(); ++k)
      out.push_back({file.filename().string(), starts[k], extract_features(windows[k], span)});
  }
  return out;
}

/// Standardization from a MIDI directory or a CSV written by `features`.
StandardizationParams load_standardization(const fs::path& source, const CliConfig& cfg) {
  std::vector<FeatureVector> rows;
  if (fs::is_directory(source)) {
    for (const auto& w : corpus_features(source, cfg)) rows.push_back(w.features);
  } else {
    const CsvTable t = read_csv(source);
    std::vector<std::size_t> cols;
    for (const auto& name : kFeatureNames) cols.push_back(t.require_column(std::string(name)));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      FeatureVector f;
      for (std::size_t k = 0; k < cols.size(); ++k)
        f[static_cast<Index>(k)] = parse_double(t.rows[r][cols[k]], "line " + std::to_string(t.lines[r]));
      rows.push_back(f);
    }
  }
  if (rows.empty()) throw std::runtime_error("standardization corpus " + source.string() + " holds no windows");
  return fit_standardization(rows);
}

// ---------------------------------------------------------------- evaluate

struct EvalOptions {
  std::string ref, est, model, inputs_out, standardization_corpus;
  bool json_output = false;
};

struct PairResult {
  std::string ref, est;
  ObjScore obj;
  VelocityScale velocity_scale;
  std::size_t ref_notes = 0, est_notes = 0;
  std::optional<MeasureInput> input;
  std::optional<double> score;
};

int run_evaluate(const EvalOptions& opt, const CliConfig& cfg) {
  cfg.tolerance.validate();
  std::vector<std::pair<fs::path, fs::path>> pairs;
  const bool ref_dir = fs::is_directory(opt.ref), est_dir = fs::is_directory(opt.est);
  if (ref_dir != est_dir) throw UsageError("--ref and --est must both be files or both be directories");
  if (ref_dir) {
    for (const auto& r : midi_files(opt.ref)) {
      const fs::path e = fs::path(opt.est) / r.filename();
      if (fs::exists(e)) {
        pairs.emplace_back(r, e);
      } else {
        std::cerr << "warning: no estimate for " << r.filename().string() << "\n";
      }
    }
    if (pairs.empty()) throw std::runtime_error("no files pair up by name between " + opt.ref + " and " + opt.est);
  } else {
    pairs.emplace_back(opt.ref, opt.est);
  }

  std::optional<PerceptualModel> model;
  if (!opt.model.empty()) model = load_model(opt.model);
  std::optional<StandardizationParams> params;
  if (model) {
    params = model->standardization;
  } else if (!opt.standardization_corpus.empty()) {
    params = load_standardization(opt.standardization_corpus, cfg);
  } else if (!opt.inputs_out.empty()) {
    throw UsageError("--inputs-out needs --model or --standardization-corpus");
  }

  auto evaluate_pair = [&](const fs::path& rp, const fs::path& ep) {
    const Performance ref = load_performance(rp);
    const Performance est = load_performance(ep);
    PairResult r;
    r.ref = rp.string();
    r.est = ep.string();
    r.ref_notes = ref.size();
    r.est_notes = est.size();
    const Matching m = match_notes(ref, est, cfg.tolerance);
    r.obj = score_from_counts(m.pairs.size(), ref.size(), est.size());
    r.velocity_scale = m.velocity_scale;
    if (params) {
      const double span = std::max({cfg.window_length, ref.end_time(), est.end_time()});
      r.input = make_input(ref, est, *params, cfg.tolerance, span);
      if (model) r.score = predict(*model, *r.input);
    }
    return r;
  };

  std::vector<std::future<PairResult>> jobs;
  for (const auto& [rp, ep] : pairs) jobs.push_back(std::async(std::launch::async, evaluate_pair, rp, ep));
  std::vector<PairResult> results;
  for (auto& j : jobs) results.push_back(j.get());

  if (!opt.inputs_out.empty()) {
    std::ostringstream csv;
    csv << header_line(cfg) << "\nref,est";
    for (const auto& n : input_names()) csv << ',' << n;
    csv << '\n';
    for (const auto& r : results) {
      csv << csv_escape(r.ref) << ',' << csv_escape(r.est);
      const Vector17 v = r.input->as_vector();
      for (Index k = 0; k < v.size(); ++k) csv << ',' << json(v[k]).dump();
      csv << '\n';
    }
    write_file(opt.inputs_out, csv.str());
  }

  if (opt.json_output) {
    json doc = provenance(cfg);
    if (model) doc["model"] = opt.model;
    doc["pairs"] = json::array();
    for (const auto& r : results) {
      json p = {{"ref", r.ref},
                {"est", r.est},
                {"ref_notes", r.ref_notes},
                {"est_notes", r.est_notes},
                {"precision", r.obj.precision},
                {"recall", r.obj.recall},
                {"f_measure", r.obj.f_measure},
                {"velocity_scale", {{"a", r.velocity_scale.a}, {"b", r.velocity_scale.b}}}};
      if (r.score) p["score"] = *r.score;
      doc["pairs"].push_back(std::move(p));
    }
    std::cout << doc.dump(2) << '\n';
    return 0;
  }

  std::cout << header_line(cfg) << '\n';
  for (const auto& r : results) {
    if (results.size() > 1) std::cout << fs::path(r.ref).filename().string() << ": ";
    std::cout << "P=" << fmt(r.obj.precision) << " R=" << fmt(r.obj.recall) << " F=" << fmt(r.obj.f_measure);
    if (r.score) std::cout << " score=" << fmt(*r.score);
    std::cout << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------- features

int run_features(const std::string& in, const std::string& out, const CliConfig& cfg) {
  if (!(cfg.window_length > 0.0 && cfg.window_hop > 0.0))
    throw UsageError("window_length and window_hop must be positive");
  const auto windows = corpus_features(in, cfg);
  if (windows.empty()) throw std::runtime_error("no MIDI windows found in " + in);
  std::ostringstream csv;
  csv << header_line(cfg) << "\nsource,window_start";
  for (const auto& n : kFeatureNames) csv << ',' << n;
  csv << '\n';
  for (const auto& w : windows) {
    csv << csv_escape(w.source) << ',' << json(w.start).dump();
    for (Index k = 0; k < w.features.size(); ++k) csv << ',' << json(w.features[k]).dump();
    csv << '\n';
  }
  write_file(out, csv.str());
  std::cerr << "wrote " << windows.size() << " windows to " << out << '\n';
  return 0;
}

// ---------------------------------------------------------------- train

int run_train(const std::string& data, const std::string& out, const std::string& corpus,
              const CliConfig& cfg) {
  const CsvTable t = read_csv(data);
  std::vector<std::size_t> cols;
  for (const auto& n : input_names()) cols.push_back(t.require_column(n));
  const std::size_t rating_col = t.require_column("rating");
  const auto task_col = t.column("task"), excerpt_col = t.column("excerpt_id"), method_col = t.column("method");
  const bool grouped = task_col && excerpt_col && method_col;

  // Rows sharing (task, excerpt, method) are averaged when those columns exist.
  std::map<std::string, std::pair<Vector17, std::vector<double>>> groups;
  std::vector<std::string> order;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& f = t.rows[r];
    const std::string where = data + " line " + std::to_string(t.lines[r]);
    Vector17 x;
    for (std::size_t k = 0; k < cols.size(); ++k) x[static_cast<Index>(k)] = parse_double(f[cols[k]], where);
    const double y = parse_double(f[rating_col], where + " rating");
    const std::string key =
        grouped ? f[*task_col] + '\x1f' + f[*excerpt_col] + '\x1f' + f[*method_col] : std::to_string(r);
    auto [it, fresh] = groups.try_emplace(key, x, std::vector<double>{});
    if (fresh) {
      order.push_back(key);
    } else if (it->second.first != x) {
      throw std::runtime_error(where + ": inputs differ from an earlier row of the same group");
    }
    it->second.second.push_back(y);
  }
  const auto n = static_cast<Index>(order.size());
  if (n < 3) throw std::runtime_error(data + ": training needs at least three rows (groups)");
  MatrixXd X(n, kNumInputs);
  VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    const auto& [x, ys] = groups.at(order[static_cast<std::size_t>(i)]);
    X.row(i) = x.transpose();
    double s = 0.0;
    for (double v : ys) s += v;
    y[i] = s / static_cast<double>(ys.size());
  }

  TrainingResult result = train_measure(X, y, cfg.training, cfg.grid);
  result.model.ratings_averaged_per_group = grouped;
  if (!corpus.empty()) {
    result.model.standardization = load_standardization(corpus, cfg);
  } else {
    std::cerr << "warning: no --standardization-corpus given; the model stores identity standardization\n";
  }
  save_model(result.model, out);

  json report = provenance(cfg);
  report["rows"] = t.rows.size();
  report["training_rows"] = n;
  report["ratings_averaged_per_group"] = grouped;
  report["grid"] = json::array();
  for (const auto& g : result.grid)
    report["grid"].push_back({{"lambda", g.lambda}, {"alpha", g.alpha}, {"loo_l1", g.loo_l1}});
  report["selected"] = {{"lambda", result.model.training_config.lambda},
                        {"alpha", result.model.training_config.alpha},
                        {"loo_l1", *result.model.loo_l1}};
  report["converged"] = result.model.converged;
  report["model"] = out;
  std::cout << report.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- select

int run_select(const std::string& features_path, const std::string& out, const CliConfig& cfg) {
  if (!cfg.p) throw UsageError("select needs --p (or \"p\" in the config file)");
  const CsvTable t = read_csv(features_path);
  const auto source_col = t.column("source");
  const auto start_col = t.column("window_start");
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (c != source_col && c != start_col) feature_cols.push_back(c);
  if (feature_cols.empty()) throw std::runtime_error(features_path + ": no feature columns");
  const auto n = static_cast<Index>(t.rows.size());
  MatrixXd F(n, static_cast<Index>(feature_cols.size()));
  for (Index i = 0; i < n; ++i)
    for (std::size_t k = 0; k < feature_cols.size(); ++k)
      F(i, static_cast<Index>(k)) =
          parse_double(t.rows[static_cast<std::size_t>(i)][feature_cols[k]],
                       features_path + " line " + std::to_string(t.lines[static_cast<std::size_t>(i)]) +
                           " column " + t.header[feature_cols[k]]);

  SelectionConfig sel = cfg.selection;
  sel.p = *cfg.p;
  if (n <= sel.p)
    throw std::runtime_error(features_path + " has " + std::to_string(n) + " rows; select needs more than p = " +
                             std::to_string(sel.p));
  const PipelineResult r = selection_pipeline(F, sel);

  json doc = provenance(cfg);
  doc["features"] = features_path;
  doc["indices"] = r.selection.indices;
  doc["min_pairwise"] = r.selection.min_pairwise;
  doc["method"] = std::string(to_string(sel.method));
  doc["metric"] = std::string(to_string(sel.metric));
  doc["pca_components_kept"] = r.pca_components_kept;
  doc["medoid"] = r.medoid ? json(*r.medoid) : json(nullptr);
  doc["selections"] = json::array();
  for (std::size_t k = 0; k < r.selection.indices.size(); ++k) {
    const Index i = r.selection.indices[k];
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    json s = {{"index", i},
              {"role", r.medoid && k + 1 == r.selection.indices.size() ? "medoid" : "dispersed"},
              {"cluster", r.clusters.labels[i]}};
    s["source"] = source_col ? json(row[*source_col]) : json(nullptr);
    s["window_start"] = start_col ? json(parse_double(row[*start_col], "window_start")) : json(nullptr);
    doc["selections"].push_back(std::move(s));
  }
  emit(doc.dump(2) + "\n", out);
  return 0;
}

// ---------------------------------------------------------------- align

int run_align(const std::string& ref_path, const std::string& est_path, const std::string& out,
              const CliConfig& cfg) {
  const Performance ref = load_performance(ref_path);
  const Performance est = load_performance(est_path);
  if (ref.empty() || est.empty()) throw std::runtime_error("cannot align an empty performance");
  const AlignResult r = align_performance(ref, est, cfg.align);
  write_file(out, to_text_table(r.aligned));
  json doc = provenance(cfg);
  doc["ref"] = ref_path;
  doc["est"] = est_path;
  doc["out"] = out;
  doc["cost"] = r.cost;
  doc["path_length"] = r.path.size();
  doc["notes"] = r.aligned.size();
  std::cout << doc.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- analyze

json correlation_entry(const VectorXd& x, const VectorXd& y) {
  json e;
  for (auto [kind, name] : {std::pair{CorrelationKind::pearson, "pearson"}, std::pair{CorrelationKind::spearman, "spearman"}}) {
    try {
      e[name] = correlation(x, y, kind);
    } catch (const std::invalid_argument&) {
      e[name] = nullptr;  // constant input or too few groups
    }
  }
  return e;
}

int run_analyze(const std::string& ratings_path, const std::string& measures_path, const std::string& out,
                const CliConfig& cfg) {
  const RatingsTable table = load_and_filter_ratings(ratings_path);
  const auto groups = aggregate_ratings(table);
  BootstrapConfig boot = cfg.bootstrap;
  boot.seed = cfg.seed;
  boot.validate();

  json doc = provenance(cfg);
  doc["ratings"] = ratings_path;
  doc["filter"] = {{"total", table.report.total},
                   {"kept", table.report.kept},
                   {"dropped_short_listen", table.report.dropped_short_listen},
                   {"dropped_no_cursor", table.report.dropped_no_cursor}};
  doc["groups"] = json::array();
  for (const auto& [key, s] : groups) {
    json g = {{"task", std::string(to_string(key.task))},
              {"excerpt_id", key.excerpt_id},
              {"method", std::string(to_string(key.method))},
              {"count", s.count},
              {"mean", s.mean},
              {"median", s.median}};
    if (s.count >= 2) {
      g["bootstrap_margin"] = bootstrap_margin(s.samples, boot);
      g["normal_margin"] = normal_margin(s.samples, boot.confidence);
    } else {
      g["bootstrap_margin"] = nullptr;
      g["normal_margin"] = nullptr;
    }
    doc["groups"].push_back(std::move(g));
  }

  if (!measures_path.empty()) {
    const CsvTable m = read_csv(measures_path);
    const std::size_t tc = m.require_column("task"), ec = m.require_column("excerpt_id"),
                      mc = m.require_column("method");
    std::vector<std::size_t> measure_cols;
    for (std::size_t c = 0; c < m.header.size(); ++c)
      if (c != tc && c != ec && c != mc) measure_cols.push_back(c);
    std::vector<std::vector<double>> values(measure_cols.size());
    std::vector<double> means, medians;
    std::size_t unmatched = 0;
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
      const auto& f = m.rows[r];
      const std::string where = measures_path + " line " + std::to_string(m.lines[r]);
      const auto task = parse_task(f[tc]);
      const auto method = parse_system(f[mc]);
      if (!task || !method) throw std::runtime_error(where + ": unknown task or method");
      const auto it = groups.find({*task, f[ec], *method});
      if (it == groups.end()) {
        ++unmatched;
        continue;
      }
      means.push_back(it->second.mean);
      medians.push_back(it->second.median);
      for (std::size_t k = 0; k < measure_cols.size(); ++k)
        values[k].push_back(parse_double(f[measure_cols[k]], where + " column " + m.header[measure_cols[k]]));
    }
    auto as_vec = [](const std::vector<double>& v) {
      return VectorXd(Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size())));
    };
    json corr = json::object();
    for (std::size_t k = 0; k < measure_cols.size(); ++k) {
      const VectorXd x = as_vec(values[k]);
      corr[m.header[measure_cols[k]]] = {{"vs_mean", correlation_entry(x, as_vec(means))},
                                         {"vs_median", correlation_entry(x, as_vec(medians))}};
    }
    doc["measures"] = measures_path;
    doc["matched_groups"] = means.size();
    doc["unmatched_measure_rows"] = unmatched;
    doc["correlations"] = corr;
  }
  emit(doc.dump(2) + "\n", out);
  return 0;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symbolic piano transcription evaluation toolkit", "pianoeval-cli"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "JSON config file; flags override its keys")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Seed for randomized steps (default 0)");

  // Flags that override config keys; applied only when given.
  double onset_tol = 0, offset_tol = 0, pitch_tol = 0, velocity_tol = 0;
  auto add_tolerances = [&](CLI::App* sub) {
    return std::vector<CLI::Option*>{
        sub->add_option("--onset-tol", onset_tol, "Onset tolerance in seconds (default 0.05)"),
        sub->add_option("--offset-tol", offset_tol, "Offset tolerance in seconds (default 0.05)"),
        sub->add_option("--pitch-tol", pitch_tol, "Pitch tolerance in semitones (default 0.5)"),
        sub->add_option("--velocity-tol", velocity_tol, "Velocity tolerance as a fraction of 127 (default 0.1)")};
  };

  EvalOptions eval;
  auto* evaluate = app.add_subcommand("evaluate", "Score transcriptions against references (OBJ and the perceptual measure)");
  evaluate->add_option("--ref", eval.ref, "Reference MIDI file or directory")->required();
  evaluate->add_option("--est", eval.est, "Estimated MIDI file or directory (paired by file name)")->required();
  evaluate->add_option("--model", eval.model, "Perceptual model JSON")->check(CLI::ExistingFile);
  evaluate->add_flag("--json", eval.json_output, "Print one JSON object");
  evaluate->add_option("--inputs-out", eval.inputs_out, "Write the 17 measure inputs per pair to this CSV");
  evaluate->add_option("--standardization-corpus", eval.standardization_corpus,
                       "MIDI directory or features CSV used to standardize inputs when no model is given");
  const auto eval_tols = add_tolerances(evaluate);

  std::string features_in, features_out;
  double window_length = 0, window_hop = 0;
  auto* features = app.add_subcommand("features", "Window MIDI files and extract the 16 symbolic features");
  features->add_option("--in", features_in, "Directory of MIDI files")->required();
  features->add_option("--out", features_out, "Output CSV")->required();
  auto* wl_opt = features->add_option("--window-length", window_length, "Window length in seconds (default 20)");
  auto* wh_opt = features->add_option("--window-hop", window_hop, "Window hop in seconds (default 10)");

  std::string train_data, train_out, train_corpus;
  std::vector<double> lambda_grid, alpha_grid;
  double prune = 0;
  auto* train = app.add_subcommand("train", "Fit the perceptual measure with ElasticNet and leave-one-out selection");
  train->add_option("--data", train_data, "CSV with the 17 input columns and a rating column")->required();
  train->add_option("--out", train_out, "Output model JSON")->required();
  train->add_option("--standardization-corpus", train_corpus,
                    "MIDI directory or features CSV whose statistics the inputs were standardized with");
  auto* lg_opt = train->add_option("--lambda-grid", lambda_grid, "Regularization strengths to search");
  auto* ag_opt = train->add_option("--alpha-grid", alpha_grid, "L1 ratios to search");
  auto* pr_opt = train->add_option("--prune-threshold", prune, "Drop weights below this magnitude (default 0.1)");

  std::string select_features, select_out, method_name, metric_name;
  Index p = 0;
  double pca_variance = 0;
  auto* select = app.add_subcommand("select", "Pick dispersed excerpts from a feature table");
  select->add_option("--features", select_features, "Feature CSV (e.g. from `features`)")->required();
  auto* p_opt = select->add_option("--p", p, "Number of dispersed picks")->check(CLI::PositiveNumber);
  auto* method_opt = select->add_option("--method", method_name, "Selection method (default A)")
                         ->check(CLI::IsMember({"A", "A-outside", "B", "C", "D"}));
  auto* metric_opt = select->add_option("--metric", metric_name, "Distance (default euclidean)")
                         ->check(CLI::IsMember({"euclidean", "manhattan"}));
  auto* medoid_opt = select->add_flag("--medoid", "Append the medoid window");
  auto* pca_opt = select->add_option("--pca-variance", pca_variance, "Variance fraction kept by PCA (default 0.92)");
  select->add_option("--out", select_out, "Write the JSON here instead of stdout");

  std::string align_ref, align_est, align_out, align_feature;
  Index radius = 0;
  double frame_rate = 0;
  auto* align = app.add_subcommand("align", "Warp an estimate onto a reference's timeline with FastDTW");
  align->add_option("--ref", align_ref, "Reference MIDI")->required();
  align->add_option("--est", align_est, "MIDI to warp")->required();
  align->add_option("--out", align_out, "Output note table (onset, offset, pitch, velocity)")->required();
  auto* radius_opt = align->add_option("--radius", radius, "FastDTW radius (default 10)")->check(CLI::NonNegativeNumber);
  auto* fr_opt = align->add_option("--frame-rate", frame_rate, "Frames per second (default 20)");
  auto* af_opt = align->add_option("--feature", align_feature, "Frame representation (default onset_count)")
                     ->check(CLI::IsMember({"onset_count", "pianoroll_column"}));

  std::string ratings, measures, analyze_out;
  int resamples = 0;
  double confidence = 0;
  auto* analyze = app.add_subcommand("analyze", "Filter and aggregate listening-test ratings");
  analyze->add_option("--ratings", ratings, "Ratings CSV")->required();
  analyze->add_option("--measures", measures, "CSV of task, excerpt_id, method and one column per measure");
  analyze->add_option("--out", analyze_out, "Write the JSON report here instead of stdout");
  auto* rs_opt = analyze->add_option("--resamples", resamples, "Bootstrap resamples (default 10000)");
  auto* conf_opt = analyze->add_option("--confidence", confidence, "Confidence level (default 0.95)");

  auto usage_error = [&](const std::string& message) {
    std::cerr << "error: " << one_line(message) << "\n\n";
    const auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return usage_error(e.what());
  }

  try {
    CliConfig cfg = config_path.empty() ? CliConfig{} : load_config(config_path);
    if (seed_opt->count()) cfg.seed = seed;
    if (*eval_tols[0]) cfg.tolerance.onset_tol = onset_tol;
    if (*eval_tols[1]) cfg.tolerance.offset_tol = offset_tol;
    if (*eval_tols[2]) cfg.tolerance.pitch_tol = pitch_tol;
    if (*eval_tols[3]) cfg.tolerance.velocity_tol = velocity_tol;
    if (*wl_opt) cfg.window_length = window_length;
    if (*wh_opt) cfg.window_hop = window_hop;
    if (*lg_opt) cfg.grid.lambdas = lambda_grid;
    if (*ag_opt) cfg.grid.alphas = alpha_grid;
    if (*pr_opt) cfg.training.prune_threshold = prune;
    if (*p_opt) cfg.p = p;
    if (*method_opt) cfg.selection.method = *parse_method(method_name);
    if (*metric_opt) cfg.selection.metric = *parse_metric(metric_name);
    if (*medoid_opt) cfg.selection.add_medoid = true;
    if (*pca_opt) cfg.selection.pca_variance = pca_variance;
    if (*radius_opt) cfg.align.radius = radius;
    if (*fr_opt) cfg.align.frame_rate = frame_rate;
    if (*af_opt)
      cfg.align.feature = align_feature == "onset_count" ? AlignFeature::onset_count : AlignFeature::pianoroll_column;
    if (*rs_opt) cfg.bootstrap.resamples = resamples;
    if (*conf_opt) cfg.bootstrap.confidence = confidence;

    if (evaluate->parsed()) return run_evaluate(eval, cfg);
    if (features->parsed()) return run_features(features_in, features_out, cfg);
    if (train->parsed()) return run_train(train_data, train_out, train_corpus, cfg);
    if (select->parsed()) return run_select(select_features, select_out, cfg);
    if (align->parsed()) return run_align(align_ref, align_est, align_out, cfg);
    if (analyze->parsed()) return run_analyze(ratings, measures, analyze_out, cfg);
    return usage_error("no subcommand given");
  } catch (const UsageError& e) {
    return usage_error(e.what());
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << '\n';
    return 1;
  }
}
