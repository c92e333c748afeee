#include "pianoeval/measure.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace pianoeval {

Vector17 MeasureInput::as_vector() const {
  Vector17 v;
  v.head<kNumFeatures>() = diffs;
  v[kNumFeatures] = obj;
  return v;
}

std::array<std::string, kNumInputs> input_names() {
  std::array<std::string, kNumInputs> names;
  for (int i = 0; i < kNumFeatures; ++i) names[static_cast<std::size_t>(i)] = std::string(kFeatureNames[static_cast<std::size_t>(i)]);
  names[kNumFeatures] = "obj";
  return names;
}

MeasureInput make_input(const Performance& ref, const Performance& est,
                        const StandardizationParams& params, const ToleranceConfig& tol,
                        double window_span) {
  MeasureInput in;
  const VectorXd a = standardize(extract_features(ref, window_span), params);
  const VectorXd b = standardize(extract_features(est, window_span), params);
  in.diffs = a - b;
  in.obj = obj_measure(ref, est, tol).f_measure;
  return in;
}

void TrainingConfig::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
  if (!(prune_threshold >= 0.0)) throw std::invalid_argument("prune_threshold must be non-negative");
}

double elastic_net_objective(const ConstMatRef& X, const ConstVecRef& y, const ConstVecRef& w,
                             double intercept, double lambda, double alpha) {
  const double n = static_cast<double>(X.rows());
  const VectorXd r = (y - X * w).array() - intercept;
  return r.squaredNorm() / (2.0 * n) + lambda * alpha * w.lpNorm<1>() +
         0.5 * lambda * (1.0 - alpha) * w.squaredNorm();
}

namespace {

// Values within rounding of the threshold count as inside it, so a lambda
// computed as max |X'y| / n by another summation order still zeroes out.
double soft_threshold(double x, double t) {
  if (std::abs(x) <= t * (1.0 + 1e-12)) return 0.0;
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

void require_finite(const ConstMatRef& X, const ConstVecRef& y) {
  if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("training data contains non-finite values");
}

}  // namespace

ElasticNetFit elastic_net(const ConstMatRef& X, const ConstVecRef& y, const TrainingConfig& cfg,
                          const std::vector<bool>& active) {
  cfg.validate();
  const Index n = X.rows();
  const Index d = X.cols();
  if (n < 2) throw std::invalid_argument("elastic net needs at least two rows");
  if (y.size() != n) throw std::invalid_argument("X and y row counts differ");
  if (!active.empty() && static_cast<Index>(active.size()) != d)
    throw std::invalid_argument("active mask size does not match column count");
  require_finite(X, y);

  const double nd = static_cast<double>(n);
  const RowVector<double> x_mean = X.colwise().mean();
  const double y_mean = y.mean();
  const MatrixXd Xc = X.rowwise() - x_mean;
  const VectorXd yc = y.array() - y_mean;
  const VectorXd col_sq = Xc.colwise().squaredNorm().transpose() / nd;

  const double l1 = cfg.lambda * cfg.alpha;
  const double l2 = cfg.lambda * (1.0 - cfg.alpha);

  ElasticNetFit fit;
  fit.weights = VectorXd::Zero(d);
  VectorXd residual = yc;
  VectorXd& w = fit.weights;

  for (int sweep = 0; sweep < cfg.max_iter; ++sweep) {
    double max_delta = 0.0;
    for (Index j = 0; j < d; ++j) {
      if (!active.empty() && !active[static_cast<std::size_t>(j)]) continue;
      const double denom = col_sq[j] + l2;
      if (denom == 0.0) continue;
      const double rho = Xc.col(j).dot(residual) / nd + col_sq[j] * w[j];
      const double updated = soft_threshold(rho, l1) / denom;
      const double delta = updated - w[j];
      if (delta != 0.0) {
        residual.noalias() -= delta * Xc.col(j);
        w[j] = updated;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    ++fit.sweeps;
    fit.objective_trace.push_back(0.5 * residual.squaredNorm() / nd + l1 * w.lpNorm<1>() +
                                  0.5 * l2 * w.squaredNorm());
    assert(fit.objective_trace.size() < 2 ||
           fit.objective_trace.back() <=
               fit.objective_trace[fit.objective_trace.size() - 2] * (1.0 + 1e-12) + 1e-15);
    if (max_delta < cfg.tol) {
      fit.converged = true;
      break;
    }
  }
  fit.intercept = y_mean - x_mean.dot(w);
  return fit;
}

double predict(const PerceptualModel& model, const ConstVecRef& x) {
  if (x.size() != model.dims()) throw std::invalid_argument("predict: input size does not match model");
  return model.weights.dot(x) + model.intercept;
}

double predict(const PerceptualModel& model, const MeasureInput& x) {
  return predict(model, VectorXd(x.as_vector()));
}

PerceptualModel fit_elasticnet(const ConstMatRef& X, const ConstVecRef& y,
                               const TrainingConfig& cfg) {
  const ElasticNetFit fit = elastic_net(X, y, cfg);
  PerceptualModel m;
  m.weights = fit.weights;
  m.intercept = fit.intercept;
  m.active_mask.assign(static_cast<std::size_t>(X.cols()), true);
  m.standardization = StandardizationParams::identity(std::min<Index>(X.cols(), kNumFeatures));
  m.training_config = cfg;
  m.converged = fit.converged;
  return m;
}

PerceptualModel prune_refit(const PerceptualModel& model, const ConstMatRef& X,
                            const ConstVecRef& y, double threshold) {
  PerceptualModel out = model;
  const Index d = model.dims();
  bool any = false;
  for (Index j = 0; j < d; ++j) {
    const auto k = static_cast<std::size_t>(j);
    out.active_mask[k] = model.active_mask[k] && std::abs(model.weights[j]) >= threshold;
    any = any || out.active_mask[k];
  }
  if (!any) {
    out.weights.setZero();
    out.intercept = y.mean();
    out.converged = true;
    return out;
  }
  const ElasticNetFit fit = elastic_net(X, y, model.training_config, out.active_mask);
  out.weights = fit.weights;
  out.intercept = fit.intercept;
  out.converged = fit.converged;
  return out;
}

namespace {

MatrixXd drop_row(const ConstMatRef& X, Index row) {
  MatrixXd out(X.rows() - 1, X.cols());
  out.topRows(row) = X.topRows(row);
  out.bottomRows(X.rows() - row - 1) = X.bottomRows(X.rows() - row - 1);
  return out;
}

VectorXd drop_entry(const ConstVecRef& y, Index row) {
  VectorXd out(y.size() - 1);
  out.head(row) = y.head(row);
  out.tail(y.size() - row - 1) = y.tail(y.size() - row - 1);
  return out;
}

}  // namespace

double loo_evaluate(const ConstMatRef& X, const ConstVecRef& y, const TrainingConfig& cfg) {
  const Index n = X.rows();
  if (n < 3) throw std::invalid_argument("leave-one-out needs at least three rows");
  std::vector<double> errors(static_cast<std::size_t>(n));
  auto fold = [&](Index i) {
    const MatrixXd Xi = drop_row(X, i);
    const VectorXd yi = drop_entry(y, i);
    const PerceptualModel m = prune_refit(fit_elasticnet(Xi, yi, cfg), Xi, yi, cfg.prune_threshold);
    errors[static_cast<std::size_t>(i)] = std::abs(y[i] - predict(m, VectorXd(X.row(i).transpose())));
  };
  const Index workers = std::max<Index>(1, std::min<Index>(n, std::thread::hardware_concurrency()));
  std::vector<std::future<void>> jobs;
  for (Index w = 0; w < workers; ++w)
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (Index i = w; i < n; i += workers) fold(i);
    }));
  for (auto& j : jobs) j.get();
  double sum = 0.0;
  for (double e : errors) sum += e;
  return sum / static_cast<double>(n);
}

TrainingResult train_measure(const ConstMatRef& X, const ConstVecRef& y,
                             const TrainingConfig& base, const TrainingGrid& grid) {
  if (grid.lambdas.empty() || grid.alphas.empty()) throw std::invalid_argument("empty training grid");
  TrainingResult result;
  std::optional<GridPoint> best;
  for (double lambda : grid.lambdas)
    for (double alpha : grid.alphas) {
      TrainingConfig cfg = base;
      cfg.lambda = lambda;
      cfg.alpha = alpha;
      const GridPoint point{lambda, alpha, loo_evaluate(X, y, cfg)};
      result.grid.push_back(point);
      if (!best || point.loo_l1 < best->loo_l1) best = point;
    }
  TrainingConfig cfg = base;
  cfg.lambda = best->lambda;
  cfg.alpha = best->alpha;
  result.model = prune_refit(fit_elasticnet(X, y, cfg), X, y, cfg.prune_threshold);
  result.model.loo_l1 = best->loo_l1;
  return result;
}

namespace {

using nlohmann::json;

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

VectorXd from_std(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

std::string model_to_json(const PerceptualModel& model) {
  const auto names = input_names();
  json j;
  j["format_version"] = kModelFormatVersion;
  j["feature_names"] = std::vector<std::string>(names.begin(), names.end());
  j["weights"] = to_std(model.weights);
  j["intercept"] = model.intercept;
  j["active_mask"] = model.active_mask;
  j["standardization"] = {{"mean", to_std(model.standardization.mean)},
                          {"std", to_std(model.standardization.std)}};
  const auto& c = model.training_config;
  j["training_config"] = {{"lambda", c.lambda},
                          {"alpha", c.alpha},
                          {"tol", c.tol},
                          {"max_iter", c.max_iter},
                          {"prune_threshold", c.prune_threshold},
                          {"converged", model.converged},
                          {"ratings_averaged_per_group", model.ratings_averaged_per_group}};
  if (model.loo_l1) j["training_config"]["loo_l1"] = *model.loo_l1;
  return j.dump(2);
}

PerceptualModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion)
      throw std::runtime_error("unsupported model format_version");
    PerceptualModel m;
    m.weights = from_std(j.at("weights").get<std::vector<double>>());
    m.intercept = j.at("intercept").get<double>();
    m.active_mask = j.at("active_mask").get<std::vector<bool>>();
    m.standardization.mean = from_std(j.at("standardization").at("mean").get<std::vector<double>>());
    m.standardization.std = from_std(j.at("standardization").at("std").get<std::vector<double>>());
    const auto& c = j.at("training_config");
    m.training_config.lambda = c.at("lambda").get<double>();
    m.training_config.alpha = c.at("alpha").get<double>();
    m.training_config.tol = c.at("tol").get<double>();
    m.training_config.max_iter = c.at("max_iter").get<int>();
    m.training_config.prune_threshold = c.at("prune_threshold").get<double>();
    m.converged = c.value("converged", true);
    m.ratings_averaged_per_group = c.value("ratings_averaged_per_group", false);
    if (c.contains("loo_l1")) m.loo_l1 = c.at("loo_l1").get<double>();

    if (m.weights.size() != kNumInputs) throw std::runtime_error("model must carry 17 weights");
    if (m.active_mask.size() != static_cast<std::size_t>(kNumInputs))
      throw std::runtime_error("active_mask must carry 17 entries");
    if (m.standardization.dims() != kNumFeatures || m.standardization.std.size() != kNumFeatures)
      throw std::runtime_error("standardization must carry 16 means and 16 stds");
    for (Index i = 0; i < kNumInputs; ++i)
      if (!m.active_mask[static_cast<std::size_t>(i)] && m.weights[i] != 0.0)
        throw std::runtime_error("inactive feature carries a non-zero weight");
    return m;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const PerceptualModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << model_to_json(model) << '\n';
}

PerceptualModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace pianoeval
