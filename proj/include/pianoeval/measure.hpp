#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pianoeval/features.hpp"
#include "pianoeval/matching.hpp"
#include "pianoeval/types.hpp"

namespace pianoeval {

/// Input of the perceptual measure: standardized feature differences
/// (target minus prediction) followed by the OBJ F-measure.
struct MeasureInput {
  Vector16 diffs = Vector16::Zero();
  double obj = 0.0;

  Vector17 as_vector() const;
};

/// Names of the 17 measure inputs, in order.
std::array<std::string, kNumInputs> input_names();

MeasureInput make_input(const Performance& ref, const Performance& est,
                        const StandardizationParams& params,
                        const ToleranceConfig& tol = {}, double window_span = 20.0);

struct TrainingConfig {
  double lambda = 0.01;
  double alpha = 0.5;
  double tol = 1e-6;
  int max_iter = 10000;
  double prune_threshold = 0.1;

  void validate() const;
};

struct ElasticNetFit {
  VectorXd weights;
  double intercept = 0.0;
  bool converged = false;
  int sweeps = 0;
  /// Objective value after every coordinate-descent sweep.
  std::vector<double> objective_trace;
};

/// Value of (1/2n)|y - Xw - b|^2 + lambda*alpha*|w|_1 + lambda*(1-alpha)/2*|w|^2.
double elastic_net_objective(const ConstMatRef& X, const ConstVecRef& y, const ConstVecRef& w,
                             double intercept, double lambda, double alpha);

/// Cyclic coordinate descent with soft-thresholding on centered data; the
/// intercept is unpenalized. Columns with `active[j] == false` stay at 0.
ElasticNetFit elastic_net(const ConstMatRef& X, const ConstVecRef& y, const TrainingConfig& cfg,
                          const std::vector<bool>& active = {});

/// Linear model over the measure inputs plus the standardization it was
/// trained with.
struct PerceptualModel {
  VectorXd weights;
  double intercept = 0.0;
  std::vector<bool> active_mask;
  StandardizationParams standardization = StandardizationParams::identity(kNumFeatures);
  TrainingConfig training_config;
  bool converged = true;

  /// Set when the model came out of a hyperparameter search.
  std::optional<double> loo_l1;
  bool ratings_averaged_per_group = false;

  Index dims() const { return weights.size(); }
};

double predict(const PerceptualModel& model, const ConstVecRef& x);
double predict(const PerceptualModel& model, const MeasureInput& x);

PerceptualModel fit_elasticnet(const ConstMatRef& X, const ConstVecRef& y,
                               const TrainingConfig& cfg);

/// Drops features with |w| < threshold and refits on the survivors.
PerceptualModel prune_refit(const PerceptualModel& model, const ConstMatRef& X,
                            const ConstVecRef& y, double threshold);

/// Mean |y_i - yhat_i| where each yhat_i comes from a pruned fit on the
/// other rows.
double loo_evaluate(const ConstMatRef& X, const ConstVecRef& y, const TrainingConfig& cfg);

struct GridPoint {
  double lambda;
  double alpha;
  double loo_l1;
};

struct TrainingGrid {
  std::vector<double> lambdas{0.001, 0.01, 0.1, 1.0};
  std::vector<double> alphas{0.1, 0.5, 0.9};
};

struct TrainingResult {
  PerceptualModel model;
  std::vector<GridPoint> grid;
};

/// Picks (lambda, alpha) by leave-one-out L1 over the grid, then fits and
/// prunes on all rows. Ties keep the first grid point.
TrainingResult train_measure(const ConstMatRef& X, const ConstVecRef& y,
                             const TrainingConfig& base = {}, const TrainingGrid& grid = {});

inline constexpr int kModelFormatVersion = 1;

std::string model_to_json(const PerceptualModel& model);
PerceptualModel model_from_json(const std::string& text);
void save_model(const PerceptualModel& model, const std::filesystem::path& path);
PerceptualModel load_model(const std::filesystem::path& path);

}  // namespace pianoeval
