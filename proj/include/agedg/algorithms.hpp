#pragma once

// Domain-generalisation update rules over per-domain minibatches: ERM, Mixup
// (feature space by default), MMD, class-conditional domain-adversarial
// training and MLDG. Each step is a pure function: it takes a state and returns
// a fresh one. Plain SGD with a fixed learning rate throughout.

#include <array>
#include <optional>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include "agedg/backbone.hpp"
#include "agedg/metrics.hpp"

namespace agedg::dg {

using Rng = std::mt19937_64;

enum class Algorithm { erm, mixup, mmd, cdann, mldg };

inline constexpr std::array<Algorithm, 5> kAllAlgorithms{Algorithm::cdann, Algorithm::erm,
                                                          Algorithm::mixup, Algorithm::mldg,
                                                          Algorithm::mmd};

std::string_view algorithm_name(Algorithm a) noexcept;
std::optional<Algorithm> parse_algorithm(std::string_view name) noexcept;

struct AlgorithmConfig {
  Algorithm algorithm = Algorithm::erm;
  double learning_rate = 0.05;

  /// lambda ~ Beta(a, a)
  double mixup_alpha = 0.2;
  /// Mix raw inputs instead of extracted features.
  bool mixup_input_space = false;
  /// Fixes lambda instead of sampling it.
  std::optional<double> mixup_lambda;

  double mmd_weight = 1.0;
  std::vector<double> mmd_bandwidths = metrics::kDefaultBandwidths;

  double cdann_adv_weight = 1.0;
  std::vector<std::size_t> cdann_hidden{32};

  /// Defaults to learning_rate.
  std::optional<double> mldg_inner_lr;
  double mldg_meta_weight = 1.0;
  bool mldg_first_order = true;

  double inner_lr() const noexcept { return mldg_inner_lr.value_or(learning_rate); }
  /// Throws ConfigError.
  void validate() const;
};

struct DomainBatch {
  AgeGroup domain = AgeGroup::a18_30;
  Matrix<double> inputs;
  metrics::LabelBatch labels;
};

/// One entry per active training domain; distinct domains, equal batch size >= 2.
using DomainBatchSet = std::vector<DomainBatch>;

/// Throws ShapeError/ConfigError when the set violates its invariants.
void validate_batches(const DomainBatchSet& batches, std::size_t min_domains);

struct StepDiagnostics {
  double loss = 0.0;  // objective minimised by the task parameters
  metrics::LossTerms<double> terms;  // mean composite-loss terms over units
  std::optional<double> regulariser;  // mean pairwise MMD or discriminator loss
  double grad_norm = 0.0;
  metrics::ShakeWeights shake;
  std::vector<std::pair<std::size_t, std::size_t>> mixup_pairs;  // batch indices
  std::vector<double> mixup_lambdas;
  std::optional<std::size_t> meta_test_index;
};

struct StepResult {
  backbone::ModelState state;
  StepDiagnostics diagnostics;
};

StepResult erm_step(const backbone::ModelState& state, const DomainBatchSet& batches,
                    const AlgorithmConfig& cfg, Rng& rng);
StepResult mixup_step(const backbone::ModelState& state, const DomainBatchSet& batches,
                      const AlgorithmConfig& cfg, Rng& rng);
StepResult mmd_step(const backbone::ModelState& state, const DomainBatchSet& batches,
                    const AlgorithmConfig& cfg, Rng& rng);
StepResult cdann_step(const backbone::ModelState& state, const DomainBatchSet& batches,
                      const AlgorithmConfig& cfg, Rng& rng);
StepResult mldg_step(const backbone::ModelState& state, const DomainBatchSet& batches,
                     const AlgorithmConfig& cfg, Rng& rng);
/// Dispatches on cfg.algorithm.
StepResult step(const backbone::ModelState& state, const DomainBatchSet& batches,
                const AlgorithmConfig& cfg, Rng& rng);

/// Objective value plus its gradient over (theta, theta') concatenated.
struct ObjectiveGradient {
  double objective = 0.0;
  std::vector<double> gradient;
};

/// sum_d weights[d] * composite_loss(batch d) and its gradient.
ObjectiveGradient weighted_task_gradient(const backbone::ModelState& state,
                                         const DomainBatchSet& batches,
                                         const std::vector<double>& weights,
                                         const std::array<double, 3>& shake);

/// L_train(theta) + meta_weight * L_test(theta - inner_lr * grad L_train(theta)),
/// where L_train averages the batches other than meta_test.
double mldg_outer_objective(const backbone::ModelState& state, const DomainBatchSet& batches,
                            std::size_t meta_test, const std::array<double, 3>& shake,
                            double inner_lr, double meta_weight);
/// Gradient of mldg_outer_objective; first_order treats d(adapted)/d(theta) as identity.
ObjectiveGradient mldg_outer_gradient(const backbone::ModelState& state,
                                      const DomainBatchSet& batches, std::size_t meta_test,
                                      const std::array<double, 3>& shake, double inner_lr,
                                      double meta_weight, bool first_order);

// ---------------------------------------------------------------------------
// Class-conditional domain discriminator.
// ---------------------------------------------------------------------------

struct DomainFeatures {
  AgeGroup domain = AgeGroup::a18_30;
  Matrix<double> features;
  std::vector<EmotionClass> classes;
};

struct DiscriminatorEval {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Mean cross-entropy of the discriminator over (feature, one-hot class) -> domain.
/// Accumulates parameter gradients into dparams and feature gradients into
/// dfeatures[d] (scaled by feature_scale) when those are non-empty.
DiscriminatorEval discriminator_loss_grad(const backbone::DiscriminatorState& disc,
                                          const std::vector<DomainFeatures>& sets,
                                          std::span<double> dparams,
                                          std::vector<Matrix<double>>* dfeatures,
                                          double feature_scale);
/// One SGD step on the discriminator alone.
DiscriminatorEval train_discriminator_step(backbone::DiscriminatorState& disc,
                                           const std::vector<DomainFeatures>& sets,
                                           double learning_rate);

}  // namespace agedg::dg
