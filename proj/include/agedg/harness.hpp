#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "agedg/backbone.hpp"
#include "agedg/config.hpp"
#include "agedg/domain.hpp"
#include "agedg/reporting.hpp"

namespace agedg::harness {

inline constexpr std::string_view kHarnessVersion = "1.0.0";

/// Loads or synthesises the dataset described by a data source.
DomainSplit load_data(const config::DataSource& source);

backbone::Architecture architecture_for(const config::TrainConfig& cfg, const InputShape& shape);

/// Budget-equalised view of the data for one run.
struct RunPlan {
  config::TrainConfig config;  // total_train_budget resolved
  DomainSplit split;           // inactive domains have empty train sets

  /// Union of the active domains' validation sets, in ordinal then file order.
  std::vector<const Sample*> validation_pool() const;
  /// Ids of every sample training or selection can see.
  std::vector<std::string> visible_ids() const;
};

/// Resolves a zero budget to the sum of the active pools, then subsamples.
/// Throws ConfigError on a shortfall or an empty active pool.
RunPlan prepare_run(const config::TrainConfig& cfg, const DomainSplit& data);

/// Composite loss with fixed 1/3 weights over the pooled validation set.
double selection_score(const backbone::ModelState& model, const std::vector<const Sample*>& pooled_validation,
                       const InputShape& shape);

struct RunResult {
  reporting::RunRecord record;
  backbone::ModelState selected;
};

RunResult train_and_select(const config::TrainConfig& cfg, const DomainSplit& data, std::string tag = "");

/// Runs independent configurations, up to `jobs` at a time. Zero budgets are
/// replaced by the largest budget every configuration can satisfy, so all
/// runs share one total training size. Results keep input order.
std::vector<RunResult> run_batch(std::vector<config::TrainConfig> configs, const DomainSplit& data,
                                 const std::vector<std::string>& tags, std::size_t jobs = 1);

/// Five runs, each with one domain removed from the active set.
std::vector<RunResult> leave_one_domain_out(const config::TrainConfig& base, const DomainSplit& data,
                                            std::size_t jobs = 1);

/// One run per subset of active training domains, tagged with the subset.
std::vector<RunResult> subset_ablation(const config::TrainConfig& base, const DomainSplit& data,
                                       const std::vector<DomainSet>& subsets, std::size_t jobs = 1);

}  // namespace agedg::harness
