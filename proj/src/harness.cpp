#include "agedg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>

#include "agedg/algorithms.hpp"
#include "agedg/data.hpp"
#include "agedg/error.hpp"

namespace agedg::harness {

namespace {

// Independent streams derived from the run seed.
enum class Stream : std::uint64_t { init = 1, algorithm = 2, budget = 3, sampler = 4 };

std::uint64_t derive_seed(std::uint64_t seed, Stream stream) {
  // splitmix64 finaliser
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(stream) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t active_pool(const DomainSplit& data, const DomainSet& active) {
  std::size_t total = 0;
  for (AgeGroup g : active.members()) total += data[g].train.size();
  return total;
}

class MinibatchSampler {
 public:
  MinibatchSampler(const DomainSplit& split, const DomainSet& active, std::size_t batch, std::uint64_t seed)
      : split_(split), batch_(batch), rng_(seed) {
    for (AgeGroup g : active.members()) {
      std::vector<std::size_t> idx(split[g].train.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      domains_.push_back({g, std::move(idx)});
    }
  }

  dg::DomainBatchSet next() {
    dg::DomainBatchSet out;
    out.reserve(domains_.size());
    std::vector<const Sample*> picked(batch_);
    for (auto& [g, idx] : domains_) {
      const auto& pool = split_[g].train;
      const std::size_t n = idx.size();
      if (n >= batch_) {
        for (std::size_t i = 0; i < batch_; ++i) {
          std::uniform_int_distribution<std::size_t> pick(i, n - 1);
          std::swap(idx[i], idx[pick(rng_)]);
          picked[i] = &pool[idx[i]];
        }
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (std::size_t i = 0; i < batch_; ++i) picked[i] = &pool[pick(rng_)];
      }
      dg::DomainBatch b;
      b.domain = g;
      b.inputs = data::stack_inputs(picked, split_.shape.size());
      b.labels = metrics::LabelBatch::from_samples(picked);
      out.push_back(std::move(b));
    }
    return out;
  }

 private:
  const DomainSplit& split_;
  std::size_t batch_;
  std::mt19937_64 rng_;
  std::vector<std::pair<AgeGroup, std::vector<std::size_t>>> domains_;
};

}  // namespace

DomainSplit load_data(const config::DataSource& source) {
  if (source.kind == config::DataSource::Kind::synthetic) {
    return data::synthesize_dataset(source.synth, source.synth_seed);
  }
  const auto ds = data::load_dataset(source.manifest, source.inputs);
  return data::split_by_fractions(ds.samples, ds.shape, source.split, source.split_seed);
}

backbone::Architecture architecture_for(const config::TrainConfig& cfg, const InputShape& shape) {
  backbone::Architecture arch;
  arch.input = shape;
  arch.hidden = cfg.backbone.hidden;
  arch.feature_dim = cfg.backbone.feature_dim;
  arch.validate();
  return arch;
}

std::vector<const Sample*> RunPlan::validation_pool() const {
  std::vector<const Sample*> pool;
  for (AgeGroup g : config.active_domains.members()) {
    for (const auto& s : split[g].validation) pool.push_back(&s);
  }
  return pool;
}

std::vector<std::string> RunPlan::visible_ids() const {
  std::vector<std::string> ids;
  for (AgeGroup g : kAllAgeGroups) {
    for (const auto& s : split[g].train) ids.push_back(s.id);
  }
  for (const Sample* s : validation_pool()) ids.push_back(s->id);
  return ids;
}

RunPlan prepare_run(const config::TrainConfig& cfg, const DomainSplit& data) {
  cfg.validate();
  for (AgeGroup g : cfg.active_domains.members()) {
    if (data[g].train.empty()) {
      throw ConfigError("active training domain " + std::string(age_group_name(g)) + " has no training samples");
    }
    if (data[g].validation.empty()) {
      throw ConfigError("active training domain " + std::string(age_group_name(g)) + " has no validation samples");
    }
  }
  RunPlan plan;
  plan.config = cfg;
  if (plan.config.total_train_budget == 0) plan.config.total_train_budget = active_pool(data, cfg.active_domains);
  plan.split = data::equalize_training_budget(data, cfg.active_domains, plan.config.total_train_budget,
                                              derive_seed(cfg.seed, Stream::budget));
  for (AgeGroup g : cfg.active_domains.members()) {
    if (plan.split[g].train.empty()) {
      throw ConfigError("budget " + std::to_string(plan.config.total_train_budget) +
                        " leaves active domain " + std::string(age_group_name(g)) + " without training samples");
    }
  }
  return plan;
}

double selection_score(const backbone::ModelState& model, const std::vector<const Sample*>& pooled_validation,
                       const InputShape& shape) {
  if (pooled_validation.empty()) throw DataError("pooled validation set is empty");
  return reporting::evaluate_samples(model, pooled_validation, shape).loss;
}

RunResult train_and_select(const config::TrainConfig& cfg, const DomainSplit& data, std::string tag) {
  const auto start = std::chrono::steady_clock::now();
  const RunPlan plan = prepare_run(cfg, data);
  const auto& c = plan.config;
  const auto pool = plan.validation_pool();

  auto state = backbone::init_reference_backbone(architecture_for(c, data.shape), derive_seed(c.seed, Stream::init));
  dg::Rng rng(derive_seed(c.seed, Stream::algorithm));
  MinibatchSampler sampler(plan.split, c.active_domains, c.batch_size, derive_seed(c.seed, Stream::sampler));

  RunResult result;
  auto& rec = result.record;
  std::optional<double> best;
  for (std::size_t step = 1; step <= c.steps; ++step) {
    const auto batches = sampler.next();
    try {
      state = dg::step(state, batches, c.algorithm, rng).state;
    } catch (const DivergenceError& e) {
      throw DivergenceError("step " + std::to_string(step) + ": " + e.what());
    }
    if (step % c.eval_every != 0 && step != c.steps) continue;
    const double score = selection_score(state, pool, data.shape);
    rec.selection_trace.emplace_back(step, score);
    if (!best || score < *best) {
      best = score;
      rec.selected_step = step;
      result.selected = state;
    }
  }

  rec.config = c;
  rec.tag = std::move(tag);
  rec.selection_score = *best;
  rec.report = reporting::evaluate(result.selected, plan.split);
  rec.train_sizes = plan.split.train_sizes();
  rec.harness_version = std::string(kHarnessVersion);
  rec.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<RunResult> run_batch(std::vector<config::TrainConfig> configs, const DomainSplit& data,
                                 const std::vector<std::string>& tags, std::size_t jobs) {
  if (configs.empty()) return {};
  if (!tags.empty() && tags.size() != configs.size()) throw ConfigError("one tag per configuration expected");
  std::optional<std::size_t> shared;
  for (const auto& c : configs) {
    const std::size_t avail = active_pool(data, c.active_domains);
    shared = shared ? std::min(*shared, avail) : avail;
  }
  for (auto& c : configs) {
    if (c.total_train_budget == 0) c.total_train_budget = *shared;
  }

  std::vector<std::optional<RunResult>> out(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        out[i] = train_and_select(configs[i], data, tags.empty() ? "" : tags[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, configs.size());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<RunResult> results;
  results.reserve(out.size());
  for (auto& r : out) results.push_back(std::move(*r));
  return results;
}

std::vector<RunResult> leave_one_domain_out(const config::TrainConfig& base, const DomainSplit& data,
                                            std::size_t jobs) {
  for (AgeGroup g : kAllAgeGroups) {
    if (data[g].train.empty() || data[g].test.empty()) {
      throw ConfigError("leave-one-domain-out needs every age group; " + std::string(age_group_name(g)) +
                        " is missing training or test data");
    }
  }
  std::vector<config::TrainConfig> configs;
  std::vector<std::string> tags;
  for (AgeGroup g : kAllAgeGroups) {
    auto c = base;
    c.active_domains = DomainSet::all();
    c.active_domains.erase(g);
    configs.push_back(c);
    tags.push_back(reporting::held_out_label(DomainSet{g}));
  }
  return run_batch(std::move(configs), data, tags, jobs);
}

std::vector<RunResult> subset_ablation(const config::TrainConfig& base, const DomainSplit& data,
                                       const std::vector<DomainSet>& subsets, std::size_t jobs) {
  std::vector<config::TrainConfig> configs;
  std::vector<std::string> tags;
  for (const auto& s : subsets) {
    if (s.empty()) throw ConfigError("ablation subsets must be non-empty");
    auto c = base;
    c.active_domains = s;
    configs.push_back(c);
    tags.push_back(reporting::held_out_label(s.complement()));
  }
  return run_batch(std::move(configs), data, tags, jobs);
}

}  // namespace agedg::harness
