#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "agedg/error.hpp"
#include "agedg/harness.hpp"

using namespace agedg;
using config::TrainConfig;

namespace {

const DomainSplit& synthetic() {
  static const auto split = [] {
    data::SynthSpec spec;
    spec.per_domain = {120, 150, 90, 110, 80};
    return data::synthesize_dataset(spec, 3);
  }();
  return split;
}

TrainConfig quick(dg::Algorithm a = dg::Algorithm::erm) {
  TrainConfig c;
  c.algorithm.algorithm = a;
  c.backbone.hidden = {16};
  c.backbone.feature_dim = 8;
  c.steps = 120;
  c.eval_every = 30;
  c.batch_size = 8;
  c.seed = 5;
  return c;
}

reporting::RunRecord without_clock(reporting::RunRecord r) {
  r.wall_clock_seconds = 0;
  return r;
}

}  // namespace

TEST_CASE("train config validation") {
  auto c = quick();
  CHECK_NOTHROW(c.validate());
  c.active_domains = DomainSet{};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = quick();
  c.eval_every = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = quick();
  c.steps = 10;
  c.eval_every = 20;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("run plans equalise the budget and hide inactive domains") {
  auto c = quick();
  c.active_domains = {AgeGroup::a18_30, AgeGroup::a40_50};
  const auto plan = harness::prepare_run(c, synthetic());
  const auto pools = synthetic().train_sizes();
  CHECK(plan.config.total_train_budget == pools[0] + pools[2]);
  CHECK(plan.split[AgeGroup::a30_40].train.empty());
  const auto visible = plan.visible_ids();
  std::set<std::string> ids(visible.begin(), visible.end());
  for (AgeGroup g : {AgeGroup::a30_40, AgeGroup::a50_60, AgeGroup::a60_85}) {
    for (const auto* part : {&synthetic()[g].train, &synthetic()[g].validation, &synthetic()[g].test}) {
      for (const auto& s : *part) CHECK(ids.count(s.id) == 0);
    }
  }
  for (const Sample* s : plan.validation_pool()) CHECK(c.active_domains.contains(s->domain));

  c.total_train_budget = 100000;
  CHECK_THROWS_AS(harness::prepare_run(c, synthetic()), ConfigError);
}

TEST_CASE("selection score is deterministic and order-invariant") {
  const auto plan = harness::prepare_run(quick(), synthetic());
  const auto model = backbone::init_reference_backbone(harness::architecture_for(plan.config, synthetic().shape), 2);
  auto pool = plan.validation_pool();
  const double a = harness::selection_score(model, pool, synthetic().shape);
  CHECK(a == harness::selection_score(model, pool, synthetic().shape));
  std::mt19937_64 rng(1);
  std::shuffle(pool.begin(), pool.end(), rng);
  CHECK(harness::selection_score(model, pool, synthetic().shape) == doctest::Approx(a).epsilon(1e-12));
  CHECK_THROWS(harness::selection_score(model, {}, synthetic().shape));
}

TEST_CASE("train and select keeps the best checkpoint") {
  const auto r = harness::train_and_select(quick(), synthetic());
  const auto& rec = r.record;
  REQUIRE(rec.selection_trace.size() == 4);
  CHECK(rec.selection_trace.back().first == 120);
  const auto best = std::min_element(rec.selection_trace.begin(), rec.selection_trace.end(),
                                     [](const auto& a, const auto& b) { return a.second < b.second; });
  CHECK(rec.selected_step == best->first);
  CHECK(rec.selection_score == best->second);
  CHECK(rec.selected_step <= rec.config.steps);
  const auto plan = harness::prepare_run(quick(), synthetic());
  CHECK(harness::selection_score(r.selected, plan.validation_pool(), synthetic().shape) == rec.selection_score);
  CHECK(rec.report == reporting::evaluate(r.selected, synthetic()));
  CHECK(rec.harness_version == harness::kHarnessVersion);
  for (AgeGroup g : kAllAgeGroups) {
    CHECK(rec.report[g].accuracy >= 0.0);
    CHECK(rec.report[g].loss > 0.0);
  }
}

TEST_CASE("a single evaluation selects the final checkpoint") {
  auto c = quick();
  c.eval_every = c.steps;
  const auto r = harness::train_and_select(c, synthetic());
  CHECK(r.record.selected_step == c.steps);
  CHECK(r.record.selection_trace.size() == 1);
}

TEST_CASE("identical runs give identical records") {
  for (auto a : dg::kAllAlgorithms) {
    const auto x = harness::train_and_select(quick(a), synthetic());
    const auto y = harness::train_and_select(quick(a), synthetic());
    CHECK(without_clock(x.record) == without_clock(y.record));
    CHECK(x.selected == y.selected);
  }
}

TEST_CASE("leave-one-domain-out protocol") {
  const auto runs = harness::leave_one_domain_out(quick(), synthetic());
  REQUIRE(runs.size() == 5);
  std::set<AgeGroup> held;
  std::set<std::size_t> totals;
  for (const auto& r : runs) {
    const auto out = r.record.held_out();
    REQUIRE(out.size() == 1);
    const AgeGroup g = out.members().front();
    held.insert(g);
    CHECK(r.record.train_sizes[ordinal(g)] == 0);
    std::size_t total = 0;
    for (auto n : r.record.train_sizes) total += n;
    totals.insert(total);
    const auto plan = harness::prepare_run(r.record.config, synthetic());
    const auto visible = plan.visible_ids();
    std::set<std::string> ids(visible.begin(), visible.end());
    for (const auto* part : {&synthetic()[g].train, &synthetic()[g].validation, &synthetic()[g].test}) {
      for (const auto& s : *part) CHECK(ids.count(s.id) == 0);
    }
  }
  CHECK(held.size() == 5);
  CHECK(totals.size() == 1);
}

TEST_CASE("subset ablation shares one training size") {
  const std::vector<DomainSet> subsets{
      {AgeGroup::a18_30, AgeGroup::a30_40, AgeGroup::a60_85},
      {AgeGroup::a18_30, AgeGroup::a30_40, AgeGroup::a40_50, AgeGroup::a60_85},
      DomainSet::all()};
  const auto runs = harness::subset_ablation(quick(), synthetic(), subsets, 2);
  REQUIRE(runs.size() == 3);
  std::set<std::size_t> totals;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    CHECK(runs[i].record.config.active_domains == subsets[i]);
    std::size_t total = 0;
    for (auto n : runs[i].record.train_sizes) total += n;
    totals.insert(total);
  }
  CHECK(totals.size() == 1);
  CHECK(runs[0].record.tag == "Without [40-50 & 50-60]");

  // Parallel and sequential batches agree.
  const auto seq = harness::subset_ablation(quick(), synthetic(), subsets, 1);
  for (std::size_t i = 0; i < runs.size(); ++i) CHECK(without_clock(seq[i].record) == without_clock(runs[i].record));

  // A lone all-domain subset is a plain all-domain run.
  const auto all = harness::subset_ablation(quick(), synthetic(), {DomainSet::all()});
  auto direct = harness::train_and_select(quick(), synthetic(), all[0].record.tag).record;
  CHECK(without_clock(direct) == without_clock(all[0].record));
  CHECK_THROWS_AS(harness::subset_ablation(quick(), synthetic(), {DomainSet{}}), ConfigError);
}

TEST_CASE("divergence surfaces as an error") {
  auto c = quick();
  c.algorithm.learning_rate = 1e308;
  CHECK_THROWS_AS(harness::train_and_select(c, synthetic()), DivergenceError);
}
