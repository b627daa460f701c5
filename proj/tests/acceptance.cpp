// Acceptance checks. Prints one PASS/FAIL line per criterion.
//   agedg_acceptance                 run all nine
//   agedg_acceptance --criterion N   run one

#include <cfloat>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <bit>
#include <functional>
#include <iostream>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "agedg/algorithms.hpp"
#include "agedg/cli.hpp"
#include "agedg/data.hpp"
#include "agedg/harness.hpp"
#include "agedg/metrics.hpp"
#include "agedg/reporting.hpp"
#include "reference_tables.hpp"

using namespace agedg;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-4;
constexpr double kOracleTol = 1e-10;
constexpr double kCccExampleTol = 1e-12;
constexpr double kLossBudgetSeconds = 10.0;
constexpr int kShakeDraws = 10000;
constexpr double kShakeMeanTol = 0.02;
constexpr double kShakeSumUlps = 2.0;
constexpr double kMmdSelfTol = 1e-12;
constexpr int kMmdSeeds = 10;
constexpr int kMmdRequired = 9;
constexpr double kReductionTol = 1e-10;
constexpr double kMldgRelTol = 1e-3;
constexpr std::size_t kMldgMaxParams = 200;
constexpr double kTableDiffTol = 0.015;
constexpr double kMeanTol = 0.005;
constexpr double kAccuracyFloor = 0.25;
constexpr double kValenceFloor = 0.2;
constexpr double kEndToEndSeconds = 600.0;
constexpr int kDirectionSeeds = 5;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void fail(const std::string& why) {
    pass = false;
    detail << "[" << why << "] ";
  }
};

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

std::vector<double> uniform_vec(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> d(-1, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

const DomainSplit& synthetic_300() {
  static const auto split = [] {
    data::SynthSpec spec;
    spec.per_domain = {300, 300, 300, 300, 300};
    spec.dim = 20;
    spec.shift = 0.4;
    return data::synthesize_dataset(spec, 2024);
  }();
  return split;
}

dg::DomainBatchSet batches_for(const std::vector<AgeGroup>& groups, std::size_t n) {
  const auto& s = synthetic_300();
  dg::DomainBatchSet out;
  for (AgeGroup g : groups) {
    std::vector<const Sample*> p;
    for (std::size_t i = 0; i < n; ++i) p.push_back(&s[g].train[i]);
    out.push_back({g, data::stack_inputs(p, s.shape.size()), metrics::LabelBatch::from_samples(p)});
  }
  return out;
}

// ---------------------------------------------------------------------------

void criterion_1(Outcome& o) {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int batch = 0; batch < 20; ++batch) {
    const std::size_t n = 32;
    std::uniform_int_distribution<std::size_t> cls(0, kNumEmotions - 1);
    std::vector<EmotionClass> c(n);
    for (auto& e : c) e = emotion_from_index(cls(rng));
    const auto labels = metrics::LabelBatch::hard(c, uniform_vec(rng, n), uniform_vec(rng, n));
    metrics::PredictionBatch pred(n);
    std::normal_distribution<double> g(0, 1.5);
    for (auto& v : pred.logits.data) v = g(rng);
    pred.valence = uniform_vec(rng, n);
    pred.arousal = uniform_vec(rng, n);
    const auto w = metrics::sample_shake_weights(rng).normalized();
    metrics::PredictionBatch grad(n);
    metrics::composite_loss_grad<double>(pred, labels, w, metrics::CorrelationPolicy::strict, &grad);
    auto f = [&] { return metrics::composite_loss_grad<double>(pred, labels, w, metrics::CorrelationPolicy::strict).total; };
    auto sweep = [&](std::vector<double>& slot, const std::vector<double>& an) {
      for (std::size_t i = 0; i < slot.size(); ++i) {
        const double keep = slot[i];
        slot[i] = keep + kFdStep;
        const double up = f();
        slot[i] = keep - kFdStep;
        const double dn = f();
        slot[i] = keep;
        worst = std::max(worst, rel_err(an[i], (up - dn) / (2 * kFdStep)));
      }
    };
    sweep(pred.logits.data, grad.logits.data);
    sweep(pred.valence, grad.valence);
    sweep(pred.arousal, grad.arousal);
  }
  o.detail << "fd worst rel " << worst << "; ";
  if (!(worst < kFdRelTol)) o.fail("finite-difference mismatch");

  double oracle_worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const auto a = uniform_vec(rng, 32);
    auto b = uniform_vec(rng, 32);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.5 * b[i] + 0.4 * a[i] - 0.05;
    long double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ma += a[i];
      mb += b[i];
    }
    ma /= a.size();
    mb /= b.size();
    long double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      sab += (a[i] - ma) * (b[i] - mb);
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
    }
    const long double n = a.size();
    const double pcc_o = static_cast<double>(sab / std::sqrt(saa * sbb));
    const double ccc_o = static_cast<double>(2 * sab / n / (saa / n + sbb / n + (ma - mb) * (ma - mb)));
    oracle_worst = std::max({oracle_worst, std::abs(metrics::pcc(a, b) - pcc_o), std::abs(metrics::ccc(a, b) - ccc_o)});
  }
  o.detail << "oracle worst abs " << oracle_worst << "; ";
  if (!(oracle_worst <= kOracleTol)) o.fail("correlation oracle mismatch");

  const double c = metrics::ccc(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6});
  o.detail << "ccc example " << std::setprecision(17) << c << std::setprecision(6) << "; ";
  if (!(std::abs(c - 4.0 / 11.0) <= kCccExampleTol)) o.fail("ccc example");

  const double took = seconds_since(start);
  o.detail << "runtime " << took << " s";
  if (!(took < kLossBudgetSeconds)) o.fail("runtime");
}

void criterion_2(Outcome& o) {
  std::mt19937_64 rng(7);
  double sum[3] = {0, 0, 0};
  double worst_ulps = 0;
  for (int i = 0; i < kShakeDraws; ++i) {
    const auto w = metrics::sample_shake_weights(rng);
    const auto n = w.normalized();
    worst_ulps = std::max(worst_ulps, std::abs((n[0] + n[1] + n[2]) - 1.0) / DBL_EPSILON);
    sum[0] += w.alpha;
    sum[1] += w.beta;
    sum[2] += w.gamma;
  }
  o.detail << "max |sum-1| = " << worst_ulps << " ulp; means";
  for (double s : sum) {
    o.detail << " " << s / kShakeDraws;
    if (!(std::abs(s / kShakeDraws - 0.5) <= kShakeMeanTol)) o.fail("marginal mean");
  }
  if (!(worst_ulps <= kShakeSumUlps)) o.fail("normalisation");
}

void criterion_3(Outcome& o) {
  const std::vector<AgeGroup> four{AgeGroup::a18_30, AgeGroup::a30_40, AgeGroup::a40_50, AgeGroup::a50_60};
  const auto b = batches_for(four, 16);
  const auto s = backbone::init_reference_backbone({synthetic_300().shape, {32}, 16}, 3);
  dg::AlgorithmConfig cfg;

  {
    auto c = cfg;
    c.mmd_weight = 0.0;
    dg::Rng r1(11), r2(11);
    const bool same = dg::mmd_step(s, b, c, r1).state == dg::erm_step(s, b, c, r2).state;
    o.detail << "mmd0 " << (same ? "bitwise" : "differs") << "; ";
    if (!same) o.fail("mmd reduction");
  }
  {
    auto c = cfg;
    c.cdann_adv_weight = 0.0;
    dg::Rng r1(12), r2(12);
    const auto cd = dg::cdann_step(s, b, c, r1).state;
    const auto e = dg::erm_step(s, b, c, r2).state;
    const bool same = cd.theta == e.theta && cd.theta_prime == e.theta_prime;
    o.detail << "cdann0 " << (same ? "bitwise" : "differs") << "; ";
    if (!same) o.fail("cdann reduction");
  }
  {
    const std::array<double, 3> w{0.2, 0.3, 0.5};
    double worst = 0;
    for (std::size_t test = 0; test < b.size(); ++test) {
      std::vector<double> weights(b.size(), 1.0 / static_cast<double>(b.size() - 1));
      weights[test] = 1.0;
      const auto ref = dg::weighted_task_gradient(s, b, weights, w);
      for (bool first_order : {true, false}) {
        const auto g = dg::mldg_outer_gradient(s, b, test, w, 0.0, 1.0, first_order);
        for (std::size_t i = 0; i < g.gradient.size(); ++i) worst = std::max(worst, std::abs(g.gradient[i] - ref.gradient[i]));
      }
    }
    o.detail << "mldg max diff " << worst << "; ";
    if (!(worst <= kReductionTol)) o.fail("mldg reduction");
  }
  {
    auto c = cfg;
    c.mixup_lambda = 1.0;
    bool all_same = true;
    for (std::size_t k = 2; k <= 5; ++k) {
      std::vector<AgeGroup> groups(kAllAgeGroups.begin(), kAllAgeGroups.begin() + static_cast<std::ptrdiff_t>(k));
      const auto bk = batches_for(groups, 16);
      dg::Rng r1(13), r2(13);
      const auto m = dg::mixup_step(s, bk, c, r1);
      dg::DomainBatchSet firsts;
      for (const auto& [first, second] : m.diagnostics.mixup_pairs) firsts.push_back(bk[first]);
      all_same = all_same && m.state == dg::erm_step(s, firsts, c, r2).state;
    }
    o.detail << "mixup(lambda=1) " << (all_same ? "bitwise" : "differs");
    if (!all_same) o.fail("mixup reduction");
  }
}

void criterion_4(Outcome& o) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g(0, 1);
  auto cloud = [&](std::mt19937_64& r, double mu) {
    Matrix<double> m(512, 4);
    for (auto& v : m.data) v = mu + g(r);
    return m;
  };
  const auto x = cloud(rng, 0.0);
  const double self = metrics::mmd_squared(x, x, metrics::kDefaultBandwidths);
  o.detail << "mmd(X,X)=" << self << "; ";
  if (!(self <= kMmdSelfTol)) o.fail("self distance");
  int monotone = 0;
  for (int seed = 0; seed < kMmdSeeds; ++seed) {
    std::mt19937_64 r(1000 + seed);
    const auto base = cloud(r, 0.0);
    double prev = -1.0;
    bool ok = true;
    for (double mu : {0.0, 1.0, 2.0, 3.0}) {
      const double v = metrics::mmd_squared(base, cloud(r, mu), metrics::kDefaultBandwidths);
      ok = ok && v > prev;
      prev = v;
    }
    monotone += ok;
  }
  o.detail << "strictly increasing in " << monotone << "/" << kMmdSeeds << " seeds";
  if (monotone < kMmdRequired) o.fail("monotonicity");
}

void criterion_5(Outcome& o) {
  const auto& data = synthetic_300();
  const auto s = backbone::init_reference_backbone({data.shape, {4}, 3}, 19);
  const std::size_t n_params = s.theta.size() + s.theta_prime.size();
  o.detail << n_params << " parameters; ";
  if (n_params > kMldgMaxParams) o.fail("model too large");
  const auto b = batches_for({AgeGroup::a18_30, AgeGroup::a40_50, AgeGroup::a60_85}, 8);
  const std::array<double, 3> w{0.3, 0.3, 0.4};
  const double inner = 0.5, beta = 1.0;
  const std::size_t test = 2;
  const auto exact = dg::mldg_outer_gradient(s, b, test, w, inner, beta, false);
  double worst = 0.0;
  auto p = s;
  for (std::size_t i = 0; i < n_params; ++i) {
    double& slot = i < p.theta.size() ? p.theta[i] : p.theta_prime[i - p.theta.size()];
    const double keep = slot;
    slot = keep + kFdStep;
    const double up = dg::mldg_outer_objective(p, b, test, w, inner, beta);
    slot = keep - kFdStep;
    const double dn = dg::mldg_outer_objective(p, b, test, w, inner, beta);
    slot = keep;
    worst = std::max(worst, rel_err(exact.gradient[i], (up - dn) / (2 * kFdStep)));
  }
  o.detail << "worst rel " << worst;
  if (!(worst < kMldgRelTol)) o.fail("second-order gradient");
}

void criterion_6(Outcome& o) {
  // Loss-difference table from the four-vs-five loss rows.
  auto report_of = [](const reference::Row& losses) {
    reporting::EvalReport r;
    for (std::size_t i = 0; i < 5; ++i) r.domains[i].loss = losses[i];
    return r;
  };
  int bad_cells = 0;
  std::ostringstream cells;
  for (std::size_t row = 0; row < 5; ++row) {
    const auto diff = reporting::loss_difference(report_of(reference::kLossWithout[row]), report_of(reference::kLossWithAll));
    for (std::size_t col = 0; col < 5; ++col) {
      const double want = reference::kLossIncrease[row][col];
      if (!(std::abs(diff[col] - want) <= kTableDiffTol)) {
        ++bad_cells;
        cells << " without " << age_group_name(age_group_from_ordinal(row)) << "/" << age_group_name(age_group_from_ordinal(col))
              << ": " << reporting::format_metric(diff[col]) << " vs " << reporting::format_metric(want) << ";";
      }
    }
  }
  o.detail << "loss-diff cells outside tolerance: " << bad_cells << "/25;" << cells.str() << " ";
  if (bad_cells) o.fail("loss-diff table");

  // Mean column of the leave-one-domain-out table, through the emitted CSV.
  std::vector<reporting::RunRecord> records;
  for (AgeGroup g : kAllAgeGroups) {
    reporting::RunRecord r;
    r.config.algorithm.algorithm = dg::Algorithm::cdann;
    r.config.active_domains = DomainSet::all();
    r.config.active_domains.erase(g);
    r.report[g].arousal_ccc = reference::kCdannArousal[ordinal(g)];
    r.report[g].valence_ccc = reference::kCdannValence[ordinal(g)];
    r.report[g].accuracy = reference::kCdannAccuracy[ordinal(g)];
    records.push_back(r);
  }
  const auto csv = reporting::emit_table(records, reporting::Layout::loo_comparison, reporting::Format::csv);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);  // header
  for (std::size_t m = 0; m < 3 && std::getline(lines, line); ++m) {
    const double mean = std::stod(line.substr(line.rfind(',') + 1));
    o.detail << "mean[" << m << "]=" << reporting::format_metric(mean) << " ";
    if (!(std::abs(mean - reference::kCdannMeans[m]) <= kMeanTol)) o.fail("mean column");
  }

  // Size totals through the sizes layout.
  for (const auto& row : reference::kSizes) {
    reporting::RunRecord r;
    r.config.active_domains = DomainSet::all();
    for (int h : row.held_out) {
      if (h >= 0) r.config.active_domains.erase(age_group_from_ordinal(static_cast<std::size_t>(h)));
    }
    for (std::size_t i = 0; i < 5; ++i) r.train_sizes[i] = static_cast<std::size_t>(std::llround(row.pools[i] * 1000));
    const auto table = reporting::emit_table({r}, reporting::Layout::sizes, reporting::Format::csv);
    const auto last_line = table.substr(table.rfind(',', table.size() - 2) + 1);
    const std::string total = last_line.substr(0, last_line.find('\n'));
    char want[16];
    std::snprintf(want, sizeof(want), "%.1f", row.total);
    o.detail << "total " << total << (total == want ? " = " : " != ") << want << "; ";
    if (total != want) o.fail("sizes total " + std::string(want));
  }
}

config::TrainConfig end_to_end_config(dg::Algorithm a, std::uint64_t seed) {
  config::TrainConfig c;
  c.algorithm.algorithm = a;
  c.steps = 2000;
  c.seed = seed;
  return c;
}

void criterion_7(Outcome& o) {
  const auto& data = synthetic_300();
  auto c = end_to_end_config(dg::Algorithm::erm, 1);
  c.steps = 200;
  c.eval_every = 50;
  const auto runs = harness::leave_one_domain_out(c, data);
  o.detail << runs.size() << " runs; ";
  if (runs.size() != 5) o.fail("run count");
  std::set<AgeGroup> held;
  std::set<std::size_t> totals;
  std::size_t overlaps = 0;
  for (const auto& r : runs) {
    const auto out = r.record.held_out();
    if (out.size() != 1) {
      o.fail("held-out set size");
      continue;
    }
    const AgeGroup g = out.members().front();
    held.insert(g);
    std::size_t total = 0;
    for (auto n : r.record.train_sizes) total += n;
    totals.insert(total);
    const auto plan = harness::prepare_run(r.record.config, data);
    const auto visible = plan.visible_ids();
    const std::set<std::string> ids(visible.begin(), visible.end());
    for (const auto* part : {&data[g].train, &data[g].validation, &data[g].test}) {
      for (const auto& s : *part) overlaps += ids.count(s.id);
    }
  }
  o.detail << "held-out domains " << held.size() << "; id overlaps " << overlaps << "; distinct totals " << totals.size();
  if (held.size() != 5) o.fail("held-out coverage");
  if (overlaps != 0) o.fail("leakage");
  if (totals.size() != 1) o.fail("unequal budgets");
}

void criterion_8(Outcome& o) {
  const auto start = std::chrono::steady_clock::now();
  const auto& data = synthetic_300();
  for (auto a : {dg::Algorithm::erm, dg::Algorithm::cdann}) {
    const auto runs = harness::leave_one_domain_out(end_to_end_config(a, 2024), data);
    o.detail << dg::algorithm_name(a) << " acc/val:";
    for (const auto& r : runs) {
      const AgeGroup g = r.record.held_out().members().front();
      const auto& m = r.record.report[g];
      o.detail << " " << age_group_name(g) << "=" << reporting::format_metric(m.accuracy) << "/"
               << reporting::format_metric(m.valence_ccc);
      if (!(m.accuracy > kAccuracyFloor)) o.fail(std::string(dg::algorithm_name(a)) + " accuracy");
      if (!(m.valence_ccc > kValenceFloor)) o.fail(std::string(dg::algorithm_name(a)) + " valence");
    }
    o.detail << "; ";
  }
  const double took = seconds_since(start);
  o.detail << "loo runtime " << static_cast<int>(took) << " s; ";
  if (!(took < kEndToEndSeconds)) o.fail("runtime");

  // Every four-domain subset against every three-domain subset, scored on the held-out domains.
  std::vector<DomainSet> subsets;
  for (std::size_t mask = 0; mask < (1u << kNumAgeGroups); ++mask) {
    if (std::popcount(mask) != 3 && std::popcount(mask) != 4) continue;
    DomainSet s;
    for (AgeGroup g : kAllAgeGroups) {
      if (mask & (1u << ordinal(g))) s.insert(g);
    }
    subsets.push_back(s);
  }
  const std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  for (auto a : {dg::Algorithm::erm, dg::Algorithm::cdann}) {
    double sum[2] = {0, 0};
    std::size_t count[2] = {0, 0};
    for (int seed = 0; seed < kDirectionSeeds; ++seed) {
      data::SynthSpec spec;
      spec.per_domain = {300, 300, 300, 300, 300};
      const auto split = data::synthesize_dataset(spec, 500 + seed);
      const auto runs = harness::subset_ablation(end_to_end_config(a, 500 + seed), split, subsets, jobs);
      for (const auto& r : runs) {
        const std::size_t k = r.record.config.active_domains.size() == 4 ? 0 : 1;
        for (AgeGroup g : r.record.held_out().members()) {
          sum[k] += r.record.report[g].accuracy;
          ++count[k];
        }
      }
    }
    const double four = sum[0] / count[0], three = sum[1] / count[1];
    o.detail << dg::algorithm_name(a) << " held-out acc 4 domains " << std::setprecision(4) << four << " vs 3 domains "
             << three << std::setprecision(6) << "; ";
    if (!(four >= three)) o.fail(std::string(dg::algorithm_name(a)) + " four-vs-three direction");
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string strip_clock(const std::string& text) {
  static const std::regex clock("\"wall_clock_seconds\": ?[-0-9.eE+]+");
  return std::regex_replace(text, clock, "\"wall_clock_seconds\":0");
}

void criterion_9(Outcome& o) {
  const fs::path root = fs::temp_directory_path() / "agedg-acceptance-c9";
  fs::remove_all(root);
  struct Experiment {
    std::string name;
    std::vector<std::string> args;
  };
  const std::vector<Experiment> experiments{
      {"loo", {"loo", "--algorithm", "cdann", "--seed", "7"}},
      {"train", {"train", "--algorithm", "mldg", "--seed", "7"}},
      {"ablate", {"ablate", "--algorithm", "mixup", "--seed", "7", "--set", "training.steps=500", "--jobs", "2"}},
  };
  std::ostringstream sink;
  for (const auto& e : experiments) {
    std::vector<std::string> files[2];
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = root / (e.name + "-" + std::to_string(rep));
      auto args = e.args;
      args.insert(args.end(), {"--out", out.string()});
      const int code = cli::run_cli(args, sink, sink);
      if (code != 0) {
        o.fail(e.name + " exit " + std::to_string(code));
        continue;
      }
      std::vector<fs::path> paths;
      for (const auto& f : fs::recursive_directory_iterator(out)) {
        if (f.is_regular_file()) paths.push_back(fs::relative(f.path(), out));
      }
      std::sort(paths.begin(), paths.end());
      for (const auto& p : paths) files[rep].push_back(p.string() + "\n" + strip_clock(slurp(out / p)));
    }
    const bool same = !files[0].empty() && files[0] == files[1];
    o.detail << e.name << ": " << files[0].size() << " files " << (same ? "identical" : "DIFFER") << "; ";
    if (!same) o.fail(e.name + " not reproducible");
  }
  fs::remove_all(root);
}

const std::array<std::pair<const char*, void (*)(Outcome&)>, 9> kCriteria{{
    {"loss/metric correctness", criterion_1},
    {"shake-shake contract", criterion_2},
    {"reduction identities", criterion_3},
    {"mmd estimator", criterion_4},
    {"mldg exact mode", criterion_5},
    {"published-table arithmetic", criterion_6},
    {"protocol integrity", criterion_7},
    {"end-to-end desk-scale sanity", criterion_8},
    {"cli determinism", criterion_9},
}};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  bool all_pass = true;
  for (std::size_t i = 0; i < kCriteria.size(); ++i) {
    if (only != 0 && static_cast<std::size_t>(only) != i + 1) continue;
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      kCriteria[i].second(o);
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    all_pass = all_pass && o.pass;
    std::cout << "criterion " << i + 1 << " (" << kCriteria[i].first << "): " << (o.pass ? "PASS" : "FAIL") << " | "
              << o.detail.str() << " | " << std::fixed << std::setprecision(1) << seconds_since(start) << " s"
              << std::defaultfloat << std::setprecision(6) << std::endl;
  }
  return all_pass ? 0 : 1;
}
