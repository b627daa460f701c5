#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "agedg/cli.hpp"
#include "agedg/config.hpp"
#include "agedg/data.hpp"
#include "agedg/error.hpp"
#include "agedg/reporting.hpp"

using namespace agedg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "agedg-cli-tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string strip_clock(const std::string& text) {
  static const std::regex clock("\"wall_clock_seconds\":[-0-9.eE+]+");
  return std::regex_replace(text, clock, "\"wall_clock_seconds\":0");
}

const std::vector<std::string> kQuick{"--set", "training.steps=60", "--set", "training.eval_every=20",
                                      "--set", "data.synthetic.per_domain=[60,60,60,60,60]",
                                      "--set", "backbone.hidden=[8]", "--set", "backbone.feature_dim=6"};

std::vector<std::string> with_quick(std::vector<std::string> args) {
  args.insert(args.end(), kQuick.begin(), kQuick.end());
  return args;
}

}  // namespace

TEST_CASE("config overrides reject unknown keys") {
  auto doc = config::default_document();
  config::apply_override(doc, "training.steps=700");
  config::apply_override(doc, "algorithm.id=mmd");
  config::apply_override(doc, "algorithm.mixup.lambda=0.5");
  const auto cfg = config::train_config_from_json(doc);
  CHECK(cfg.steps == 700);
  CHECK(cfg.algorithm.algorithm == dg::Algorithm::mmd);
  CHECK(cfg.algorithm.mixup_lambda == 0.5);
  CHECK_THROWS_AS(config::apply_override(doc, "training.stepz=1"), ConfigError);
  CHECK_THROWS_AS(config::apply_override(doc, "nosuch=1"), ConfigError);
  CHECK_THROWS_AS(config::apply_override(doc, "training.steps"), ConfigError);
  config::apply_override(doc, "training.steps=\"many\"");
  CHECK_THROWS_AS(config::train_config_from_json(doc), ConfigError);
}

TEST_CASE("config documents round-trip and hash without the seed") {
  config::TrainConfig c;
  c.algorithm.algorithm = dg::Algorithm::cdann;
  c.active_domains = {AgeGroup::a18_30, AgeGroup::a50_60};
  c.seed = 3;
  const auto back = config::train_config_from_json(config::to_json(c));
  CHECK(config::to_json(back) == config::to_json(c));
  auto d = c;
  d.seed = 4;
  CHECK(config::config_hash(c) == config::config_hash(d));
  d.steps = 10;
  d.eval_every = 5;
  CHECK(config::config_hash(c) != config::config_hash(d));

  const auto dir = fresh_dir("cfg");
  std::ofstream(dir / "bad.json") << R"({"training": {"steps": 10, "typo": 1}})";
  CHECK_THROWS_AS(config::load_document(dir / "bad.json"), ConfigError);
  std::ofstream(dir / "ok.json") << R"({"training": {"steps": 10, "eval_every": 5}})";
  CHECK(config::train_config_from_json(config::load_document(dir / "ok.json")).steps == 10);
}

TEST_CASE("synth writes a manifest with every age group") {
  const auto dir = fresh_dir("synth");
  const auto r = run({"synth", "--domains", "5", "--per-domain", "300", "--shift", "0.4", "--out", dir.string()});
  REQUIRE(r.code == 0);
  const auto m = data::load_manifest(dir / "manifest.csv");
  CHECK(m.samples.size() == 1500);
  std::set<AgeGroup> groups;
  for (const auto& s : m.samples) groups.insert(s.domain);
  CHECK(groups.size() == 5);
  const auto ds = data::load_dataset(dir / "manifest.csv", dir / "inputs.bin");
  CHECK(ds.samples.size() == 1500);
  CHECK(ds.shape.size() == 20);
}

TEST_CASE("usage and configuration errors exit 2, runtime errors exit 1") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"train", "--jobs", "2"}).code == 2);
  const auto bad = run({"train", "--set", "training.nope=1"});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("training.nope") != std::string::npos);
  CHECK(std::count(bad.err.begin(), bad.err.end(), '\n') == 1);
  CHECK(run({"train", "--algorithm", "sgd"}).code == 2);
  CHECK(run({"report", "--results", "/nonexistent/results.jsonl"}).code == 1);
  const auto dir = fresh_dir("missing");
  CHECK(run({"train", "--out", dir.string(), "--set", "data.source=manifest", "--set",
             "data.manifest.path=" + (dir / "none.csv").string(), "--set",
             "data.manifest.inputs=" + (dir / "none.bin").string()})
            .code == 1);
}

TEST_CASE("train writes a record, a checkpoint and the results file") {
  const auto dir = fresh_dir("train");
  const auto r = run(with_quick({"train", "--out", dir.string(), "--seed", "9", "--set", "training.seed=1"}));
  REQUIRE(r.code == 0);
  const auto records = reporting::load_records(dir / "results.jsonl");
  REQUIRE(records.size() == 1);
  CHECK(records[0].config.seed == 9);
  const auto run_dir = dir / "runs" / (config::config_hash(records[0].config) + "-s9");
  CHECK(fs::exists(run_dir / "checkpoint.bin"));
  CHECK(fs::exists(run_dir / "record.json"));
  CHECK(backbone::load_checkpoint(run_dir / "checkpoint.bin").arch.feature_dim == 6);
}

TEST_CASE("training from a synthesised manifest leaves it untouched") {
  const auto dir = fresh_dir("manifest");
  REQUIRE(run({"synth", "--per-domain", "60", "--out", dir.string()}).code == 0);
  const auto before = slurp(dir / "manifest.csv");
  const auto r = run(with_quick({"train", "--out", (dir / "out").string(), "--set", "data.source=manifest", "--set",
                                 "data.manifest.path=" + (dir / "manifest.csv").string(), "--set",
                                 "data.manifest.inputs=" + (dir / "inputs.bin").string()}));
  CHECK(r.code == 0);
  CHECK(slurp(dir / "manifest.csv") == before);
}

TEST_CASE("loo is reproducible and reports through every layout") {
  const auto a = fresh_dir("loo-a");
  const auto b = fresh_dir("loo-b");
  for (const auto& dir : {a, b}) {
    const auto r = run(with_quick({"loo", "--algorithm", "cdann", "--seed", "7", "--out", dir.string()}));
    REQUIRE(r.code == 0);
    CHECK(r.out.find("cdann") != std::string::npos);
  }
  CHECK(strip_clock(slurp(a / "results.jsonl")) == strip_clock(slurp(b / "results.jsonl")));
  CHECK(reporting::load_records(a / "results.jsonl").size() == 5);

  // Add an all-domain run so the derived layouts have their inputs.
  REQUIRE(run(with_quick({"train", "--algorithm", "cdann", "--seed", "7", "--out", a.string()})).code == 0);
  const auto results = (a / "results.jsonl").string();
  const auto diff = run({"report", "--results", results, "--layout", "loss-diff", "--format", "csv"});
  REQUIRE(diff.code == 0);
  CHECK(diff.out.find("Without [18-30],+Loss,") != std::string::npos);
  for (const char* layout : {"loo-comparison", "four-vs-five", "sizes", "subset"}) {
    CHECK(run({"report", "--results", results, "--layout", layout}).code == 0);
  }
}

TEST_CASE("ablate runs the configured subsets with one budget") {
  const auto dir = fresh_dir("ablate");
  std::ofstream(dir / "cfg.json") << R"({"ablation": {"subsets": [["18-30","30-40","60-85"], ["18-30","30-40","40-50","60-85"]]}})";
  const auto r = run(with_quick({"ablate", "--config", (dir / "cfg.json").string(), "--jobs", "2", "--out", dir.string()}));
  REQUIRE(r.code == 0);
  const auto recs = reporting::load_records(dir / "results.jsonl");
  REQUIRE(recs.size() == 2);
  std::size_t t0 = 0, t1 = 0;
  for (auto n : recs[0].train_sizes) t0 += n;
  for (auto n : recs[1].train_sizes) t1 += n;
  CHECK(t0 == t1);
  CHECK(r.out.find("Without [40-50 & 50-60]") != std::string::npos);
}
