#include "agedg/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "agedg/config.hpp"
#include "agedg/data.hpp"
#include "agedg/error.hpp"
#include "agedg/harness.hpp"
#include "agedg/reporting.hpp"

namespace agedg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ExperimentFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string algorithm;
  std::string out;
  std::size_t jobs = 1;
  std::string format = "markdown";
};

void add_experiment_flags(CLI::App* sub, ExperimentFlags& f, bool with_jobs) {
  sub->add_option("--config", f.config_path, "JSON config file");
  sub->add_option("--set", f.overrides, "Override a config key (dotted.key=value); repeatable");
  sub->add_option("--seed", f.seed, "Training seed; wins over the config");
  sub->add_option("--algorithm", f.algorithm, "erm, mixup, mmd, cdann or mldg");
  sub->add_option("--out", f.out, "Output directory (default $AGEDG_OUT or ./agedg-out)");
  sub->add_option("--format", f.format, "markdown or csv")->check(CLI::IsMember({"markdown", "csv"}));
  if (with_jobs) sub->add_option("--jobs", f.jobs, "Parallel runs")->check(CLI::PositiveNumber);
}

fs::path output_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("AGEDG_OUT"); env && *env) return env;
  return "agedg-out";
}

json resolve_document(const ExperimentFlags& f) {
  json doc = f.config_path.empty() ? config::default_document() : config::load_document(f.config_path);
  for (const auto& o : f.overrides) config::apply_override(doc, o);
  if (!f.algorithm.empty()) config::apply_override(doc, "algorithm.id=\"" + f.algorithm + "\"");
  if (f.seed) doc["training"]["seed"] = *f.seed;
  return doc;
}

reporting::Format format_of(const std::string& s) {
  const auto f = reporting::parse_format(s);
  if (!f) throw ConfigError("unknown format '" + s + "'");
  return *f;
}

void write_runs(const std::vector<harness::RunResult>& results, const fs::path& root) {
  std::vector<reporting::RunRecord> records;
  for (const auto& r : results) {
    const auto& c = r.record.config;
    const fs::path dir = root / "runs" / (config::config_hash(c) + "-s" + std::to_string(c.seed));
    fs::create_directories(dir);
    backbone::save_checkpoint(r.selected, dir / "checkpoint.bin");
    std::ofstream rec(dir / "record.json", std::ios::binary | std::ios::trunc);
    rec << reporting::record_to_json(r.record).dump(2) << '\n';
    if (!rec) throw Error("failed writing " + (dir / "record.json").string());
    records.push_back(r.record);
  }
  reporting::persist_records(records, root / "results.jsonl");
}

std::vector<reporting::RunRecord> records_of(const std::vector<harness::RunResult>& results) {
  std::vector<reporting::RunRecord> out;
  for (const auto& r : results) out.push_back(r.record);
  return out;
}

std::vector<DomainSet> ablation_subsets(const json& doc) {
  std::vector<DomainSet> subsets;
  const auto& list = doc.at("ablation").at("subsets");
  if (!list.is_array() || list.empty()) throw ConfigError("ablation.subsets must be a non-empty list");
  for (const auto& entry : list) {
    if (!entry.is_array()) throw ConfigError("each ablation subset must be a list of age groups");
    DomainSet s;
    for (const auto& name : entry) {
      const auto g = name.is_string() ? parse_age_group(name.get<std::string>()) : std::nullopt;
      if (!g) throw ConfigError("ablation.subsets: unknown age group " + name.dump());
      s.insert(*g);
    }
    if (s.empty()) throw ConfigError("ablation subsets must be non-empty");
    subsets.push_back(s);
  }
  return subsets;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Age-domain generalisation experiments for affect recognition"};
  app.require_subcommand(1, 1);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic manifest and input array");
  std::size_t n_domains = 5, per_domain = 300, dim = 20;
  double shift = 0.4;
  std::uint64_t synth_seed = 0;
  std::string synth_out, synth_mode = "features";
  synth->add_option("--domains", n_domains, "Number of age groups (1-5)")->check(CLI::Range(1, 5));
  synth->add_option("--per-domain", per_domain, "Samples per age group")->check(CLI::PositiveNumber);
  synth->add_option("--shift", shift, "Rotation step between neighbouring groups (radians)");
  synth->add_option("--dim", dim, "Input dimension");
  synth->add_option("--mode", synth_mode, "features or image")->check(CLI::IsMember({"features", "image"}));
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--out", synth_out, "Output directory");

  ExperimentFlags train_f, loo_f, ablate_f;
  auto* train = app.add_subcommand("train", "Train one configuration and select a checkpoint");
  add_experiment_flags(train, train_f, false);
  auto* loo = app.add_subcommand("loo", "Leave-one-domain-out over all five age groups");
  add_experiment_flags(loo, loo_f, true);
  auto* ablate = app.add_subcommand("ablate", "Train on each configured subset of age groups");
  add_experiment_flags(ablate, ablate_f, true);

  auto* report = app.add_subcommand("report", "Recompute tables from a results file");
  std::string results_path, layout = "loo-comparison", report_format = "markdown";
  report->add_option("--results", results_path, "Results file (JSONL)")->required();
  report->add_option("--layout", layout, "loo-comparison, four-vs-five, loss-diff, sizes or subset")
      ->check(CLI::IsMember({"loo-comparison", "four-vs-five", "loss-diff", "sizes", "subset"}));
  report->add_option("--format", report_format, "markdown or csv")->check(CLI::IsMember({"markdown", "csv"}));

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "agedg: usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (synth->parsed()) {
      data::SynthSpec spec;
      spec.per_domain.assign(n_domains, per_domain);
      spec.dim = dim;
      spec.shift = shift;
      spec.mode = synth_mode == "image" ? InputMode::image : InputMode::features;
      auto ds = data::synthesize_samples(spec, synth_seed);
      const fs::path root = output_root(synth_out);
      fs::create_directories(root);
      for (std::size_t i = 0; i < ds.samples.size(); ++i) ds.samples[i].path = "inputs.bin#" + std::to_string(i);
      data::write_input_array(root / "inputs.bin", ds.shape, ds.samples);
      data::write_manifest(root / "manifest.csv", ds.samples);
      json meta = {{"domains", n_domains}, {"per_domain", per_domain}, {"shift", shift}, {"dim", dim},
                   {"mode", synth_mode}, {"seed", synth_seed}, {"rows", ds.samples.size()}};
      std::ofstream(root / "synth.json", std::ios::binary | std::ios::trunc) << meta.dump(2) << '\n';
      out << "wrote " << ds.samples.size() << " samples to " << (root / "manifest.csv").string() << '\n';
      return 0;
    }
    if (report->parsed()) {
      const auto records = reporting::load_records(results_path);
      out << reporting::emit_table(records, *reporting::parse_layout(layout), format_of(report_format));
      return 0;
    }

    ExperimentFlags& f = train->parsed() ? train_f : loo->parsed() ? loo_f : ablate_f;
    const json doc = resolve_document(f);
    const auto cfg = config::train_config_from_json(doc);
    const auto fmt = format_of(f.format);
    const fs::path root = output_root(f.out);
    const auto data = harness::load_data(cfg.data);

    std::vector<harness::RunResult> results;
    reporting::Layout table = reporting::Layout::subset;
    if (train->parsed()) {
      results.push_back(harness::train_and_select(cfg, data, reporting::held_out_label(cfg.active_domains.complement())));
    } else if (loo->parsed()) {
      results = harness::leave_one_domain_out(cfg, data, f.jobs);
      table = reporting::Layout::loo_comparison;
    } else {
      results = harness::subset_ablation(cfg, data, ablation_subsets(doc), f.jobs);
    }
    write_runs(results, root);
    out << reporting::emit_table(records_of(results), table, fmt);
    return 0;
  } catch (const ConfigError& e) {
    err << "agedg: config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "agedg: error: " << e.what() << '\n';
    return 1;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace agedg::cli
