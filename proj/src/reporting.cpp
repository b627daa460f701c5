#include "agedg/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "agedg/error.hpp"
#include "agedg/metrics.hpp"

namespace agedg::reporting {

using nlohmann::json;

DomainMetrics EvalReport::mean() const {
  std::array<double, kNumAgeGroups> ar{}, va{}, acc{}, loss{};
  for (std::size_t i = 0; i < kNumAgeGroups; ++i) {
    ar[i] = domains[i].arousal_ccc;
    va[i] = domains[i].valence_ccc;
    acc[i] = domains[i].accuracy;
    loss[i] = domains[i].loss;
  }
  return {mean_of(ar), mean_of(va), mean_of(acc), mean_of(loss)};
}

double mean_of(std::span<const double> values) {
  if (values.empty()) throw DataError("mean of an empty row");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

namespace {

double safe_ccc(std::span<const double> y, std::span<const double> p) {
  if (y.size() < 2) {
    metrics::note_degenerate_substitution();
    return 0.0;
  }
  try {
    return metrics::ccc(y, p);
  } catch (const DegenerateVarianceError&) {
    metrics::note_degenerate_substitution();
    return 0.0;
  }
}

}  // namespace

DomainMetrics metrics_from_predictions(const metrics::PredictionBatch& pred, const metrics::LabelBatch& labels) {
  if (labels.size() == 0) throw DataError("cannot evaluate on an empty sample set");
  DomainMetrics m;
  m.arousal_ccc = safe_ccc(labels.arousal, pred.arousal);
  m.valence_ccc = safe_ccc(labels.valence, pred.valence);
  m.accuracy = metrics::accuracy(pred, labels);
  if (labels.size() >= 2) {
    m.loss = metrics::composite_loss(pred, labels, metrics::ShakeWeights::equal(),
                                     metrics::CorrelationPolicy::substitute_zero);
  } else {
    // One sample: both correlation terms degenerate to 1 - 0.
    const auto w = metrics::ShakeWeights::equal().normalized();
    const double mse = metrics::mse(labels.valence, pred.valence) + metrics::mse(labels.arousal, pred.arousal);
    m.loss = metrics::cross_entropy(pred.logits, labels) + w[0] * mse + w[1] * 1.0 + w[2] * 1.0;
  }
  return m;
}

DomainMetrics evaluate_samples(const backbone::ModelState& model, const std::vector<const Sample*>& samples,
                               const InputShape& shape) {
  if (samples.empty()) throw DataError("cannot evaluate on an empty sample set");
  const auto inputs = data::stack_inputs(samples, shape.size());
  return metrics_from_predictions(backbone::forward(model, inputs), metrics::LabelBatch::from_samples(samples));
}

EvalReport evaluate(const backbone::ModelState& model, const DomainSplit& split) {
  EvalReport report;
  for (AgeGroup g : kAllAgeGroups) {
    const auto& test = split[g].test;
    if (test.empty()) {
      throw DataError("test set of age group " + std::string(age_group_name(g)) + " is empty");
    }
    std::vector<const Sample*> ptrs;
    ptrs.reserve(test.size());
    for (const auto& s : test) ptrs.push_back(&s);
    report[g] = evaluate_samples(model, ptrs, split.shape);
  }
  return report;
}

std::array<double, kNumAgeGroups> loss_difference(const EvalReport& report_without, const EvalReport& report_all) {
  std::array<double, kNumAgeGroups> out{};
  for (std::size_t i = 0; i < kNumAgeGroups; ++i) {
    const double a = report_without.domains[i].loss;
    const double b = report_all.domains[i].loss;
    if (!std::isfinite(a) || !std::isfinite(b)) {
      throw DataError("loss missing for age group " + std::string(age_group_name(age_group_from_ordinal(i))));
    }
    out[i] = a - b;
  }
  return out;
}

bool operator==(const RunRecord& a, const RunRecord& b) {
  return config::to_json(a.config) == config::to_json(b.config) && a.tag == b.tag &&
         a.selected_step == b.selected_step && a.selection_score == b.selection_score &&
         a.selection_trace == b.selection_trace && a.report == b.report && a.train_sizes == b.train_sizes &&
         a.wall_clock_seconds == b.wall_clock_seconds && a.harness_version == b.harness_version;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

json record_to_json(const RunRecord& r) {
  json report = json::array();
  for (AgeGroup g : kAllAgeGroups) {
    const auto& m = r.report[g];
    report.push_back({{"domain", std::string(age_group_name(g))},
                      {"arousal_ccc", m.arousal_ccc},
                      {"valence_ccc", m.valence_ccc},
                      {"accuracy", m.accuracy},
                      {"loss", m.loss}});
  }
  json trace = json::array();
  for (const auto& [step, score] : r.selection_trace) trace.push_back({step, score});
  return {{"config", config::to_json(r.config)},
          {"tag", r.tag},
          {"selected_step", r.selected_step},
          {"selection_score", r.selection_score},
          {"selection_trace", trace},
          {"report", report},
          {"train_sizes", r.train_sizes},
          {"wall_clock_seconds", r.wall_clock_seconds},
          {"harness_version", r.harness_version}};
}

RunRecord record_from_json(const json& j) {
  RunRecord r;
  r.config = config::train_config_from_json(j.at("config"));
  r.tag = j.at("tag").get<std::string>();
  r.selected_step = j.at("selected_step").get<std::size_t>();
  r.selection_score = j.at("selection_score").get<double>();
  for (const auto& e : j.at("selection_trace")) {
    r.selection_trace.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<double>());
  }
  const auto& report = j.at("report");
  if (!report.is_array() || report.size() != kNumAgeGroups) throw DataError("report must list five age groups");
  for (const auto& e : report) {
    const auto g = parse_age_group(e.at("domain").get<std::string>());
    if (!g) throw DataError("unknown age group in report");
    auto& m = r.report[*g];
    m.arousal_ccc = e.at("arousal_ccc").get<double>();
    m.valence_ccc = e.at("valence_ccc").get<double>();
    m.accuracy = e.at("accuracy").get<double>();
    m.loss = e.at("loss").get<double>();
  }
  r.train_sizes = j.at("train_sizes").get<data::DomainCounts>();
  r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  r.harness_version = j.at("harness_version").get<std::string>();
  return r;
}

namespace {

json header_json() { return {{"format", kRecordsFormat}, {"version", kRecordsVersion}}; }

void check_header(const std::string& line, const std::filesystem::path& path) {
  const json h = json::parse(line, nullptr, false);
  if (h.is_discarded() || !h.is_object() || h.value("format", "") != kRecordsFormat) {
    throw DataError(1, "header", path.string() + " is not a run-record file");
  }
  const int version = h.value("version", -1);
  if (version != kRecordsVersion) {
    throw DataError(1, "version",
                    "results file version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kRecordsVersion) + ")");
  }
}

}  // namespace

void persist_records(const std::vector<RunRecord>& records, const std::filesystem::path& path) {
  bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  if (!fresh) {
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    check_header(first, path);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot open results file " + path.string() + " for writing");
  if (fresh) out << header_json().dump() << '\n';
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
  if (!out) throw Error("failed writing results file " + path.string());
}

std::vector<RunRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open results file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(1, "header", "results file " + path.string() + " is empty");
  check_header(line, path);
  std::vector<RunRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError(line_no, "record", "corrupted record on line " + std::to_string(line_no));
    try {
      records.push_back(record_from_json(j));
    } catch (const json::exception& e) {
      throw DataError(line_no, "record", "corrupted record on line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw DataError(line_no, "record", "invalid record on line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

std::string_view layout_name(Layout l) noexcept {
  switch (l) {
    case Layout::loo_comparison: return "loo-comparison";
    case Layout::four_vs_five: return "four-vs-five";
    case Layout::loss_diff: return "loss-diff";
    case Layout::sizes: return "sizes";
    case Layout::subset: return "subset";
  }
  return "?";
}

std::optional<Layout> parse_layout(std::string_view name) noexcept {
  for (Layout l : {Layout::loo_comparison, Layout::four_vs_five, Layout::loss_diff, Layout::sizes, Layout::subset}) {
    if (layout_name(l) == name) return l;
  }
  return std::nullopt;
}

std::optional<Format> parse_format(std::string_view name) noexcept {
  if (name == "markdown" || name == "md") return Format::markdown;
  if (name == "csv") return Format::csv;
  return std::nullopt;
}

std::string format_metric(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string format_thousands(double count) {
  if (count == 0.0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f", count / 1000.0);
  return buf;
}

std::vector<std::string> sizes_row(const data::DomainCounts& counts) {
  std::vector<std::string> row;
  std::size_t total = 0;
  for (std::size_t c : counts) {
    row.push_back(format_thousands(static_cast<double>(c)));
    total += c;
  }
  row.push_back(format_thousands(static_cast<double>(total)));
  return row;
}

std::string held_out_label(const DomainSet& held_out) {
  if (held_out.empty()) return "With All";
  std::string s = "Without [";
  bool first = true;
  for (AgeGroup g : held_out.members()) {
    if (!first) s += " & ";
    s += age_group_name(g);
    first = false;
  }
  return s + "]";
}

namespace {

using Table = std::vector<std::vector<std::string>>;

std::string csv_cell(const std::string& c) {
  if (c.find_first_of(",\"\n") == std::string::npos) return c;
  std::string out = "\"";
  for (char ch : c) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string render(const Table& t, Format format) {
  std::ostringstream out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    if (format == Format::csv) {
      for (std::size_t c = 0; c < t[r].size(); ++c) out << (c ? "," : "") << csv_cell(t[r][c]);
      out << '\n';
    } else {
      out << '|';
      for (const auto& c : t[r]) out << ' ' << c << " |";
      out << '\n';
      if (r == 0) {
        out << '|';
        for (std::size_t c = 0; c < t[r].size(); ++c) out << (c == 0 ? " --- |" : " ---: |");
        out << '\n';
      }
    }
  }
  return out.str();
}

std::vector<std::string> domain_header(std::string a, std::string b) {
  std::vector<std::string> h{std::move(a), std::move(b)};
  for (AgeGroup g : kAllAgeGroups) h.emplace_back(age_group_name(g));
  return h;
}

/// Latest record per held-out set, ordered by number held out, then by
/// descending ordinal of the held-out domains; "With All" last.
std::vector<const RunRecord*> latest_by_subset(const std::vector<RunRecord>& records) {
  std::map<std::uint8_t, const RunRecord*> latest;
  for (const auto& r : records) latest[r.held_out().mask()] = &r;
  std::vector<const RunRecord*> out;
  for (const auto& [mask, r] : latest) out.push_back(r);
  std::stable_sort(out.begin(), out.end(), [](const RunRecord* a, const RunRecord* b) {
    const auto ha = a->held_out(), hb = b->held_out();
    if (ha.empty() != hb.empty()) return hb.empty();
    if (ha.size() != hb.size()) return ha.size() < hb.size();
    return ha.mask() > hb.mask();
  });
  return out;
}

void require_missing_empty(const std::vector<std::string>& missing, Layout layout) {
  if (missing.empty()) return;
  std::string msg = "layout " + std::string(layout_name(layout)) + " is missing cells:";
  for (const auto& m : missing) msg += " " + m + ";";
  msg.pop_back();
  throw DataError(msg);
}

const std::array<std::pair<const char*, double DomainMetrics::*>, 4> kMetricRows{{
    {"Arousal", &DomainMetrics::arousal_ccc},
    {"Valence", &DomainMetrics::valence_ccc},
    {"Accuracy", &DomainMetrics::accuracy},
    {"Loss", &DomainMetrics::loss},
}};

Table loo_comparison(const std::vector<RunRecord>& records) {
  // algorithm -> held-out ordinal -> record
  std::map<dg::Algorithm, std::array<const RunRecord*, kNumAgeGroups>> cells;
  for (const auto& r : records) {
    const auto held = r.held_out();
    if (held.size() != 1) continue;
    auto& row = cells.try_emplace(r.config.algorithm.algorithm).first->second;
    row[ordinal(held.members().front())] = &r;
  }
  if (cells.empty()) throw DataError("layout loo-comparison needs leave-one-domain-out records");
  std::vector<std::string> missing;
  Table t;
  auto header = domain_header("Algorithm", "Metric");
  header.emplace_back("Mean");
  t.push_back(header);
  for (dg::Algorithm a : dg::kAllAlgorithms) {
    const auto it = cells.find(a);
    if (it == cells.end()) continue;
    for (std::size_t m = 0; m < 3; ++m) {
      std::vector<std::string> row{m == 0 ? std::string(dg::algorithm_name(a)) : "", kMetricRows[m].first};
      std::array<double, kNumAgeGroups> vals{};
      bool complete = true;
      for (AgeGroup g : kAllAgeGroups) {
        const RunRecord* r = it->second[ordinal(g)];
        if (!r) {
          if (m == 0) missing.push_back(std::string(dg::algorithm_name(a)) + " without " + std::string(age_group_name(g)));
          complete = false;
          row.emplace_back("");
          continue;
        }
        vals[ordinal(g)] = r->report[g].*kMetricRows[m].second;
        row.push_back(format_metric(vals[ordinal(g)]));
      }
      row.push_back(complete ? format_metric(mean_of(vals)) : "");
      t.push_back(std::move(row));
    }
  }
  require_missing_empty(missing, Layout::loo_comparison);
  return t;
}

Table subset_blocks(const std::vector<RunRecord>& records, bool with_loss) {
  Table t{domain_header("Training", "Metric")};
  for (const RunRecord* r : latest_by_subset(records)) {
    const std::size_t rows = with_loss ? 4 : 3;
    for (std::size_t m = 0; m < rows; ++m) {
      std::vector<std::string> row{m == 0 ? held_out_label(r->held_out()) : "", kMetricRows[m].first};
      for (AgeGroup g : kAllAgeGroups) row.push_back(format_metric(r->report[g].*kMetricRows[m].second));
      t.push_back(std::move(row));
    }
  }
  return t;
}

Table four_vs_five(const std::vector<RunRecord>& records) {
  std::vector<RunRecord> picked;
  std::array<bool, kNumAgeGroups + 1> seen{};
  for (const auto& r : records) {
    const auto held = r.held_out();
    if (held.size() > 1) continue;
    picked.push_back(r);
    seen[held.empty() ? kNumAgeGroups : ordinal(held.members().front())] = true;
  }
  std::vector<std::string> missing;
  for (AgeGroup g : kAllAgeGroups) {
    if (!seen[ordinal(g)]) missing.push_back("Without [" + std::string(age_group_name(g)) + "]");
  }
  if (!seen[kNumAgeGroups]) missing.emplace_back("With All");
  require_missing_empty(missing, Layout::four_vs_five);
  return subset_blocks(picked, true);
}

Table loss_diff(const std::vector<RunRecord>& records) {
  const RunRecord* all = nullptr;
  std::array<const RunRecord*, kNumAgeGroups> without{};
  for (const auto& r : records) {
    const auto held = r.held_out();
    if (held.empty()) all = &r;
    if (held.size() == 1) without[ordinal(held.members().front())] = &r;
  }
  std::vector<std::string> missing;
  if (!all) missing.emplace_back("With All");
  if (std::none_of(without.begin(), without.end(), [](auto* p) { return p != nullptr; })) {
    missing.emplace_back("any Without [X] run");
  }
  require_missing_empty(missing, Layout::loss_diff);
  Table t{domain_header("Training", "Metric")};
  for (AgeGroup g : kAllAgeGroups) {
    const RunRecord* r = without[ordinal(g)];
    if (!r) continue;
    std::vector<std::string> row{held_out_label(r->held_out()), "+Loss"};
    for (double d : loss_difference(r->report, all->report)) row.push_back(format_metric(d));
    t.push_back(std::move(row));
  }
  return t;
}

Table sizes(const std::vector<RunRecord>& records) {
  std::vector<std::string> header{"Training"};
  for (AgeGroup g : kAllAgeGroups) header.emplace_back(age_group_name(g));
  header.emplace_back("Total");
  Table t{header};
  for (const RunRecord* r : latest_by_subset(records)) {
    std::vector<std::string> row{held_out_label(r->held_out())};
    for (auto& c : sizes_row(r->train_sizes)) row.push_back(std::move(c));
    t.push_back(std::move(row));
  }
  return t;
}

}  // namespace

std::string emit_table(const std::vector<RunRecord>& records, Layout layout, Format format) {
  if (records.empty()) throw DataError("no run records to tabulate");
  Table t;
  switch (layout) {
    case Layout::loo_comparison: t = loo_comparison(records); break;
    case Layout::four_vs_five: t = four_vs_five(records); break;
    case Layout::loss_diff: t = loss_diff(records); break;
    case Layout::sizes: t = sizes(records); break;
    case Layout::subset: t = subset_blocks(records, false); break;
  }
  return render(t, format);
}

}  // namespace agedg::reporting
