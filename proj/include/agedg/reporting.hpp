#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "agedg/backbone.hpp"
#include "agedg/config.hpp"
#include "agedg/data.hpp"
#include "agedg/domain.hpp"

namespace agedg::reporting {

struct DomainMetrics {
  double arousal_ccc = 0.0;
  double valence_ccc = 0.0;
  double accuracy = 0.0;
  /// Cross-entropy plus the continuous terms with fixed 1/3 weights.
  double loss = 0.0;
  friend bool operator==(const DomainMetrics&, const DomainMetrics&) = default;
};

struct EvalReport {
  std::array<DomainMetrics, kNumAgeGroups> domains{};

  DomainMetrics& operator[](AgeGroup g) { return domains[ordinal(g)]; }
  const DomainMetrics& operator[](AgeGroup g) const { return domains[ordinal(g)]; }
  /// Arithmetic mean over the five domains, per field.
  DomainMetrics mean() const;
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Whole-set metrics of predictions against hard labels. Degenerate correlations count as 0.
DomainMetrics metrics_from_predictions(const metrics::PredictionBatch& pred, const metrics::LabelBatch& labels);
/// Whole-set metrics of `model` on `samples`. Degenerate correlations count as 0.
DomainMetrics evaluate_samples(const backbone::ModelState& model, const std::vector<const Sample*>& samples,
                               const InputShape& shape);
/// Evaluates on every domain's test set. Throws DataError naming an empty domain.
EvalReport evaluate(const backbone::ModelState& model, const DomainSplit& split);

/// Entry-wise loss(without) - loss(all).
std::array<double, kNumAgeGroups> loss_difference(const EvalReport& report_without, const EvalReport& report_all);

double mean_of(std::span<const double> values);

struct RunRecord {
  config::TrainConfig config;
  /// Free-form label, e.g. the subset that produced the run.
  std::string tag;
  std::size_t selected_step = 0;
  double selection_score = 0.0;
  std::vector<std::pair<std::size_t, double>> selection_trace;
  EvalReport report;
  data::DomainCounts train_sizes{};
  double wall_clock_seconds = 0.0;
  std::string harness_version;

  /// Domains absent from training.
  DomainSet held_out() const { return config.active_domains.complement(); }
};

bool operator==(const RunRecord& a, const RunRecord& b);

nlohmann::json record_to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

inline constexpr std::string_view kRecordsFormat = "agedg-runrecords";
inline constexpr int kRecordsVersion = 1;

/// Appends to a JSONL results file, writing the header line if the file is new.
void persist_records(const std::vector<RunRecord>& records, const std::filesystem::path& path);
/// Throws DataError on a version mismatch or a corrupted line (naming the line).
std::vector<RunRecord> load_records(const std::filesystem::path& path);

enum class Layout { loo_comparison, four_vs_five, loss_diff, sizes, subset };
enum class Format { markdown, csv };

std::string_view layout_name(Layout l) noexcept;
std::optional<Layout> parse_layout(std::string_view name) noexcept;
std::optional<Format> parse_format(std::string_view name) noexcept;

/// Renders records in one of the table layouts. Later records supersede
/// earlier ones with the same key. Throws DataError listing missing cells.
std::string emit_table(const std::vector<RunRecord>& records, Layout layout, Format format);

/// Metric cells with two decimals.
std::string format_metric(double v);
/// Sample counts in thousands with one decimal; zero prints as "0".
std::string format_thousands(double count);
/// Size cells of one row followed by the total.
std::vector<std::string> sizes_row(const data::DomainCounts& counts);

/// "Without [40-50 & 50-60]" / "With All".
std::string held_out_label(const DomainSet& held_out);

}  // namespace agedg::reporting
