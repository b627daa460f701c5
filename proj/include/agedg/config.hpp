#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "agedg/algorithms.hpp"
#include "agedg/data.hpp"
#include "agedg/domain.hpp"

namespace agedg::config {

struct BackboneConfig {
  std::vector<std::size_t> hidden{64};
  std::size_t feature_dim = 32;
  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

struct DataSource {
  enum class Kind { synthetic, manifest };
  Kind kind = Kind::synthetic;
  data::SynthSpec synth;
  std::uint64_t synth_seed = 0;
  std::string manifest;
  std::string inputs;
  data::SplitFractions split;
  std::uint64_t split_seed = 0;
};

struct TrainConfig {
  dg::AlgorithmConfig algorithm;
  BackboneConfig backbone;
  DomainSet active_domains = DomainSet::all();
  /// 0 means "all available" for a single run, or the largest budget every
  /// run of a batch can satisfy.
  std::size_t total_train_budget = 0;
  std::size_t steps = 2000;
  std::size_t eval_every = 100;
  /// Samples per domain per step.
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  DataSource data;

  /// Throws ConfigError.
  void validate() const;
};

/// Full default configuration document, including CLI-only sections.
nlohmann::json default_document();

/// Merges `overlay` into `base`; keys absent from `base` are rejected.
void merge_strict(nlohmann::json& base, const nlohmann::json& overlay, const std::string& prefix = "");
/// Applies a dotted `key=value` override. The value is parsed as JSON when
/// possible, otherwise taken as a string. Unknown keys throw ConfigError.
void apply_override(nlohmann::json& doc, const std::string& assignment);
/// Reads a JSON config file and merges it onto the defaults.
nlohmann::json load_document(const std::filesystem::path& path);

nlohmann::json to_json(const TrainConfig& cfg);
/// Parses the run-relevant sections of a document (unknown keys rejected).
TrainConfig train_config_from_json(const nlohmann::json& doc);

/// FNV-1a 64-bit over the canonical dump of the config with the seed removed.
std::string config_hash(const TrainConfig& cfg);

}  // namespace agedg::config
