#include "agedg/config.hpp"

#include <cstdio>
#include <fstream>
#include <optional>

#include "agedg/error.hpp"

namespace agedg::config {

using nlohmann::json;

namespace {

json domains_to_json(const DomainSet& set) {
  json arr = json::array();
  for (AgeGroup g : set.members()) arr.push_back(std::string(age_group_name(g)));
  return arr;
}

DomainSet domains_from_json(const json& arr, const char* key) {
  if (!arr.is_array()) throw ConfigError(std::string(key) + " must be a list of age groups");
  DomainSet set;
  for (const auto& v : arr) {
    const auto g = v.is_string() ? parse_age_group(v.get<std::string>()) : std::nullopt;
    if (!g) throw ConfigError(std::string(key) + ": unknown age group " + v.dump());
    set.insert(*g);
  }
  return set;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> number_or_null(const json& v, const char* key) {
  if (v.is_null()) return std::nullopt;
  if (!v.is_number()) throw ConfigError(std::string(key) + " must be a number or null");
  return v.get<double>();
}

template <class T>
T get_as(const json& node, const char* key) {
  try {
    return node.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

json default_document() {
  TrainConfig defaults;
  json doc = to_json(defaults);
  doc["ablation"] = {{"subsets", json::array()}};
  // Four-domain runs and their three-domain counterparts.
  const std::vector<std::vector<std::string>> subsets{
      {"18-30", "30-40", "40-50", "60-85"}, {"18-30", "30-40", "50-60", "60-85"},
      {"18-30", "30-40", "60-85"},          {"18-30", "40-50", "50-60", "60-85"},
      {"18-30", "40-50", "60-85"},          {"18-30", "30-40", "40-50", "50-60"},
      {"18-30", "40-50", "50-60"},          {"18-30", "30-40", "50-60"}};
  for (const auto& s : subsets) doc["ablation"]["subsets"].push_back(s);
  return doc;
}

void merge_strict(json& base, const json& overlay, const std::string& prefix) {
  if (!overlay.is_object()) throw ConfigError("config document must be a JSON object");
  for (const auto& [key, value] : overlay.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    auto& target = base[key];
    if (target.is_object() && value.is_object()) {
      merge_strict(target, value, path);
    } else {
      target = value;
    }
  }
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  if (node->is_object()) {
    if (!value.is_object()) throw ConfigError("config key '" + key + "' is a section");
    merge_strict(*node, value, key);
  } else {
    *node = std::move(value);
  }
}

json load_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json user = json::parse(in, nullptr, false, true);
  if (user.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
  json doc = default_document();
  merge_strict(doc, user);
  return doc;
}

json to_json(const TrainConfig& cfg) {
  const auto& a = cfg.algorithm;
  json j;
  j["algorithm"] = {
      {"id", std::string(dg::algorithm_name(a.algorithm))},
      {"learning_rate", a.learning_rate},
      {"mixup", {{"alpha", a.mixup_alpha}, {"input_space", a.mixup_input_space}, {"lambda", optional_number(a.mixup_lambda)}}},
      {"mmd", {{"weight", a.mmd_weight}, {"bandwidths", a.mmd_bandwidths}}},
      {"cdann", {{"adv_weight", a.cdann_adv_weight}, {"hidden", a.cdann_hidden}}},
      {"mldg", {{"inner_lr", optional_number(a.mldg_inner_lr)}, {"meta_weight", a.mldg_meta_weight}, {"first_order", a.mldg_first_order}}},
  };
  j["backbone"] = {{"hidden", cfg.backbone.hidden}, {"feature_dim", cfg.backbone.feature_dim}};
  j["training"] = {{"domains", domains_to_json(cfg.active_domains)},
                   {"budget", cfg.total_train_budget},
                   {"steps", cfg.steps},
                   {"eval_every", cfg.eval_every},
                   {"batch_size", cfg.batch_size},
                   {"seed", cfg.seed}};
  const auto& d = cfg.data;
  const auto& s = d.synth;
  j["data"] = {
      {"source", d.kind == DataSource::Kind::synthetic ? "synthetic" : "manifest"},
      {"synthetic",
       {{"per_domain", s.per_domain},
        {"dim", s.dim},
        {"shift", s.shift},
        {"noise", s.noise},
        {"prototype_scale", s.prototype_scale},
        {"affect_scale", s.affect_scale},
        {"affect_noise", s.affect_noise},
        {"mode", s.mode == InputMode::image ? "image" : "features"},
        {"image", {s.image_height, s.image_width, s.image_channels}},
        {"seed", d.synth_seed}}},
      {"manifest", {{"path", d.manifest}, {"inputs", d.inputs}}},
      {"split", {{"validation", d.split.validation}, {"test", d.split.test}, {"seed", d.split_seed}}},
  };
  return j;
}

TrainConfig train_config_from_json(const json& doc) {
  // Validate key names against the defaults first.
  json known = to_json(TrainConfig{});
  json run_part = json::object();
  for (const char* section : {"algorithm", "backbone", "training", "data"}) {
    if (doc.contains(section)) run_part[section] = doc.at(section);
  }
  merge_strict(known, run_part);

  TrainConfig cfg;
  const auto& a = known.at("algorithm");
  const auto id = get_as<std::string>(a, "id");
  const auto algo = dg::parse_algorithm(id);
  if (!algo) throw ConfigError("unknown algorithm '" + id + "' (expected erm, mixup, mmd, cdann or mldg)");
  cfg.algorithm.algorithm = *algo;
  cfg.algorithm.learning_rate = get_as<double>(a, "learning_rate");
  cfg.algorithm.mixup_alpha = get_as<double>(a.at("mixup"), "alpha");
  cfg.algorithm.mixup_input_space = get_as<bool>(a.at("mixup"), "input_space");
  cfg.algorithm.mixup_lambda = number_or_null(a.at("mixup").at("lambda"), "algorithm.mixup.lambda");
  cfg.algorithm.mmd_weight = get_as<double>(a.at("mmd"), "weight");
  cfg.algorithm.mmd_bandwidths = get_as<std::vector<double>>(a.at("mmd"), "bandwidths");
  cfg.algorithm.cdann_adv_weight = get_as<double>(a.at("cdann"), "adv_weight");
  cfg.algorithm.cdann_hidden = get_as<std::vector<std::size_t>>(a.at("cdann"), "hidden");
  cfg.algorithm.mldg_inner_lr = number_or_null(a.at("mldg").at("inner_lr"), "algorithm.mldg.inner_lr");
  cfg.algorithm.mldg_meta_weight = get_as<double>(a.at("mldg"), "meta_weight");
  cfg.algorithm.mldg_first_order = get_as<bool>(a.at("mldg"), "first_order");

  const auto& b = known.at("backbone");
  cfg.backbone.hidden = get_as<std::vector<std::size_t>>(b, "hidden");
  cfg.backbone.feature_dim = get_as<std::size_t>(b, "feature_dim");

  const auto& t = known.at("training");
  cfg.active_domains = domains_from_json(t.at("domains"), "training.domains");
  cfg.total_train_budget = get_as<std::size_t>(t, "budget");
  cfg.steps = get_as<std::size_t>(t, "steps");
  cfg.eval_every = get_as<std::size_t>(t, "eval_every");
  cfg.batch_size = get_as<std::size_t>(t, "batch_size");
  cfg.seed = get_as<std::uint64_t>(t, "seed");

  const auto& d = known.at("data");
  const auto source = get_as<std::string>(d, "source");
  if (source == "synthetic") {
    cfg.data.kind = DataSource::Kind::synthetic;
  } else if (source == "manifest") {
    cfg.data.kind = DataSource::Kind::manifest;
  } else {
    throw ConfigError("data.source must be 'synthetic' or 'manifest'");
  }
  const auto& s = d.at("synthetic");
  auto& spec = cfg.data.synth;
  spec.per_domain = get_as<std::vector<std::size_t>>(s, "per_domain");
  spec.dim = get_as<std::size_t>(s, "dim");
  spec.shift = get_as<double>(s, "shift");
  spec.noise = get_as<double>(s, "noise");
  spec.prototype_scale = get_as<double>(s, "prototype_scale");
  spec.affect_scale = get_as<double>(s, "affect_scale");
  spec.affect_noise = get_as<double>(s, "affect_noise");
  const auto mode = get_as<std::string>(s, "mode");
  if (mode != "features" && mode != "image") throw ConfigError("data.synthetic.mode must be 'features' or 'image'");
  spec.mode = mode == "image" ? InputMode::image : InputMode::features;
  const auto image = get_as<std::vector<std::size_t>>(s, "image");
  if (image.size() != 3) throw ConfigError("data.synthetic.image must be [height, width, channels]");
  spec.image_height = image[0];
  spec.image_width = image[1];
  spec.image_channels = image[2];
  cfg.data.synth_seed = get_as<std::uint64_t>(s, "seed");
  cfg.data.manifest = get_as<std::string>(d.at("manifest"), "path");
  cfg.data.inputs = get_as<std::string>(d.at("manifest"), "inputs");
  cfg.data.split.validation = get_as<double>(d.at("split"), "validation");
  cfg.data.split.test = get_as<double>(d.at("split"), "test");
  cfg.data.split_seed = get_as<std::uint64_t>(d.at("split"), "seed");
  spec.fractions = cfg.data.split;
  cfg.validate();
  return cfg;
}

void TrainConfig::validate() const {
  algorithm.validate();
  if (active_domains.empty()) throw ConfigError("training.domains must not be empty");
  if (eval_every < 1) throw ConfigError("training.eval_every must be at least 1");
  if (steps < eval_every) throw ConfigError("training.steps must be >= training.eval_every");
  if (batch_size < 2) throw ConfigError("training.batch_size must be at least 2");
  if (backbone.feature_dim == 0) throw ConfigError("backbone.feature_dim must be positive");
  if (data.kind == DataSource::Kind::synthetic) {
    data.synth.validate();
  } else if (data.manifest.empty() || data.inputs.empty()) {
    throw ConfigError("manifest data source needs data.manifest.path and data.manifest.inputs");
  }
}

std::string config_hash(const TrainConfig& cfg) {
  json j = to_json(cfg);
  j["training"].erase("seed");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace agedg::config
