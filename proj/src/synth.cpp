#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "agedg/data.hpp"
#include "agedg/error.hpp"

namespace agedg::data {

namespace {

// Class-conditioned (valence, arousal) centres on the affect circumplex.
constexpr std::array<std::pair<double, double>, kNumEmotions> kAffectCentres{{
    {0.0, 0.0},     // Neutral
    {0.7, 0.3},     // Happy
    {-0.6, -0.3},   // Sad
    {0.2, 0.7},     // Surprise
    {-0.5, 0.6},    // Fear
    {-0.6, 0.2},    // Disgust
    {-0.4, 0.7},    // Anger
    {-0.4, 0.1},    // Contempt
}};

void rotate_pairs(std::vector<double>& x, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (std::size_t i = 0; i + 1 < x.size(); i += 2) {
    const double a = x[i];
    const double b = x[i + 1];
    x[i] = c * a - s * b;
    x[i + 1] = s * a + c * b;
  }
}

std::string sample_id(std::size_t domain, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "syn-%zu-%05zu", domain, index);
  return buf;
}

}  // namespace

InputShape SynthSpec::shape() const {
  if (mode == InputMode::image) return InputShape::image(image_height, image_width, image_channels);
  return InputShape::vector(dim);
}

void SynthSpec::validate() const {
  if (per_domain.empty() || per_domain.size() > kNumAgeGroups) {
    throw ConfigError("synthetic spec needs between 1 and 5 domains");
  }
  for (std::size_t n : per_domain) {
    if (n < 1) throw ConfigError("synthetic per-domain counts must be at least 1");
  }
  if (shape().size() < 2) throw ConfigError("synthetic input dimension must be at least 2");
  if (!(shift >= 0.0) || !(noise >= 0.0) || !(prototype_scale > 0.0) || !(affect_scale >= 0.0) ||
      !(affect_noise >= 0.0)) {
    throw ConfigError("synthetic shift/noise/scales must be non-negative");
  }
}

Dataset synthesize_samples(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  const InputShape shape = spec.shape();
  const std::size_t d = shape.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_class(0, kNumEmotions - 1);

  std::array<std::vector<double>, kNumEmotions> prototypes;
  for (auto& p : prototypes) {
    p.resize(d);
    for (auto& v : p) v = spec.prototype_scale * gauss(rng);
  }
  auto unit_direction = [&] {
    std::vector<double> u(d);
    double norm = 0.0;
    for (auto& v : u) {
      v = gauss(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : u) v *= spec.affect_scale / norm;
    return u;
  };
  const auto valence_dir = unit_direction();
  const auto arousal_dir = unit_direction();

  Dataset ds;
  ds.shape = shape;
  for (std::size_t k = 0; k < spec.per_domain.size(); ++k) {
    const AgeGroup group = age_group_from_ordinal(k);
    const auto [lo, hi] = age_group_edges(group);
    const double angle = spec.shift * static_cast<double>(k);
    for (std::size_t i = 0; i < spec.per_domain[k]; ++i) {
      Sample s;
      s.id = sample_id(k, i);
      const std::size_t cls = pick_class(rng);
      s.annotation.emotion = emotion_from_index(cls);
      const auto [vc, ac] = kAffectCentres[cls];
      s.annotation.valence = std::clamp(vc + spec.affect_noise * gauss(rng), -1.0, 1.0);
      s.annotation.arousal = std::clamp(ac + spec.affect_noise * gauss(rng), -1.0, 1.0);
      s.apparent_age = lo + (hi - lo) * unit(rng);
      if (s.apparent_age >= hi) s.apparent_age = std::nextafter(hi, lo);
      s.domain = assign_age_group(s.apparent_age);

      std::vector<double> x(d);
      for (std::size_t j = 0; j < d; ++j) {
        x[j] = prototypes[cls][j] + s.annotation.valence * valence_dir[j] +
               s.annotation.arousal * arousal_dir[j] + spec.noise * gauss(rng);
      }
      rotate_pairs(x, angle);
      if (spec.mode == InputMode::image) {
        for (auto& v : x) v = 1.0 / (1.0 + std::exp(-v));
      }
      s.input = std::move(x);
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

DomainSplit synthesize_dataset(const SynthSpec& spec, std::uint64_t seed) {
  const auto ds = synthesize_samples(spec, seed);
  return split_by_fractions(ds.samples, ds.shape, spec.fractions, seed);
}

}  // namespace agedg::data
