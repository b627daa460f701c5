#include "agedg/backbone.hpp"

#include <cmath>
#include <random>

namespace agedg::backbone {

namespace {

void init_dense(const DenseLayout& layout, std::span<double> params, std::mt19937_64& rng) {
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < layout.widths.size(); ++l) {
    const std::size_t in = layout.widths[l];
    const std::size_t out = layout.widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < in * out; ++i) params[off + i] = dist(rng);
    off += in * out;
    for (std::size_t i = 0; i < out; ++i) params[off + i] = 0.0;
    off += out;
  }
}

}  // namespace

std::size_t DenseLayout::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l] * widths[l + 1] + widths[l + 1];
  return n;
}

void Architecture::validate() const {
  if (feature_dim == 0) throw ConfigError("feature_dim must be positive");
  if (input.size() == 0) throw ConfigError("input dimension must be positive");
  for (auto h : hidden) {
    if (h == 0) throw ConfigError("hidden widths must be positive");
  }
  if (input.mode == InputMode::image) {
    if (hidden.empty()) throw ConfigError("image backbone needs a convolution channel count");
    if (input.height < 3 || input.width < 3) throw ConfigError("image backbone needs at least 3x3 inputs");
  }
}

ConvLayout extractor_conv_layout(const Architecture& arch) {
  return {arch.input.height, arch.input.width, arch.input.channels, arch.hidden.at(0)};
}

DenseLayout extractor_dense_layout(const Architecture& arch) {
  DenseLayout layout;
  std::size_t first_hidden = 0;
  if (arch.input.mode == InputMode::image) {
    layout.widths.push_back(extractor_conv_layout(arch).output_size());
    first_hidden = 1;
  } else {
    layout.widths.push_back(arch.input.size());
  }
  for (std::size_t i = first_hidden; i < arch.hidden.size(); ++i) layout.widths.push_back(arch.hidden[i]);
  layout.widths.push_back(arch.feature_dim);
  layout.squash_last = true;
  return layout;
}

DenseLayout classifier_layout(const Architecture& arch) {
  return {{arch.feature_dim, kHeadOutputs}, false};
}

DenseLayout discriminator_layout(const DiscriminatorState& disc) {
  DenseLayout layout;
  layout.widths.push_back(disc.input_dim);
  for (auto h : disc.hidden) layout.widths.push_back(h);
  layout.widths.push_back(disc.num_domains);
  layout.squash_last = false;
  return layout;
}

std::size_t Architecture::extractor_parameter_count() const {
  std::size_t n = extractor_dense_layout(*this).parameter_count();
  if (input.mode == InputMode::image) n += extractor_conv_layout(*this).parameter_count();
  return n;
}

std::size_t Architecture::classifier_parameter_count() const {
  return classifier_layout(*this).parameter_count();
}

ModelState init_reference_backbone(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  ModelState state;
  state.arch = arch;
  state.seed = seed;
  state.theta.assign(arch.extractor_parameter_count(), 0.0);
  state.theta_prime.assign(arch.classifier_parameter_count(), 0.0);
  std::mt19937_64 rng(seed);
  std::span<double> theta(state.theta);
  if (arch.input.mode == InputMode::image) {
    const auto conv = extractor_conv_layout(arch);
    const double bound = 1.0 / std::sqrt(static_cast<double>(conv.in_channels * 9));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const std::size_t wcount = conv.out_channels * conv.in_channels * 9;
    for (std::size_t i = 0; i < wcount; ++i) theta[i] = dist(rng);
    theta = theta.subspan(conv.parameter_count());
  }
  init_dense(extractor_dense_layout(arch), theta, rng);
  init_dense(classifier_layout(arch), state.theta_prime, rng);
  return state;
}

DiscriminatorState init_discriminator(std::size_t feature_dim,
                                      const std::vector<std::size_t>& hidden,
                                      std::uint64_t seed) {
  DiscriminatorState disc;
  disc.hidden = hidden;
  disc.input_dim = feature_dim + kNumEmotions;
  disc.num_domains = kNumAgeGroups;
  const auto layout = discriminator_layout(disc);
  disc.params.assign(layout.parameter_count(), 0.0);
  std::mt19937_64 rng(seed);
  init_dense(layout, disc.params, rng);
  return disc;
}

Matrix<double> feature_extract(const ModelState& state, const Matrix<double>& inputs) {
  ExtractorPass<double> pass;
  return pass.forward(state.arch, state.theta, inputs);
}

metrics::PredictionBatch classify(const ModelState& state, const Matrix<double>& features) {
  ClassifierPass<double> pass;
  return pass.forward(state.arch, state.theta_prime, features);
}

metrics::PredictionBatch forward(const ModelState& state, const Matrix<double>& inputs) {
  return classify(state, feature_extract(state, inputs));
}

}  // namespace agedg::backbone
