#pragma once

// Feature-extractor / classifier contract and the small reference network.
// The extractor phi_theta maps inputs to feature_dim post-tanh activations;
// the classifier c_theta' is the final fully-connected layer producing eight
// emotion logits plus tanh-squashed valence and arousal.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agedg/domain.hpp"
#include "agedg/matrix.hpp"
#include "agedg/metrics.hpp"

namespace agedg::backbone {

/// Emotion logits followed by raw valence and arousal.
inline constexpr std::size_t kHeadOutputs = kNumEmotions + 2;

struct Architecture {
  InputShape input;
  /// Feature mode: widths of hidden dense layers. Image mode: hidden[0] is the
  /// channel count of the 3x3 convolution, the rest are dense widths.
  std::vector<std::size_t> hidden;
  std::size_t feature_dim = 16;

  std::size_t extractor_parameter_count() const;
  std::size_t classifier_parameter_count() const;
  /// Throws ConfigError.
  void validate() const;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Algorithm-owned parameters (the class-conditional domain discriminator).
struct DiscriminatorState {
  std::vector<std::size_t> hidden;
  std::size_t input_dim = 0;  // feature_dim + 8
  std::size_t num_domains = kNumAgeGroups;
  std::vector<double> params;
  friend bool operator==(const DiscriminatorState&, const DiscriminatorState&) = default;
};

struct ModelState {
  Architecture arch;
  std::vector<double> theta;        // feature extractor
  std::vector<double> theta_prime;  // classifier
  std::optional<DiscriminatorState> auxiliary;
  std::uint64_t seed = 0;

  friend bool operator==(const ModelState&, const ModelState&) = default;
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero; deterministic in seed.
ModelState init_reference_backbone(const Architecture& arch, std::uint64_t seed);

Matrix<double> feature_extract(const ModelState& state, const Matrix<double>& inputs);
metrics::PredictionBatch classify(const ModelState& state, const Matrix<double>& features);
/// classify(state, feature_extract(state, inputs))
metrics::PredictionBatch forward(const ModelState& state, const Matrix<double>& inputs);

DiscriminatorState init_discriminator(std::size_t feature_dim, const std::vector<std::size_t>& hidden,
                                      std::uint64_t seed);

// ---------------------------------------------------------------------------
// Checkpoints: "AGDGCKPT" | u32 version | architecture | seed | parameter
// arrays | optional discriminator, little-endian. Byte-stable for equal states.
// ---------------------------------------------------------------------------

std::string serialize_checkpoint(const ModelState& state);
ModelState deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const ModelState& state, const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Differentiable passes, generic over the scalar type.
// ---------------------------------------------------------------------------

/// Fully-connected stack with tanh between layers; widths = {in, h1, ..., out}.
struct DenseLayout {
  std::vector<std::size_t> widths;
  bool squash_last = true;

  std::size_t parameter_count() const;
};

template <class T>
class DenseStack {
 public:
  const Matrix<T>& forward(const DenseLayout& layout, std::span<const T> params,
                           const Matrix<T>& x) {
    const std::size_t layers = layout.widths.size() - 1;
    if (x.cols != layout.widths[0]) {
      throw ShapeError("dense stack expects width " + std::to_string(layout.widths[0]) +
                       ", got " + std::to_string(x.cols));
    }
    acts_.resize(layers + 1);
    acts_[0] = x;
    std::size_t off = 0;
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t in = layout.widths[l];
      const std::size_t out = layout.widths[l + 1];
      linalg::dense_forward<T>(acts_[l], params.subspan(off, in * out),
                               params.subspan(off + in * out, out), acts_[l + 1]);
      off += in * out + out;
      if (l + 1 < layers || layout.squash_last) {
        using std::tanh;
        for (auto& v : acts_[l + 1].data) v = tanh(v);
      }
    }
    return acts_.back();
  }

  /// Accumulates parameter gradients into dparams; writes input gradient to dx if given.
  void backward(const DenseLayout& layout, std::span<const T> params, Matrix<T> dout,
                std::span<T> dparams, Matrix<T>* dx) const {
    const std::size_t layers = layout.widths.size() - 1;
    std::vector<std::size_t> offsets(layers);
    std::size_t off = 0;
    for (std::size_t l = 0; l < layers; ++l) {
      offsets[l] = off;
      off += layout.widths[l] * layout.widths[l + 1] + layout.widths[l + 1];
    }
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in = layout.widths[l];
      const std::size_t out = layout.widths[l + 1];
      if (l + 1 < layers || layout.squash_last) {
        const auto& a = acts_[l + 1];
        for (std::size_t i = 0; i < dout.data.size(); ++i) {
          dout.data[i] = dout.data[i] * (T(1.0) - a.data[i] * a.data[i]);
        }
      }
      Matrix<T> dprev;
      const bool need_dx = l > 0 || dx != nullptr;
      linalg::dense_backward<T>(acts_[l], params.subspan(offsets[l], in * out), dout,
                                dparams.subspan(offsets[l], in * out),
                                dparams.subspan(offsets[l] + in * out, out),
                                need_dx ? &dprev : nullptr);
      if (l == 0) {
        if (dx != nullptr) *dx = std::move(dprev);
      } else {
        dout = std::move(dprev);
      }
    }
  }

 private:
  std::vector<Matrix<T>> acts_;
};

/// 3x3 valid convolution over H x W x C inputs stored row-major.
struct ConvLayout {
  std::size_t height = 0, width = 0, in_channels = 0, out_channels = 0;
  std::size_t out_height() const { return height - 2; }
  std::size_t out_width() const { return width - 2; }
  std::size_t output_size() const { return out_height() * out_width() * out_channels; }
  std::size_t parameter_count() const { return out_channels * in_channels * 9 + out_channels; }
};

template <class T>
void conv_forward(const ConvLayout& c, std::span<const T> params, const Matrix<T>& x,
                  Matrix<T>& y) {
  if (x.cols != c.height * c.width * c.in_channels) throw ShapeError("conv input size mismatch");
  const std::size_t oh = c.out_height();
  const std::size_t ow = c.out_width();
  const auto bias = params.subspan(c.out_channels * c.in_channels * 9, c.out_channels);
  y = Matrix<T>(x.rows, c.output_size());
  for (std::size_t n = 0; n < x.rows; ++n) {
    const auto xr = x.row(n);
    auto yr = y.row(n);
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        for (std::size_t co = 0; co < c.out_channels; ++co) {
          T acc = bias[co];
          for (std::size_t ki = 0; ki < 3; ++ki) {
            for (std::size_t kj = 0; kj < 3; ++kj) {
              const std::size_t base = ((i + ki) * c.width + (j + kj)) * c.in_channels;
              for (std::size_t ci = 0; ci < c.in_channels; ++ci) {
                acc += params[((co * c.in_channels + ci) * 3 + ki) * 3 + kj] * xr[base + ci];
              }
            }
          }
          yr[(i * ow + j) * c.out_channels + co] = acc;
        }
      }
    }
  }
}

template <class T>
void conv_backward(const ConvLayout& c, std::span<const T> params, const Matrix<T>& x,
                   const Matrix<T>& dy, std::span<T> dparams, Matrix<T>* dx) {
  const std::size_t oh = c.out_height();
  const std::size_t ow = c.out_width();
  const std::size_t wcount = c.out_channels * c.in_channels * 9;
  if (dx != nullptr) *dx = Matrix<T>(x.rows, x.cols);
  for (std::size_t n = 0; n < x.rows; ++n) {
    const auto xr = x.row(n);
    const auto dyr = dy.row(n);
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        for (std::size_t co = 0; co < c.out_channels; ++co) {
          const T g = dyr[(i * ow + j) * c.out_channels + co];
          dparams[wcount + co] += g;
          for (std::size_t ki = 0; ki < 3; ++ki) {
            for (std::size_t kj = 0; kj < 3; ++kj) {
              const std::size_t base = ((i + ki) * c.width + (j + kj)) * c.in_channels;
              for (std::size_t ci = 0; ci < c.in_channels; ++ci) {
                const std::size_t w = ((co * c.in_channels + ci) * 3 + ki) * 3 + kj;
                dparams[w] += g * xr[base + ci];
                if (dx != nullptr) (*dx)(n, base + ci) += g * params[w];
              }
            }
          }
        }
      }
    }
  }
}

DenseLayout extractor_dense_layout(const Architecture& arch);
ConvLayout extractor_conv_layout(const Architecture& arch);
DenseLayout classifier_layout(const Architecture& arch);
DenseLayout discriminator_layout(const DiscriminatorState& disc);

/// phi_theta with cached activations for backpropagation.
template <class T>
class ExtractorPass {
 public:
  const Matrix<T>& forward(const Architecture& arch, std::span<const T> theta,
                           const Matrix<T>& x) {
    if (theta.size() != arch.extractor_parameter_count()) {
      throw ShapeError("extractor parameter count mismatch");
    }
    if (x.cols != arch.input.size()) {
      throw ShapeError("input width " + std::to_string(x.cols) + " does not match the model's " +
                       std::to_string(arch.input.size()));
    }
    const auto dense = extractor_dense_layout(arch);
    if (arch.input.mode == InputMode::image) {
      const auto conv = extractor_conv_layout(arch);
      input_ = x;
      conv_forward<T>(conv, theta.first(conv.parameter_count()), x, conv_out_);
      using std::tanh;
      for (auto& v : conv_out_.data) v = tanh(v);
      return dense_.forward(dense, theta.subspan(conv.parameter_count()), conv_out_);
    }
    return dense_.forward(dense, theta, x);
  }

  void backward(const Architecture& arch, std::span<const T> theta, Matrix<T> dfeatures,
                std::span<T> dtheta) const {
    const auto dense = extractor_dense_layout(arch);
    if (arch.input.mode == InputMode::image) {
      const auto conv = extractor_conv_layout(arch);
      const std::size_t np = conv.parameter_count();
      Matrix<T> dconv;
      dense_.backward(dense, theta.subspan(np), std::move(dfeatures), dtheta.subspan(np), &dconv);
      for (std::size_t i = 0; i < dconv.data.size(); ++i) {
        const T a = conv_out_.data[i];
        dconv.data[i] = dconv.data[i] * (T(1.0) - a * a);
      }
      conv_backward<T>(conv, theta.first(np), input_, dconv, dtheta.first(np), nullptr);
      return;
    }
    dense_.backward(dense, theta, std::move(dfeatures), dtheta, nullptr);
  }

 private:
  DenseStack<T> dense_;
  Matrix<T> input_;
  Matrix<T> conv_out_;
};

/// c_theta' with cached activations.
template <class T>
class ClassifierPass {
 public:
  metrics::Predictions<T> forward(const Architecture& arch, std::span<const T> theta_prime,
                                  const Matrix<T>& features) {
    if (theta_prime.size() != arch.classifier_parameter_count()) {
      throw ShapeError("classifier parameter count mismatch");
    }
    if (features.cols != arch.feature_dim) {
      throw ShapeError("feature width " + std::to_string(features.cols) + " does not match " +
                       std::to_string(arch.feature_dim));
    }
    const auto& out = stack_.forward(classifier_layout(arch), theta_prime, features);
    metrics::Predictions<T> pred(out.rows);
    using std::tanh;
    for (std::size_t r = 0; r < out.rows; ++r) {
      for (std::size_t k = 0; k < kNumEmotions; ++k) pred.logits(r, k) = out(r, k);
      pred.valence[r] = tanh(out(r, kNumEmotions));
      pred.arousal[r] = tanh(out(r, kNumEmotions + 1));
    }
    valence_ = pred.valence;
    arousal_ = pred.arousal;
    return pred;
  }

  /// Accumulates into dtheta_prime; returns d/d(features).
  Matrix<T> backward(const Architecture& arch, std::span<const T> theta_prime,
                     const metrics::Predictions<T>& dpred, std::span<T> dtheta_prime) const {
    const std::size_t n = dpred.size();
    Matrix<T> dout(n, kHeadOutputs);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t k = 0; k < kNumEmotions; ++k) dout(r, k) = dpred.logits(r, k);
      dout(r, kNumEmotions) = dpred.valence[r] * (T(1.0) - valence_[r] * valence_[r]);
      dout(r, kNumEmotions + 1) = dpred.arousal[r] * (T(1.0) - arousal_[r] * arousal_[r]);
    }
    Matrix<T> dfeatures;
    stack_.backward(classifier_layout(arch), theta_prime, std::move(dout), dtheta_prime,
                    &dfeatures);
    return dfeatures;
  }

 private:
  DenseStack<T> stack_;
  std::vector<T> valence_;
  std::vector<T> arousal_;
};

}  // namespace agedg::backbone
