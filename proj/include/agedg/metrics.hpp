#pragma once

// Loss and evaluation math for multi-task affect prediction: MSE / Pearson /
// concordance correlation over valence and arousal, cross-entropy with soft
// labels, the shake-shake weighted composite loss, accuracy and a
// multi-bandwidth Gaussian-kernel MMD.

#include <array>
#include <atomic>
#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "agedg/domain.hpp"
#include "agedg/error.hpp"
#include "agedg/matrix.hpp"

namespace agedg::metrics {

inline constexpr double kVarianceEpsilon = 1e-8;
inline const std::vector<double> kDefaultBandwidths{0.5, 1.0, 2.0, 4.0, 8.0};

/// Raw shake-shake coefficients, each strictly inside (0, 1).
struct ShakeWeights {
  double alpha = 0.5;
  double beta = 0.5;
  double gamma = 0.5;

  static ShakeWeights make(double alpha, double beta, double gamma);
  /// alpha = beta = gamma: each term weighted 1/3.
  static ShakeWeights equal() { return {}; }
  /// (alpha, beta, gamma) / (alpha + beta + gamma)
  std::array<double, 3> normalized() const noexcept;
};

/// Three independent U(0,1) draws, resampled if an endpoint is hit.
ShakeWeights sample_shake_weights(std::mt19937_64& rng);

template <class T>
struct Predictions {
  Matrix<T> logits;  // n x 8
  std::vector<T> valence;
  std::vector<T> arousal;

  Predictions() = default;
  explicit Predictions(std::size_t n) : logits(n, kNumEmotions), valence(n, T(0.0)), arousal(n, T(0.0)) {}
  std::size_t size() const noexcept { return valence.size(); }
};

using PredictionBatch = Predictions<double>;

/// Emotion targets as n x 8 rows (one-hot for hard labels), plus valence/arousal.
struct LabelBatch {
  Matrix<double> emotion;
  std::vector<double> valence;
  std::vector<double> arousal;
  std::optional<std::vector<EmotionClass>> classes;  // set for hard labels

  static LabelBatch hard(std::vector<EmotionClass> classes, std::vector<double> valence,
                         std::vector<double> arousal);
  static LabelBatch soft(Matrix<double> rows, std::vector<double> valence,
                         std::vector<double> arousal);
  static LabelBatch from_samples(std::span<const Sample* const> samples);

  std::size_t size() const noexcept { return valence.size(); }
  bool is_hard() const noexcept { return classes.has_value(); }
  /// Throws DataError/ShapeError: rows non-negative summing to 1 within 1e-6,
  /// valence/arousal within [-1, 1].
  void validate() const;
};

enum class CorrelationPolicy {
  strict,           // throw DegenerateVarianceError
  substitute_zero,  // correlation 0, zero gradient, logged once
};

/// Number of degenerate-variance substitutions made under substitute_zero.
std::size_t degenerate_substitutions() noexcept;
void note_degenerate_substitution();

double mse(std::span<const double> y, std::span<const double> yhat);
/// Population Pearson correlation.
double pcc(std::span<const double> y, std::span<const double> yhat);
/// 2 cov / (var_y + var_yhat + (mean_y - mean_yhat)^2), population moments.
double ccc(std::span<const double> y, std::span<const double> yhat);

struct ContinuousLosses {
  double mse = 0.0;  // mse(val) + mse(ar)
  double pcc = 0.0;  // 1 - (pcc(val) + pcc(ar)) / 2
  double ccc = 0.0;  // 1 - (ccc(val) + ccc(ar)) / 2
};

ContinuousLosses loss_continuous(const PredictionBatch& pred, const LabelBatch& labels,
                                 CorrelationPolicy policy = CorrelationPolicy::strict);
double cross_entropy(const Matrix<double>& logits, const LabelBatch& labels);
double composite_loss(const PredictionBatch& pred, const LabelBatch& labels, const ShakeWeights& w,
                      CorrelationPolicy policy = CorrelationPolicy::strict);
/// Hard labels only; argmax ties go to the lowest class index.
double accuracy(const PredictionBatch& pred, const LabelBatch& labels);
std::size_t argmax_row(std::span<const double> row) noexcept;

/// Biased (V-statistic) squared MMD with k(a,b) = sum_s exp(-|a-b|^2 / (2 s^2)).
double mmd_squared(const Matrix<double>& x, const Matrix<double>& y,
                   std::span<const double> bandwidths);
/// As mmd_squared, accumulating d/dX and d/dY (scaled by `scale`) when requested.
double mmd_squared_grad(const Matrix<double>& x, const Matrix<double>& y,
                        std::span<const double> bandwidths, double scale, Matrix<double>* dx,
                        Matrix<double>* dy);

// ---------------------------------------------------------------------------
// Differentiable composite loss, generic over the scalar (double or Dual).
// ---------------------------------------------------------------------------

template <class T>
struct LossTerms {
  T ce = T(0.0);
  T mse = T(0.0);
  T pcc = T(0.0);  // L_PCC
  T ccc = T(0.0);  // L_CCC
  T total = T(0.0);
};

namespace detail {

void check_batch(std::size_t pred_n, std::size_t logits_cols, const LabelBatch& labels,
                 std::size_t min_n);

template <class T>
struct Moments {
  T mean_y = T(0.0), mean_p = T(0.0), var_y = T(0.0), var_p = T(0.0), cov = T(0.0);
};

template <class T>
Moments<T> moments(std::span<const double> y, std::span<const T> p) {
  const double n = static_cast<double>(y.size());
  Moments<T> m;
  for (std::size_t i = 0; i < y.size(); ++i) {
    m.mean_y += T(y[i]);
    m.mean_p += p[i];
  }
  m.mean_y /= T(n);
  m.mean_p /= T(n);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const T dy = T(y[i]) - m.mean_y;
    const T dp = p[i] - m.mean_p;
    m.var_y += dy * dy;
    m.var_p += dp * dp;
    m.cov += dy * dp;
  }
  m.var_y /= T(n);
  m.var_p /= T(n);
  m.cov /= T(n);
  return m;
}

/// Returns the correlation and, if `grad` is non-null, adds scale * d corr / d p.
/// Nullopt means degenerate variance.
template <class T>
std::optional<T> pcc_grad(std::span<const double> y, std::span<const T> p, T scale,
                          std::span<T> grad) {
  const auto m = moments<T>(y, p);
  if (value_of(m.var_y) <= kVarianceEpsilon || value_of(m.var_p) <= kVarianceEpsilon) {
    return std::nullopt;
  }
  using std::sqrt;
  const T denom = sqrt(m.var_y * m.var_p);
  const T r = m.cov / denom;
  if (!grad.empty()) {
    const T n = T(static_cast<double>(y.size()));
    const T k = m.cov / m.var_p;
    for (std::size_t i = 0; i < y.size(); ++i) {
      grad[i] += scale * ((T(y[i]) - m.mean_y) - k * (p[i] - m.mean_p)) / (n * denom);
    }
  }
  return r;
}

template <class T>
std::optional<T> ccc_grad(std::span<const double> y, std::span<const T> p, T scale,
                          std::span<T> grad) {
  const auto m = moments<T>(y, p);
  const T gap = m.mean_y - m.mean_p;
  const T denom = m.var_y + m.var_p + gap * gap;
  if (value_of(denom) <= kVarianceEpsilon) return std::nullopt;
  const T c = T(2.0) * m.cov / denom;
  if (!grad.empty()) {
    const T n = T(static_cast<double>(y.size()));
    const T two = T(2.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const T dcov = (T(y[i]) - m.mean_y) / n;
      const T dden = two * ((p[i] - m.mean_p) + (m.mean_p - m.mean_y)) / n;
      grad[i] += scale * (two * dcov * denom - two * m.cov * dden) / (denom * denom);
    }
  }
  return c;
}

template <class T, class Fn>
T correlation_term(Fn&& fn, std::span<const double> y, std::span<const T> p, T scale,
                   std::span<T> grad, CorrelationPolicy policy, const char* name) {
  auto r = fn(y, p, scale, grad);
  if (r) return *r;
  if (policy == CorrelationPolicy::strict) {
    throw DegenerateVarianceError(std::string(name) + ": variance below 1e-8");
  }
  note_degenerate_substitution();
  return T(0.0);
}

}  // namespace detail

/// Composite loss L_CE + a' L_MSE + b' L_PCC + c' L_CCC with normalized weights.
/// When `grad` is non-null its entries receive scale * dL/d(prediction)
/// (the gradient buffers must already be sized like `pred`).
template <class T>
LossTerms<T> composite_loss_grad(const Predictions<T>& pred, const LabelBatch& labels,
                                 const std::array<double, 3>& weights, CorrelationPolicy policy,
                                 Predictions<T>* grad = nullptr, double scale = 1.0) {
  const std::size_t n = pred.size();
  detail::check_batch(n, pred.logits.cols, labels, 2);
  LossTerms<T> out;
  const T inv_n = T(1.0 / static_cast<double>(n));
  const T s = T(scale);

  // Cross-entropy with max-subtracted log-sum-exp.
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = pred.logits.row(r);
    T mx = row[0];
    for (std::size_t k = 1; k < kNumEmotions; ++k) {
      if (row[k] > mx) mx = row[k];
    }
    T sum(0.0);
    std::array<T, kNumEmotions> e;
    for (std::size_t k = 0; k < kNumEmotions; ++k) {
      using std::exp;
      e[k] = exp(row[k] - mx);
      sum += e[k];
    }
    using std::log;
    const T lse = mx + log(sum);
    double qsum = 0.0;
    for (std::size_t k = 0; k < kNumEmotions; ++k) {
      const double q = labels.emotion(r, k);
      qsum += q;
      if (q != 0.0) out.ce += T(q) * (lse - row[k]);
    }
    if (grad != nullptr) {
      for (std::size_t k = 0; k < kNumEmotions; ++k) {
        grad->logits(r, k) += s * inv_n * (e[k] / sum * T(qsum) - T(labels.emotion(r, k)));
      }
    }
  }
  out.ce *= inv_n;

  const T wa = T(weights[0]);
  const T wb = T(weights[1]);
  const T wc = T(weights[2]);
  const std::span<const T> pv(pred.valence);
  const std::span<const T> pa(pred.arousal);
  std::span<T> gv;
  std::span<T> ga;
  if (grad != nullptr) {
    gv = std::span<T>(grad->valence);
    ga = std::span<T>(grad->arousal);
  }

  // MSE terms.
  for (std::size_t i = 0; i < n; ++i) {
    const T dv = pv[i] - T(labels.valence[i]);
    const T da = pa[i] - T(labels.arousal[i]);
    out.mse += (dv * dv + da * da) * inv_n;
    if (grad != nullptr) {
      gv[i] += s * wa * T(2.0) * dv * inv_n;
      ga[i] += s * wa * T(2.0) * da * inv_n;
    }
  }

  // L_PCC = 1 - (pcc_v + pcc_a)/2, so d/dp = -(1/2) d pcc/dp.
  const T half_b = T(-0.5) * wb * s;
  const T half_c = T(-0.5) * wc * s;
  auto pcc_fn = [](auto y, auto p, T sc, std::span<T> g) { return detail::pcc_grad<T>(y, p, sc, g); };
  auto ccc_fn = [](auto y, auto p, T sc, std::span<T> g) { return detail::ccc_grad<T>(y, p, sc, g); };
  const T pcc_v = detail::correlation_term<T>(pcc_fn, labels.valence, pv, half_b, gv, policy, "pcc(valence)");
  const T pcc_a = detail::correlation_term<T>(pcc_fn, labels.arousal, pa, half_b, ga, policy, "pcc(arousal)");
  const T ccc_v = detail::correlation_term<T>(ccc_fn, labels.valence, pv, half_c, gv, policy, "ccc(valence)");
  const T ccc_a = detail::correlation_term<T>(ccc_fn, labels.arousal, pa, half_c, ga, policy, "ccc(arousal)");
  out.pcc = T(1.0) - (pcc_v + pcc_a) * T(0.5);
  out.ccc = T(1.0) - (ccc_v + ccc_a) * T(0.5);
  out.total = out.ce + wa * out.mse + wb * out.pcc + wc * out.ccc;
  return out;
}

}  // namespace agedg::metrics
