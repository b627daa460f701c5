#include "agedg/metrics.hpp"

#include <algorithm>
#include <cstdio>

namespace agedg::metrics {

namespace {

std::atomic<std::size_t> g_degenerate{0};

void check_pair(std::span<const double> y, std::span<const double> yhat, std::size_t min_n,
                const char* op) {
  if (y.size() != yhat.size()) {
    throw ShapeError(std::string(op) + ": length mismatch (" + std::to_string(y.size()) + " vs " +
                     std::to_string(yhat.size()) + ")");
  }
  if (y.size() < min_n) {
    throw ShapeError(std::string(op) + ": needs at least " + std::to_string(min_n) + " values");
  }
}

}  // namespace

ShakeWeights ShakeWeights::make(double alpha, double beta, double gamma) {
  for (double v : {alpha, beta, gamma}) {
    if (!(v > 0.0 && v < 1.0)) throw ConfigError("shake weights must lie in the open interval (0, 1)");
  }
  return {alpha, beta, gamma};
}

std::array<double, 3> ShakeWeights::normalized() const noexcept {
  const double sum = alpha + beta + gamma;
  return {alpha / sum, beta / sum, gamma / sum};
}

ShakeWeights sample_shake_weights(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&] {
    double v = 0.0;
    do {
      v = unit(rng);
    } while (v <= 0.0 || v >= 1.0);
    return v;
  };
  ShakeWeights w;
  w.alpha = draw();
  w.beta = draw();
  w.gamma = draw();
  return w;
}

LabelBatch LabelBatch::hard(std::vector<EmotionClass> classes, std::vector<double> valence,
                            std::vector<double> arousal) {
  LabelBatch b;
  b.emotion = Matrix<double>(classes.size(), kNumEmotions);
  for (std::size_t i = 0; i < classes.size(); ++i) b.emotion(i, index_of(classes[i])) = 1.0;
  b.valence = std::move(valence);
  b.arousal = std::move(arousal);
  b.classes = std::move(classes);
  b.validate();
  return b;
}

LabelBatch LabelBatch::soft(Matrix<double> rows, std::vector<double> valence,
                            std::vector<double> arousal) {
  LabelBatch b;
  b.emotion = std::move(rows);
  b.valence = std::move(valence);
  b.arousal = std::move(arousal);
  b.validate();
  return b;
}

LabelBatch LabelBatch::from_samples(std::span<const Sample* const> samples) {
  std::vector<EmotionClass> cls;
  std::vector<double> val;
  std::vector<double> ar;
  cls.reserve(samples.size());
  for (const Sample* s : samples) {
    cls.push_back(s->annotation.emotion);
    val.push_back(s->annotation.valence);
    ar.push_back(s->annotation.arousal);
  }
  return hard(std::move(cls), std::move(val), std::move(ar));
}

void LabelBatch::validate() const {
  const std::size_t n = valence.size();
  if (arousal.size() != n || emotion.rows != n || emotion.cols != kNumEmotions) {
    throw ShapeError("label batch components disagree in size");
  }
  if (classes && classes->size() != n) throw ShapeError("hard label count mismatch");
  for (std::size_t r = 0; r < n; ++r) {
    double sum = 0.0;
    for (double q : emotion.row(r)) {
      if (!(q >= 0.0)) throw DataError("soft label row " + std::to_string(r) + " has a negative entry");
      sum += q;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw DataError("soft label row " + std::to_string(r) + " sums to " + std::to_string(sum));
    }
    if (!(std::abs(valence[r]) <= 1.0)) throw DataError("valence out of range");
    if (!(std::abs(arousal[r]) <= 1.0)) throw DataError("arousal out of range");
  }
}

std::size_t degenerate_substitutions() noexcept { return g_degenerate.load(); }

void note_degenerate_substitution() {
  if (g_degenerate.fetch_add(1) == 0) {
    std::fprintf(stderr,
                 "warning: near-zero variance in a correlation term; using correlation 0\n");
  }
}

namespace detail {

void check_batch(std::size_t pred_n, std::size_t logits_cols, const LabelBatch& labels,
                 std::size_t min_n) {
  if (logits_cols != kNumEmotions) throw ShapeError("logits must have 8 columns");
  if (pred_n != labels.size() || labels.emotion.rows != pred_n) {
    throw ShapeError("prediction batch of " + std::to_string(pred_n) +
                     " rows does not match label batch of " + std::to_string(labels.size()));
  }
  if (pred_n < min_n) {
    throw ShapeError("batch needs at least " + std::to_string(min_n) + " samples");
  }
}

}  // namespace detail

double mse(std::span<const double> y, std::span<const double> yhat) {
  check_pair(y, yhat, 1, "mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - yhat[i];
    acc += d * d;
  }
  return acc / static_cast<double>(y.size());
}

double pcc(std::span<const double> y, std::span<const double> yhat) {
  check_pair(y, yhat, 2, "pcc");
  auto r = detail::pcc_grad<double>(y, yhat, 0.0, {});
  if (!r) throw DegenerateVarianceError("pcc: variance below 1e-8");
  return *r;
}

double ccc(std::span<const double> y, std::span<const double> yhat) {
  check_pair(y, yhat, 2, "ccc");
  auto r = detail::ccc_grad<double>(y, yhat, 0.0, {});
  if (!r) throw DegenerateVarianceError("ccc: degenerate denominator");
  return *r;
}

ContinuousLosses loss_continuous(const PredictionBatch& pred, const LabelBatch& labels,
                                 CorrelationPolicy policy) {
  const auto terms = composite_loss_grad<double>(pred, labels, {1.0, 1.0, 1.0}, policy);
  return {terms.mse, terms.pcc, terms.ccc};
}

double cross_entropy(const Matrix<double>& logits, const LabelBatch& labels) {
  detail::check_batch(logits.rows, logits.cols, labels, 1);
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double l : row) sum += std::exp(l - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t k = 0; k < kNumEmotions; ++k) {
      const double q = labels.emotion(r, k);
      if (q != 0.0) total += q * (lse - row[k]);
    }
  }
  return total / static_cast<double>(logits.rows);
}

double composite_loss(const PredictionBatch& pred, const LabelBatch& labels, const ShakeWeights& w,
                      CorrelationPolicy policy) {
  return composite_loss_grad<double>(pred, labels, w.normalized(), policy).total;
}

std::size_t argmax_row(std::span<const double> row) noexcept {
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k) {
    if (row[k] > row[best]) best = k;
  }
  return best;
}

double accuracy(const PredictionBatch& pred, const LabelBatch& labels) {
  detail::check_batch(pred.size(), pred.logits.cols, labels, 1);
  if (!labels.is_hard()) throw DataError("accuracy is defined on hard labels only");
  std::size_t correct = 0;
  for (std::size_t r = 0; r < pred.size(); ++r) {
    if (argmax_row(pred.logits.row(r)) == index_of((*labels.classes)[r])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

namespace {

void check_mmd_inputs(const Matrix<double>& x, const Matrix<double>& y,
                      std::span<const double> bandwidths) {
  if (bandwidths.empty()) throw ConfigError("mmd: bandwidth list is empty");
  for (double s : bandwidths) {
    if (!(s > 0.0)) throw ConfigError("mmd: bandwidths must be positive");
  }
  if (x.rows < 2 || y.rows < 2) throw ShapeError("mmd: each sample set needs at least 2 rows");
  if (x.cols != y.cols) throw ShapeError("mmd: feature widths differ");
}

// Sum over bandwidths of exp(-d2 / (2 s^2)); also returns sum of kernel / s^2 for gradients.
inline std::pair<double, double> kernel_value(double d2, std::span<const double> inv_two_s2,
                                              std::span<const double> inv_s2) {
  double k = 0.0;
  double dk = 0.0;
  for (std::size_t b = 0; b < inv_two_s2.size(); ++b) {
    const double e = std::exp(-d2 * inv_two_s2[b]);
    k += e;
    dk += e * inv_s2[b];
  }
  return {k, dk};
}

// Mean kernel value over all pairs; when grad_a is non-null adds
// coef * sum_j dk(a_i, b_j)/da_i to row i of grad_a (and the mirrored term to grad_b).
double kernel_block(const Matrix<double>& a, const Matrix<double>& b,
                    std::span<const double> inv_two_s2, std::span<const double> inv_s2,
                    double coef, Matrix<double>* grad_a, Matrix<double>* grad_b) {
  double total = 0.0;
  std::vector<double> diff(a.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const auto bj = b.row(j);
      const double d2 = kernels::squared_distance(ai, bj);
      const auto [k, dk] = kernel_value(d2, inv_two_s2, inv_s2);
      total += k;
      if ((grad_a != nullptr || grad_b != nullptr) && dk != 0.0) {
        // dk(a,b)/da = -dk * (a - b)
        for (std::size_t c = 0; c < a.cols; ++c) diff[c] = ai[c] - bj[c];
        if (grad_a != nullptr) kernels::axpy(-coef * dk, diff, grad_a->row(i));
        if (grad_b != nullptr) kernels::axpy(coef * dk, diff, grad_b->row(j));
      }
    }
  }
  return total / static_cast<double>(a.rows * b.rows);
}

}  // namespace

double mmd_squared(const Matrix<double>& x, const Matrix<double>& y,
                   std::span<const double> bandwidths) {
  return mmd_squared_grad(x, y, bandwidths, 0.0, nullptr, nullptr);
}

double mmd_squared_grad(const Matrix<double>& x, const Matrix<double>& y,
                        std::span<const double> bandwidths, double scale, Matrix<double>* dx,
                        Matrix<double>* dy) {
  check_mmd_inputs(x, y, bandwidths);
  std::vector<double> inv_two_s2;
  std::vector<double> inv_s2;
  for (double s : bandwidths) {
    inv_two_s2.push_back(1.0 / (2.0 * s * s));
    inv_s2.push_back(1.0 / (s * s));
  }
  const bool want = dx != nullptr || dy != nullptr;
  const double n = static_cast<double>(x.rows);
  const double m = static_cast<double>(y.rows);
  // Within-set blocks: each unordered pair appears twice, so the gradient on
  // row i is 2/n^2 * sum dk; kernel_block applies coef to both endpoints.
  const double kxx = kernel_block(x, x, inv_two_s2, inv_s2, scale / (n * n),
                                  want ? dx : nullptr, want ? dx : nullptr);
  const double kyy = kernel_block(y, y, inv_two_s2, inv_s2, scale / (m * m),
                                  want ? dy : nullptr, want ? dy : nullptr);
  const double kxy = kernel_block(x, y, inv_two_s2, inv_s2, -2.0 * scale / (n * m),
                                  want ? dx : nullptr, want ? dy : nullptr);
  return std::max(0.0, kxx + kyy - 2.0 * kxy);
}

}  // namespace agedg::metrics
