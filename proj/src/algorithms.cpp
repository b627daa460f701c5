#include "agedg/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "agedg/detail/task_gradient.hpp"

namespace agedg::dg {

namespace {

using backbone::ModelState;
using metrics::CorrelationPolicy;

constexpr CorrelationPolicy kTrainPolicy = CorrelationPolicy::substitute_zero;
constexpr std::uint64_t kDiscriminatorSeedSalt = 0xC0DA77ED15C0DEULL;

std::vector<const DomainBatch*> pointers(const DomainBatchSet& batches) {
  std::vector<const DomainBatch*> out;
  out.reserve(batches.size());
  for (const auto& b : batches) out.push_back(&b);
  return out;
}

std::vector<double> uniform_weights(std::size_t k) {
  return std::vector<double>(k, 1.0 / static_cast<double>(k));
}

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

void sgd(std::vector<double>& params, std::span<const double> grad, double lr) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
}

void check_finite(const StepDiagnostics& diag, std::string_view algorithm) {
  if (std::isfinite(diag.loss) && std::isfinite(diag.grad_norm) &&
      (!diag.regulariser || std::isfinite(*diag.regulariser))) {
    return;
  }
  std::ostringstream os;
  os << algorithm << " step diverged: loss=" << diag.loss << " ce=" << diag.terms.ce
     << " mse=" << diag.terms.mse << " pcc=" << diag.terms.pcc << " ccc=" << diag.terms.ccc
     << " grad_norm=" << diag.grad_norm;
  if (diag.regulariser) os << " regulariser=" << *diag.regulariser;
  throw DivergenceError(os.str());
}

StepResult apply_task_update(const ModelState& state, const detail::TaskGradient<double>& g,
                             StepDiagnostics diag, double lr, std::string_view name) {
  diag.grad_norm = std::sqrt(squared_norm(g.dtheta) + squared_norm(g.dtheta_prime));
  check_finite(diag, name);
  StepResult result{state, std::move(diag)};
  sgd(result.state.theta, g.dtheta, lr);
  sgd(result.state.theta_prime, g.dtheta_prime, lr);
  return result;
}

StepDiagnostics base_diagnostics(const metrics::ShakeWeights& shake,
                                 const metrics::LossTerms<double>& terms) {
  StepDiagnostics diag;
  diag.shake = shake;
  diag.terms = terms;
  diag.loss = terms.total;
  return diag;
}

double sample_beta(double a, Rng& rng) {
  std::gamma_distribution<double> gamma(a, 1.0);
  for (;;) {
    const double x = gamma(rng);
    const double y = gamma(rng);
    if (x + y > 0.0) return x / (x + y);
  }
}

Matrix<double> one_hot_features(const Matrix<double>& features,
                                const std::vector<EmotionClass>& classes) {
  Matrix<double> out(features.rows, features.cols + kNumEmotions);
  for (std::size_t r = 0; r < features.rows; ++r) {
    std::copy(features.row(r).begin(), features.row(r).end(), out.row(r).begin());
    out(r, features.cols + index_of(classes[r])) = 1.0;
  }
  return out;
}

std::vector<EmotionClass> hard_classes(const metrics::LabelBatch& labels) {
  if (labels.classes) return *labels.classes;
  std::vector<EmotionClass> out;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    out.push_back(emotion_from_index(metrics::argmax_row(labels.emotion.row(r))));
  }
  return out;
}

}  // namespace

std::string_view algorithm_name(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::erm: return "erm";
    case Algorithm::mixup: return "mixup";
    case Algorithm::mmd: return "mmd";
    case Algorithm::cdann: return "cdann";
    case Algorithm::mldg: return "mldg";
  }
  return "erm";
}

std::optional<Algorithm> parse_algorithm(std::string_view name) noexcept {
  for (Algorithm a : kAllAlgorithms) {
    if (algorithm_name(a) == name) return a;
  }
  return std::nullopt;
}

void AlgorithmConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(mixup_alpha > 0.0)) throw ConfigError("mixup alpha must be positive");
  if (mixup_lambda && !(*mixup_lambda >= 0.0 && *mixup_lambda <= 1.0)) {
    throw ConfigError("mixup lambda must lie in [0, 1]");
  }
  if (!(mmd_weight >= 0.0)) throw ConfigError("mmd weight must be non-negative");
  if (mmd_bandwidths.empty()) throw ConfigError("mmd bandwidth list is empty");
  for (double s : mmd_bandwidths) {
    if (!(s > 0.0)) throw ConfigError("mmd bandwidths must be positive");
  }
  if (!(cdann_adv_weight >= 0.0)) throw ConfigError("cdann adversarial weight must be non-negative");
  for (auto h : cdann_hidden) {
    if (h == 0) throw ConfigError("cdann hidden widths must be positive");
  }
  if (mldg_inner_lr && !(*mldg_inner_lr >= 0.0)) throw ConfigError("mldg inner lr must be non-negative");
  if (!(mldg_meta_weight >= 0.0)) throw ConfigError("mldg meta weight must be non-negative");
}

void validate_batches(const DomainBatchSet& batches, std::size_t min_domains) {
  if (batches.size() < min_domains) {
    throw ConfigError("this update rule needs at least " + std::to_string(min_domains) +
                      " training domains, got " + std::to_string(batches.size()));
  }
  DomainSet seen;
  const std::size_t b = batches.front().inputs.rows;
  for (const auto& batch : batches) {
    if (seen.contains(batch.domain)) throw ConfigError("duplicate domain in batch set");
    seen.insert(batch.domain);
    if (batch.inputs.rows != b || batch.labels.size() != b) {
      throw ShapeError("all domain batches must have the same size");
    }
    if (b < 2) throw ShapeError("per-domain batch size must be at least 2");
  }
}

StepResult erm_step(const ModelState& state, const DomainBatchSet& batches,
                    const AlgorithmConfig& cfg, Rng& rng) {
  validate_batches(batches, 1);
  const auto shake = metrics::sample_shake_weights(rng);
  const auto g = detail::task_gradient<double>(state.arch, state.theta, state.theta_prime,
                                               pointers(batches), uniform_weights(batches.size()),
                                               shake.normalized(), kTrainPolicy, detail::NoHook{});
  return apply_task_update(state, g, base_diagnostics(shake, g.terms), cfg.learning_rate, "erm");
}

StepResult mmd_step(const ModelState& state, const DomainBatchSet& batches,
                    const AlgorithmConfig& cfg, Rng& rng) {
  validate_batches(batches, 2);
  const auto shake = metrics::sample_shake_weights(rng);
  double regulariser = 0.0;
  auto hook = [&](const std::vector<Matrix<double>>& feats, std::vector<Matrix<double>>& dfeats) {
    const std::size_t k = feats.size();
    const double pairs = static_cast<double>(k * (k - 1) / 2);
    const bool differentiate = cfg.mmd_weight != 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        regulariser += metrics::mmd_squared_grad(
                           feats[i], feats[j], cfg.mmd_bandwidths, cfg.mmd_weight / pairs,
                           differentiate ? &dfeats[i] : nullptr,
                           differentiate ? &dfeats[j] : nullptr) /
                       pairs;
      }
    }
  };
  const auto g = detail::task_gradient<double>(state.arch, state.theta, state.theta_prime,
                                               pointers(batches), uniform_weights(batches.size()),
                                               shake.normalized(), kTrainPolicy, hook);
  auto diag = base_diagnostics(shake, g.terms);
  diag.regulariser = regulariser;
  diag.loss = g.terms.total + cfg.mmd_weight * regulariser;
  return apply_task_update(state, g, std::move(diag), cfg.learning_rate, "mmd");
}

DiscriminatorEval discriminator_loss_grad(const backbone::DiscriminatorState& disc,
                                          const std::vector<DomainFeatures>& sets,
                                          std::span<double> dparams,
                                          std::vector<Matrix<double>>* dfeatures,
                                          double feature_scale) {
  const auto layout = backbone::discriminator_layout(disc);
  std::size_t total = 0;
  for (const auto& s : sets) total += s.features.rows;
  if (total == 0) throw ShapeError("discriminator needs at least one sample");
  const double inv_total = 1.0 / static_cast<double>(total);

  DiscriminatorEval eval;
  std::size_t correct = 0;
  for (std::size_t d = 0; d < sets.size(); ++d) {
    const auto& set = sets[d];
    if (set.features.cols + kNumEmotions != disc.input_dim) {
      throw ShapeError("discriminator input width mismatch");
    }
    backbone::DenseStack<double> stack;
    const auto& logits = stack.forward(layout, disc.params, one_hot_features(set.features, set.classes));
    const std::size_t target = ordinal(set.domain);
    Matrix<double> dlogits(logits.rows, logits.cols);
    for (std::size_t r = 0; r < logits.rows; ++r) {
      const auto row = logits.row(r);
      const double mx = *std::max_element(row.begin(), row.end());
      double sum = 0.0;
      for (double l : row) sum += std::exp(l - mx);
      eval.loss += (mx + std::log(sum) - row[target]) * inv_total;
      if (metrics::argmax_row(row) == target) ++correct;
      for (std::size_t c = 0; c < row.size(); ++c) {
        dlogits(r, c) = (std::exp(row[c] - mx) / sum - (c == target ? 1.0 : 0.0)) * inv_total;
      }
    }
    if (dparams.empty() && dfeatures == nullptr) continue;
    std::vector<double> scratch;
    std::span<double> dp = dparams;
    if (dp.empty()) {
      scratch.assign(disc.params.size(), 0.0);
      dp = scratch;
    }
    Matrix<double> dinput;
    stack.backward(layout, disc.params, std::move(dlogits), dp,
                   dfeatures != nullptr ? &dinput : nullptr);
    if (dfeatures != nullptr) {
      auto& df = (*dfeatures)[d];
      for (std::size_t r = 0; r < df.rows; ++r) {
        for (std::size_t c = 0; c < df.cols; ++c) df(r, c) += feature_scale * dinput(r, c);
      }
    }
  }
  eval.accuracy = static_cast<double>(correct) * inv_total;
  return eval;
}

DiscriminatorEval train_discriminator_step(backbone::DiscriminatorState& disc,
                                           const std::vector<DomainFeatures>& sets,
                                           double learning_rate) {
  std::vector<double> grad(disc.params.size(), 0.0);
  const auto eval = discriminator_loss_grad(disc, sets, grad, nullptr, 0.0);
  sgd(disc.params, grad, learning_rate);
  return eval;
}

StepResult cdann_step(const ModelState& state, const DomainBatchSet& batches,
                      const AlgorithmConfig& cfg, Rng& rng) {
  validate_batches(batches, 2);
  const auto shake = metrics::sample_shake_weights(rng);
  backbone::DiscriminatorState disc =
      state.auxiliary ? *state.auxiliary
                      : backbone::init_discriminator(state.arch.feature_dim, cfg.cdann_hidden,
                                                     state.seed ^ kDiscriminatorSeedSalt);
  std::vector<double> ddisc(disc.params.size(), 0.0);
  DiscriminatorEval adversary;
  auto hook = [&](const std::vector<Matrix<double>>& feats, std::vector<Matrix<double>>& dfeats) {
    std::vector<DomainFeatures> sets;
    sets.reserve(feats.size());
    for (std::size_t d = 0; d < feats.size(); ++d) {
      sets.push_back({batches[d].domain, feats[d], hard_classes(batches[d].labels)});
    }
    // Gradient reversal: the extractor ascends the discriminator loss.
    const bool reverse = cfg.cdann_adv_weight != 0.0;
    adversary = discriminator_loss_grad(disc, sets, ddisc, reverse ? &dfeats : nullptr,
                                        -cfg.cdann_adv_weight);
  };
  const auto g = detail::task_gradient<double>(state.arch, state.theta, state.theta_prime,
                                               pointers(batches), uniform_weights(batches.size()),
                                               shake.normalized(), kTrainPolicy, hook);
  auto diag = base_diagnostics(shake, g.terms);
  diag.regulariser = adversary.loss;
  auto result = apply_task_update(state, g, std::move(diag), cfg.learning_rate, "cdann");
  sgd(disc.params, ddisc, cfg.learning_rate);
  result.state.auxiliary = std::move(disc);
  return result;
}

StepResult mixup_step(const ModelState& state, const DomainBatchSet& batches,
                      const AlgorithmConfig& cfg, Rng& rng) {
  validate_batches(batches, 2);
  const auto shake = metrics::sample_shake_weights(rng);
  std::vector<std::size_t> order(batches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  StepDiagnostics diag;
  diag.shake = shake;
  for (std::size_t i = 0; i + 1 < order.size(); i += 2) {
    diag.mixup_pairs.emplace_back(order[i], order[i + 1]);
    diag.mixup_lambdas.push_back(cfg.mixup_lambda ? *cfg.mixup_lambda
                                                  : sample_beta(cfg.mixup_alpha, rng));
  }
  const std::size_t pairs = diag.mixup_pairs.size();
  const double unit_weight = 1.0 / static_cast<double>(pairs);
  const auto weights = shake.normalized();
  const auto& arch = state.arch;

  detail::TaskGradient<double> g;
  g.dtheta.assign(state.theta.size(), 0.0);
  g.dtheta_prime.assign(state.theta_prime.size(), 0.0);

  // Mixed labels: convex soft rows and convex valence/arousal.
  auto mix_labels = [](const metrics::LabelBatch& a, const metrics::LabelBatch& b, double lam) {
    Matrix<double> rows(a.size(), kNumEmotions);
    std::vector<double> val(a.size());
    std::vector<double> ar(a.size());
    for (std::size_t r = 0; r < a.size(); ++r) {
      for (std::size_t k = 0; k < kNumEmotions; ++k) {
        rows(r, k) = lam * a.emotion(r, k) + (1.0 - lam) * b.emotion(r, k);
      }
      val[r] = lam * a.valence[r] + (1.0 - lam) * b.valence[r];
      ar[r] = lam * a.arousal[r] + (1.0 - lam) * b.arousal[r];
    }
    return metrics::LabelBatch::soft(std::move(rows), std::move(val), std::move(ar));
  };
  auto mix = [](const Matrix<double>& a, const Matrix<double>& b, double lam) {
    Matrix<double> out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      out.data[i] = lam * a.data[i] + (1.0 - lam) * b.data[i];
    }
    return out;
  };
  auto accumulate_terms = [&](const metrics::LossTerms<double>& t) {
    g.terms.ce += unit_weight * t.ce;
    g.terms.mse += unit_weight * t.mse;
    g.terms.pcc += unit_weight * t.pcc;
    g.terms.ccc += unit_weight * t.ccc;
    g.terms.total += unit_weight * t.total;
  };

  struct PairPass {
    backbone::ExtractorPass<double> first, second;
    Matrix<double> dmixed;
  };
  std::vector<PairPass> passes(pairs);
  for (std::size_t p = 0; p < pairs; ++p) {
    const auto& a = batches[diag.mixup_pairs[p].first];
    const auto& b = batches[diag.mixup_pairs[p].second];
    const double lam = diag.mixup_lambdas[p];
    const auto labels = mix_labels(a.labels, b.labels, lam);
    Matrix<double> mixed;
    if (cfg.mixup_input_space) {
      mixed = passes[p].first.forward(arch, state.theta, mix(a.inputs, b.inputs, lam));
    } else {
      const auto& fa = passes[p].first.forward(arch, state.theta, a.inputs);
      const auto& fb = passes[p].second.forward(arch, state.theta, b.inputs);
      mixed = mix(fa, fb, lam);
    }
    backbone::ClassifierPass<double> classifier;
    const auto pred = classifier.forward(arch, state.theta_prime, mixed);
    metrics::PredictionBatch dpred(pred.size());
    accumulate_terms(metrics::composite_loss_grad<double>(pred, labels, weights, kTrainPolicy,
                                                          &dpred, unit_weight));
    passes[p].dmixed = classifier.backward(arch, state.theta_prime, dpred, g.dtheta_prime);
  }
  for (std::size_t p = 0; p < pairs; ++p) {
    const double lam = diag.mixup_lambdas[p];
    auto& dm = passes[p].dmixed;
    if (cfg.mixup_input_space) {
      passes[p].first.backward(arch, state.theta, std::move(dm), g.dtheta);
      continue;
    }
    if (lam != 1.0) {
      Matrix<double> db = dm;
      for (auto& v : db.data) v *= 1.0 - lam;
      if (lam != 0.0) {
        for (auto& v : dm.data) v *= lam;
        passes[p].first.backward(arch, state.theta, std::move(dm), g.dtheta);
      }
      passes[p].second.backward(arch, state.theta, std::move(db), g.dtheta);
    } else {
      passes[p].first.backward(arch, state.theta, std::move(dm), g.dtheta);
    }
  }
  diag.terms = g.terms;
  diag.loss = g.terms.total;
  return apply_task_update(state, g, std::move(diag), cfg.learning_rate, "mixup");
}

namespace {

struct MetaSplit {
  std::vector<const DomainBatch*> train;
  std::vector<const DomainBatch*> test;
};

MetaSplit meta_split(const DomainBatchSet& batches, std::size_t meta_test) {
  if (meta_test >= batches.size()) throw ConfigError("meta-test index out of range");
  MetaSplit s;
  for (std::size_t d = 0; d < batches.size(); ++d) {
    (d == meta_test ? s.test : s.train).push_back(&batches[d]);
  }
  return s;
}

std::vector<double> concat(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

struct OuterPieces {
  double train_loss = 0.0;
  double test_loss = 0.0;
  metrics::LossTerms<double> train_terms;
  std::vector<double> gradient;  // over theta ++ theta'
};

OuterPieces outer_pieces(const ModelState& state, const DomainBatchSet& batches,
                         std::size_t meta_test, const std::array<double, 3>& shake,
                         double inner_lr, double meta_weight, bool first_order,
                         bool want_gradient) {
  const auto split = meta_split(batches, meta_test);
  const auto& arch = state.arch;
  const std::size_t nt = state.theta.size();
  const auto tr = detail::task_gradient<double>(arch, state.theta, state.theta_prime, split.train,
                                                uniform_weights(split.train.size()), shake,
                                                kTrainPolicy, detail::NoHook{});
  OuterPieces out;
  out.train_loss = tr.terms.total;
  out.train_terms = tr.terms;
  out.gradient = concat(tr.dtheta, tr.dtheta_prime);
  if (meta_weight == 0.0) return out;

  std::vector<double> adapted_theta = state.theta;
  std::vector<double> adapted_prime = state.theta_prime;
  if (inner_lr != 0.0) {
    sgd(adapted_theta, tr.dtheta, inner_lr);
    sgd(adapted_prime, tr.dtheta_prime, inner_lr);
  }
  const auto te = detail::task_gradient<double>(arch, adapted_theta, adapted_prime, split.test,
                                                {1.0}, shake, kTrainPolicy, detail::NoHook{});
  out.test_loss = te.terms.total;
  if (!want_gradient) return out;

  std::vector<double> meta_grad = concat(te.dtheta, te.dtheta_prime);
  if (!first_order && inner_lr != 0.0) {
    // d/dtheta L_test(theta - a g(theta)) = (I - a H_train) grad L_test(adapted);
    // H_train * v from the dual part of the training gradient at (theta, v).
    std::vector<Dual> theta_d(nt);
    std::vector<Dual> prime_d(state.theta_prime.size());
    for (std::size_t i = 0; i < nt; ++i) theta_d[i] = Dual(state.theta[i], meta_grad[i]);
    for (std::size_t i = 0; i < prime_d.size(); ++i) {
      prime_d[i] = Dual(state.theta_prime[i], meta_grad[nt + i]);
    }
    const auto hv = detail::task_gradient<Dual>(arch, std::span<const Dual>(theta_d),
                                                std::span<const Dual>(prime_d), split.train,
                                                uniform_weights(split.train.size()), shake,
                                                kTrainPolicy, detail::NoHook{});
    for (std::size_t i = 0; i < nt; ++i) meta_grad[i] -= inner_lr * hv.dtheta[i].d;
    for (std::size_t i = 0; i < prime_d.size(); ++i) {
      meta_grad[nt + i] -= inner_lr * hv.dtheta_prime[i].d;
    }
  }
  for (std::size_t i = 0; i < out.gradient.size(); ++i) out.gradient[i] += meta_weight * meta_grad[i];
  return out;
}

}  // namespace

ObjectiveGradient weighted_task_gradient(const ModelState& state, const DomainBatchSet& batches,
                                         const std::vector<double>& weights,
                                         const std::array<double, 3>& shake) {
  if (weights.size() != batches.size()) throw ShapeError("one weight per batch required");
  const auto g = detail::task_gradient<double>(state.arch, state.theta, state.theta_prime,
                                               pointers(batches), weights, shake, kTrainPolicy,
                                               detail::NoHook{});
  return {g.terms.total, concat(g.dtheta, g.dtheta_prime)};
}

double mldg_outer_objective(const ModelState& state, const DomainBatchSet& batches,
                            std::size_t meta_test, const std::array<double, 3>& shake,
                            double inner_lr, double meta_weight) {
  const auto p = outer_pieces(state, batches, meta_test, shake, inner_lr, meta_weight, true, false);
  return p.train_loss + meta_weight * p.test_loss;
}

ObjectiveGradient mldg_outer_gradient(const ModelState& state, const DomainBatchSet& batches,
                                      std::size_t meta_test, const std::array<double, 3>& shake,
                                      double inner_lr, double meta_weight, bool first_order) {
  auto p = outer_pieces(state, batches, meta_test, shake, inner_lr, meta_weight, first_order, true);
  return {p.train_loss + meta_weight * p.test_loss, std::move(p.gradient)};
}

StepResult mldg_step(const ModelState& state, const DomainBatchSet& batches,
                     const AlgorithmConfig& cfg, Rng& rng) {
  validate_batches(batches, 2);
  const auto shake = metrics::sample_shake_weights(rng);
  std::uniform_int_distribution<std::size_t> pick(0, batches.size() - 1);
  const std::size_t meta_test = pick(rng);
  const auto p = outer_pieces(state, batches, meta_test, shake.normalized(), cfg.inner_lr(),
                              cfg.mldg_meta_weight, cfg.mldg_first_order, true);
  detail::TaskGradient<double> g;
  const std::size_t nt = state.theta.size();
  g.dtheta.assign(p.gradient.begin(), p.gradient.begin() + static_cast<std::ptrdiff_t>(nt));
  g.dtheta_prime.assign(p.gradient.begin() + static_cast<std::ptrdiff_t>(nt), p.gradient.end());
  auto diag = base_diagnostics(shake, p.train_terms);
  diag.loss = p.train_loss + cfg.mldg_meta_weight * p.test_loss;
  diag.meta_test_index = meta_test;
  return apply_task_update(state, g, std::move(diag), cfg.learning_rate, "mldg");
}

StepResult step(const ModelState& state, const DomainBatchSet& batches, const AlgorithmConfig& cfg,
                Rng& rng) {
  switch (cfg.algorithm) {
    case Algorithm::erm: return erm_step(state, batches, cfg, rng);
    case Algorithm::mixup: return mixup_step(state, batches, cfg, rng);
    case Algorithm::mmd: return mmd_step(state, batches, cfg, rng);
    case Algorithm::cdann: return cdann_step(state, batches, cfg, rng);
    case Algorithm::mldg: return mldg_step(state, batches, cfg, rng);
  }
  throw ConfigError("unknown algorithm");
}

}  // namespace agedg::dg
