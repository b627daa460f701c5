#pragma once

#include <span>
#include <type_traits>
#include <vector>

#include "agedg/algorithms.hpp"
#include "agedg/backbone.hpp"
#include "agedg/metrics.hpp"

namespace agedg::dg::detail {

template <class T>
struct TaskGradient {
  metrics::LossTerms<T> terms;  // weighted sums over batches
  std::vector<T> dtheta;
  std::vector<T> dtheta_prime;
};

/// Weighted sum of per-batch composite losses and its gradient. The hook runs
/// between the classifier and extractor backward passes with the per-batch
/// features and the gradients flowing into them, which it may extend.
template <class T, class Hook>
TaskGradient<T> task_gradient(const backbone::Architecture& arch, std::span<const T> theta,
                              std::span<const T> theta_prime,
                              const std::vector<const DomainBatch*>& batches,
                              const std::vector<double>& weights,
                              const std::array<double, 3>& shake,
                              metrics::CorrelationPolicy policy, Hook&& hook) {
  const std::size_t k = batches.size();
  TaskGradient<T> out;
  out.dtheta.assign(theta.size(), T(0.0));
  out.dtheta_prime.assign(theta_prime.size(), T(0.0));

  std::vector<backbone::ExtractorPass<T>> extractors(k);
  std::vector<Matrix<T>> features(k);
  std::vector<Matrix<T>> dfeatures(k);
  for (std::size_t d = 0; d < k; ++d) {
    const DomainBatch& batch = *batches[d];
    if constexpr (std::is_same_v<T, double>) {
      features[d] = extractors[d].forward(arch, theta, batch.inputs);
    } else {
      features[d] = extractors[d].forward(arch, theta, matrix_cast<T>(batch.inputs));
    }
    backbone::ClassifierPass<T> classifier;
    const auto pred = classifier.forward(arch, theta_prime, features[d]);
    metrics::Predictions<T> dpred(pred.size());
    const auto terms = metrics::composite_loss_grad<T>(pred, batch.labels, shake, policy, &dpred,
                                                       weights[d]);
    const T w(weights[d]);
    out.terms.ce += w * terms.ce;
    out.terms.mse += w * terms.mse;
    out.terms.pcc += w * terms.pcc;
    out.terms.ccc += w * terms.ccc;
    out.terms.total += w * terms.total;
    dfeatures[d] = classifier.backward(arch, theta_prime, dpred, out.dtheta_prime);
  }
  hook(features, dfeatures);
  for (std::size_t d = 0; d < k; ++d) {
    extractors[d].backward(arch, theta, std::move(dfeatures[d]), out.dtheta);
  }
  return out;
}

struct NoHook {
  template <class F, class G>
  void operator()(const F&, G&) const noexcept {}
};

}  // namespace agedg::dg::detail
