#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <vector>

#include "kgrec/kg_model.hpp"

namespace kgrec {

enum class Objective { hinge, smooth };

// g_hat(e) = g(e) + eps, eps ~ N(0, s^2 I).
inline Eigen::VectorXd perturb(const VecRef& vec, double s, Rng& rng) {
  require(s >= 0.0, "perturb: s must be >= 0");
  return vec + gaussian_vector(vec.size(), s, rng);
}

// One perturbation per entity touched by a batch; an entity appearing several
// times in the batch sees the same offset.
struct EntityNoise {
  std::map<EntityId, Eigen::VectorXd> offsets;

  Eigen::VectorXd apply(const KgModel& model, EntityId e) const {
    auto it = offsets.find(e);
    if (it == offsets.end()) return model.entity(e);
    return model.entity(e) + it->second;
  }
};

// Offsets are drawn in first-appearance order over (head, tail) of positives,
// then tails of negatives.
inline EntityNoise draw_noise(const KgModel& model, std::span<const Triple> positives,
                              std::span<const Triple> negatives, double s, Rng& rng) {
  EntityNoise noise;
  auto touch = [&](EntityId e) {
    if (!noise.offsets.contains(e)) noise.offsets.emplace(e, gaussian_vector(model.dim(), s, rng));
  };
  for (const auto& t : positives) {
    touch(t.head);
    touch(t.tail);
  }
  for (const auto& t : negatives) {
    touch(t.head);
    touch(t.tail);
  }
  return noise;
}

namespace detail {

inline void check_batch(std::span<const Triple> positives, std::span<const Triple> negatives) {
  if (positives.empty()) throw std::invalid_argument("hinge loss: empty batch");
  if (positives.size() != negatives.size())
    throw std::invalid_argument("hinge loss: positives and negatives are misaligned");
}

// Mean hinge loss with entity vectors optionally shifted by `noise`. When
// `grad` is non-null, adds weight * dL/dparams to it.
inline double hinge_pass(const KgModel& model, std::span<const Triple> positives,
                         std::span<const Triple> negatives, const EntityNoise* noise,
                         double weight, GradientSet* grad) {
  const double inv_n = 1.0 / static_cast<double>(positives.size());
  const double margin = model.config.margin;
  auto vec = [&](EntityId e) -> Eigen::VectorXd {
    return noise ? noise->apply(model, e) : Eigen::VectorXd(model.entity(e));
  };
  double total = 0.0;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const auto& p = positives[i];
    const auto& q = negatives[i];
    const Eigen::VectorXd ph = vec(p.head), pt = vec(p.tail);
    const Eigen::VectorXd qh = vec(q.head), qt = vec(q.tail);
    const double term =
        margin + score(model, ph, p.relation, pt) - score(model, qh, q.relation, qt);
    if (term <= 0.0) continue;  // inactive pair, subgradient 0 at the kink
    total += term;
    if (grad) {
      accumulate_score_gradient(model, p.head, ph, p.relation, p.tail, pt, weight * inv_n, *grad);
      accumulate_score_gradient(model, q.head, qh, q.relation, q.tail, qt, -weight * inv_n, *grad);
    }
  }
  return total * inv_n;
}

}  // namespace detail

// (1/N) sum [gamma + f(pos_i) - f(neg_i)]_+
inline double batch_hinge_loss(const KgModel& model, std::span<const Triple> positives,
                               std::span<const Triple> negatives) {
  detail::check_batch(positives, negatives);
  return detail::hinge_pass(model, positives, negatives, nullptr, 1.0, nullptr);
}

// alpha * L_E(g) + (1 - alpha) * L_E(g_hat) with the perturbation given.
inline double smooth_loss(const KgModel& model, std::span<const Triple> positives,
                          std::span<const Triple> negatives, double alpha,
                          const EntityNoise& noise) {
  detail::check_batch(positives, negatives);
  require(alpha > 0.0 && alpha <= 1.0, "smooth_loss: alpha must lie in (0, 1]");
  const double clean = detail::hinge_pass(model, positives, negatives, nullptr, 1.0, nullptr);
  if (alpha == 1.0) return clean;
  const double noisy = detail::hinge_pass(model, positives, negatives, &noise, 1.0, nullptr);
  return alpha * clean + (1.0 - alpha) * noisy;
}

// Draws a fresh perturbation for every entity used in the batch.
inline double smooth_loss(const KgModel& model, std::span<const Triple> positives,
                          std::span<const Triple> negatives, double alpha, double s, Rng& rng) {
  detail::check_batch(positives, negatives);
  require(s >= 0.0, "smooth_loss: s must be >= 0");
  if (s == 0.0) {
    require(alpha > 0.0 && alpha <= 1.0, "smooth_loss: alpha must lie in (0, 1]");
    return batch_hinge_loss(model, positives, negatives);
  }
  const auto noise = draw_noise(model, positives, negatives, s, rng);
  return smooth_loss(model, positives, negatives, alpha, noise);
}

struct LossAndGradient {
  double loss = 0.0;
  GradientSet gradient;
};

// Loss value and its exact gradient. `noise` is required for the smooth
// objective and ignored for hinge.
inline LossAndGradient loss_and_gradients(const KgModel& model, std::span<const Triple> positives,
                                          std::span<const Triple> negatives, Objective objective,
                                          double alpha = 1.0, const EntityNoise* noise = nullptr) {
  detail::check_batch(positives, negatives);
  LossAndGradient out;
  out.gradient = model.params.zeros_like();
  if (objective == Objective::hinge || alpha == 1.0) {
    out.loss = detail::hinge_pass(model, positives, negatives, nullptr, 1.0, &out.gradient);
    return out;
  }
  require(alpha > 0.0 && alpha < 1.0, "loss_gradients: alpha must lie in (0, 1]");
  if (!noise) throw std::invalid_argument("loss_gradients: smooth objective needs a perturbation");
  const double clean =
      detail::hinge_pass(model, positives, negatives, nullptr, alpha, &out.gradient);
  const double noisy =
      detail::hinge_pass(model, positives, negatives, noise, 1.0 - alpha, &out.gradient);
  out.loss = alpha * clean + (1.0 - alpha) * noisy;
  return out;
}

inline GradientSet loss_gradients(const KgModel& model, std::span<const Triple> positives,
                                  std::span<const Triple> negatives, Objective objective,
                                  double alpha = 1.0, const EntityNoise* noise = nullptr) {
  return loss_and_gradients(model, positives, negatives, objective, alpha, noise).gradient;
}

}  // namespace kgrec
