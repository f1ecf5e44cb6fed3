#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kgrec/error.hpp"
#include "kgrec/random.hpp"
#include "kgrec/triple_store.hpp"

namespace kgrec {

enum class Variant { transe, ntl, sntl };
enum class OptimizerKind { gradient_descent, rmsprop };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::transe: return "transe";
    case Variant::ntl: return "ntl";
    case Variant::sntl: return "sntl";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "transe") return Variant::transe;
  if (s == "ntl") return Variant::ntl;
  if (s == "sntl") return Variant::sntl;
  throw std::invalid_argument("unknown model variant '" + s + "'");
}

inline std::string to_string(OptimizerKind o) {
  return o == OptimizerKind::rmsprop ? "rmsprop" : "gd";
}

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "gd" || s == "sgd") return OptimizerKind::gradient_descent;
  if (s == "rmsprop") return OptimizerKind::rmsprop;
  throw std::invalid_argument("unknown optimizer '" + s + "'");
}

struct ModelConfig {
  Variant variant = Variant::sntl;
  int dim = 60;
  int slices = 6;
  double margin = 1.0;  // gamma
  double alpha = 0.5;   // weight of the clean term in the smoothed loss
  double noise = 0.1;   // perturbation standard deviation s
  int epochs = 300;
  int batch_size = 10000;
  double learning_rate = 0.5;
  OptimizerKind optimizer = OptimizerKind::gradient_descent;
  double rmsprop_decay = 0.9;
  std::uint64_t seed = 0;
  // Freeze the slice combination vector at all-ones (plain slice sum).
  bool sum_slices = false;
  // Project entity rows back into the unit ball after every step.
  bool max_norm_entities = true;

  void validate() const {
    require(dim >= 1, "config: dim must be >= 1");
    require(slices >= 1, "config: slices must be >= 1");
    require(margin > 0.0, "config: margin must be > 0");
    require(alpha > 0.0 && alpha <= 1.0, "config: alpha must lie in (0, 1]");
    require(noise >= 0.0, "config: noise must be >= 0");
    require(epochs >= 0, "config: epochs must be >= 0");
    require(batch_size >= 1, "config: batch_size must be >= 1");
    require(learning_rate >= 0.0, "config: learning_rate must be >= 0");
    require(rmsprop_decay > 0.0 && rmsprop_decay < 1.0, "config: rmsprop_decay must lie in (0, 1)");
  }
};

using EntityMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Neural tensor layer parameters (W, V, b, u) or a TransE translation t.
struct RelationParams {
  std::vector<Eigen::MatrixXd> W;  // k slices of d x d
  Eigen::MatrixXd V;               // k x 2d
  Eigen::VectorXd b;               // k
  Eigen::VectorXd u;               // k
  Eigen::VectorXd t;               // d, TransE only
};

struct Parameters {
  EntityMatrix entities;  // |E'| x d, row e = g(e)
  std::vector<RelationParams> relations;

  Parameters zeros_like() const {
    Parameters z;
    z.entities = EntityMatrix::Zero(entities.rows(), entities.cols());
    z.relations.reserve(relations.size());
    for (const auto& r : relations) {
      RelationParams zr;
      for (const auto& w : r.W) zr.W.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
      zr.V = Eigen::MatrixXd::Zero(r.V.rows(), r.V.cols());
      zr.b = Eigen::VectorXd::Zero(r.b.size());
      zr.u = Eigen::VectorXd::Zero(r.u.size());
      zr.t = Eigen::VectorXd::Zero(r.t.size());
      z.relations.push_back(std::move(zr));
    }
    return z;
  }
};

// Partial derivatives with the same layout as Parameters.
using GradientSet = Parameters;

// Calls f(block_a, block_b) on flat views of every corresponding parameter
// block, in a fixed order: entities, then per relation W slices, V, b, u, t.
template <class A, class B, class F>
void zip_blocks(A& a, B& b, F&& f) {
  auto flat = [](auto& m) {
    using Scalar = std::remove_reference_t<decltype(*m.data())>;
    using Vec = std::conditional_t<std::is_const_v<Scalar>, const Eigen::VectorXd,
                                   Eigen::VectorXd>;
    return Eigen::Map<Vec>(m.data(), m.size());
  };
  f(flat(a.entities), flat(b.entities));
  for (std::size_t r = 0; r < a.relations.size(); ++r) {
    auto& ra = a.relations[r];
    auto& rb = b.relations[r];
    for (std::size_t i = 0; i < ra.W.size(); ++i) f(flat(ra.W[i]), flat(rb.W[i]));
    f(flat(ra.V), flat(rb.V));
    f(flat(ra.b), flat(rb.b));
    f(flat(ra.u), flat(rb.u));
    f(flat(ra.t), flat(rb.t));
  }
}

inline std::size_t parameter_count(const Parameters& p) {
  std::size_t n = 0;
  zip_blocks(p, p, [&](auto a, auto) { n += static_cast<std::size_t>(a.size()); });
  return n;
}

inline Eigen::VectorXd flatten(const Parameters& p) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(parameter_count(p)));
  Eigen::Index offset = 0;
  zip_blocks(p, p, [&](auto a, auto) {
    out.segment(offset, a.size()) = a;
    offset += a.size();
  });
  return out;
}

inline void unflatten(const Eigen::VectorXd& values, Parameters& p) {
  require(static_cast<std::size_t>(values.size()) == parameter_count(p),
          "unflatten: size mismatch");
  Eigen::Index offset = 0;
  zip_blocks(p, p, [&](auto a, auto) {
    a = values.segment(offset, a.size());
    offset += a.size();
  });
}

struct KgModel {
  ModelConfig config;
  Vocabulary entities;
  Vocabulary relations;
  Parameters params;

  Variant variant() const { return config.variant; }
  int dim() const { return config.dim; }
  int slices() const { return config.slices; }

  auto entity(EntityId e) const { return params.entities.row(e).transpose(); }
};

inline KgModel init_model(const ModelConfig& config, Vocabulary entities, Vocabulary relations) {
  config.validate();
  KgModel model;
  model.config = config;
  model.entities = std::move(entities);
  model.relations = std::move(relations);

  const int d = config.dim;
  const int k = config.slices;
  Rng rng(config.seed);
  const double entity_bound = 0.5 / std::sqrt(static_cast<double>(d));
  const double pair_bound = 0.5 / std::sqrt(2.0 * d);
  auto fill = [&](auto& m, double bound) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = uniform(-bound, bound, rng);
  };

  model.params.entities.resize(static_cast<Eigen::Index>(model.entities.size()), d);
  fill(model.params.entities, entity_bound);
  for (std::size_t r = 0; r < model.relations.size(); ++r) {
    RelationParams rp;
    if (config.variant == Variant::transe) {
      rp.t.resize(d);
      for (Eigen::Index i = 0; i < d; ++i) rp.t[i] = uniform(-entity_bound, entity_bound, rng);
    } else {
      for (int s = 0; s < k; ++s) {
        Eigen::MatrixXd w(d, d);
        fill(w, entity_bound);
        rp.W.push_back(std::move(w));
      }
      rp.V.resize(k, 2 * d);
      fill(rp.V, pair_bound);
      rp.b = Eigen::VectorXd::Zero(k);
      rp.u = Eigen::VectorXd::Ones(k);
    }
    model.params.relations.push_back(std::move(rp));
  }
  return model;
}

inline KgModel init_model(const ModelConfig& config, std::size_t entity_count,
                          std::size_t relation_count) {
  Vocabulary entities, relations;
  for (std::size_t i = 0; i < entity_count; ++i) entities.add("e" + std::to_string(i));
  for (std::size_t i = 0; i < relation_count; ++i) relations.add("r" + std::to_string(i));
  return init_model(config, std::move(entities), std::move(relations));
}

using VecRef = Eigen::Ref<const Eigen::VectorXd>;

namespace detail {

inline void check_dims(const KgModel& model, const VecRef& h, RelationId r, const VecRef& t) {
  if (h.size() != model.dim() || t.size() != model.dim())
    throw std::invalid_argument("score: vector dimension does not match model dimension " +
                                std::to_string(model.dim()));
  if (r >= model.params.relations.size())
    throw std::invalid_argument("score: relation id out of range");
}

// Pre-activation of every slice: h^T W_i t + V_i [h; t] + b_i.
inline Eigen::VectorXd slice_activations(const RelationParams& rp, const VecRef& h,
                                         const VecRef& t) {
  const auto d = h.size();
  const auto k = static_cast<Eigen::Index>(rp.W.size());
  Eigen::VectorXd z(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    z[i] = h.dot(rp.W[static_cast<std::size_t>(i)] * t) + rp.V.row(i).head(d).dot(h) +
           rp.V.row(i).tail(d).dot(t) + rp.b[i];
  }
  return z;
}

}  // namespace detail

// Lower is more likely true. NTL/SNTL: u_r . tanh(z); TransE: ||h + t_r - t||_2.
inline double score(const KgModel& model, const VecRef& h, RelationId r, const VecRef& t) {
  detail::check_dims(model, h, r, t);
  const auto& rp = model.params.relations[r];
  if (model.variant() == Variant::transe) return (h + rp.t - t).norm();
  return rp.u.dot(detail::slice_activations(rp, h, t).array().tanh().matrix());
}

inline double score(const KgModel& model, const Triple& triple) {
  return score(model, model.entity(triple.head), triple.relation, model.entity(triple.tail));
}

// grad += weight * d score / d params, with h and t standing for the rows of
// `head` and `tail` (possibly perturbed copies of them).
inline void accumulate_score_gradient(const KgModel& model, EntityId head, const VecRef& h,
                                      RelationId r, EntityId tail, const VecRef& t,
                                      double weight, GradientSet& grad) {
  const auto& rp = model.params.relations[r];
  auto& gr = grad.relations[r];
  const auto d = h.size();
  if (model.variant() == Variant::transe) {
    const Eigen::VectorXd diff = h + rp.t - t;
    const double n = diff.norm();
    if (n == 0.0) return;  // subgradient 0 at the cusp
    const Eigen::VectorXd g = (weight / n) * diff;
    grad.entities.row(head) += g.transpose();
    grad.entities.row(tail) -= g.transpose();
    gr.t += g;
    return;
  }
  const Eigen::VectorXd z = detail::slice_activations(rp, h, t);
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double act = std::tanh(z[i]);
    const double gz = weight * rp.u[i] * (1.0 - act * act);
    const auto& w = rp.W[static_cast<std::size_t>(i)];
    grad.entities.row(head) += gz * (w * t + rp.V.row(i).head(d).transpose()).transpose();
    grad.entities.row(tail) += gz * (w.transpose() * h + rp.V.row(i).tail(d).transpose()).transpose();
    gr.W[static_cast<std::size_t>(i)] += gz * h * t.transpose();
    gr.V.row(i).head(d) += gz * h.transpose();
    gr.V.row(i).tail(d) += gz * t.transpose();
    gr.b[i] += gz;
    if (!model.config.sum_slices) gr.u[i] += weight * act;
  }
}

}  // namespace kgrec
