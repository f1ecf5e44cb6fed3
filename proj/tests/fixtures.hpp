#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kgrec/kgrec.hpp"

namespace kgrec::testing {

using Row = std::array<std::string, 3>;

inline TripleStore store_of(const std::vector<Row>& rows) {
  TripleStore store;
  for (const auto& r : rows) store.insert(r[0], r[1], r[2]);
  return store;
}

inline TripleStore parse(const std::string& text) {
  std::istringstream in(text);
  return read_triples(in);
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("kgrec_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// 5-node chain a -> b -> c -> d -> e under relation r.
inline TripleStore chain5() {
  return store_of({{"a", "r", "b"}, {"b", "r", "c"}, {"c", "r", "d"}, {"d", "r", "e"}});
}

// Small model with every parameter drawn from N(0, scale^2).
inline KgModel random_model(Variant variant, int d, int k, std::size_t entities,
                            std::size_t relations, Rng& rng, double scale = 0.6) {
  ModelConfig config;
  config.variant = variant;
  config.dim = d;
  config.slices = k;
  auto model = init_model(config, entities, relations);
  Eigen::VectorXd flat = flatten(model.params);
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] = gaussian_vector(1, scale, rng)[0];
  unflatten(flat, model.params);
  return model;
}

struct GradientCase {
  KgModel model;
  std::vector<Triple> positives;
  std::vector<Triple> negatives;
  EntityNoise noise;
  double alpha = 0.5;
};

// Distance of the nearest hinge term from its kink.
inline double kink_distance(const KgModel& model, const std::vector<Triple>& pos,
                            const std::vector<Triple>& neg, const EntityNoise* noise) {
  double nearest = 1e300;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    auto vec = [&](EntityId e) -> Eigen::VectorXd {
      return noise ? noise->apply(model, e) : Eigen::VectorXd(model.entity(e));
    };
    const double term = model.config.margin +
                        score(model, vec(pos[i].head), pos[i].relation, vec(pos[i].tail)) -
                        score(model, vec(neg[i].head), neg[i].relation, vec(neg[i].tail));
    nearest = std::min(nearest, std::abs(term));
  }
  return nearest;
}

// Random small NTL model with a 5-triple batch kept away from hinge kinks.
inline GradientCase random_gradient_case(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> pick_d(2, 4), pick_k(1, 3);
  const int d = pick_d(rng), k = pick_k(rng);
  constexpr std::size_t kEntities = 6, kRelations = 2;
  while (true) {
    GradientCase c{random_model(Variant::ntl, d, k, kEntities, kRelations, rng), {}, {}, {}, 0.5};
    c.model.config.margin = uniform(0.2, 1.5, rng);
    c.alpha = uniform(0.1, 0.9, rng);
    std::uniform_int_distribution<EntityId> pe(0, kEntities - 1);
    std::uniform_int_distribution<RelationId> pr(0, kRelations - 1);
    for (int i = 0; i < 5; ++i) {
      const Triple p{pe(rng), pr(rng), pe(rng)};
      c.positives.push_back(p);
      c.negatives.push_back({p.head, p.relation, pe(rng)});
    }
    c.noise = draw_noise(c.model, c.positives, c.negatives, 0.1, rng);
    if (kink_distance(c.model, c.positives, c.negatives, nullptr) > 1e-3 &&
        kink_distance(c.model, c.positives, c.negatives, &c.noise) > 1e-3)
      return c;
  }
}

}  // namespace kgrec::testing
