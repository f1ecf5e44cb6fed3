#pragma once

#include <fstream>
#include <string>

#include "json.hpp"
#include "kgrec/error.hpp"
#include "kgrec/kg_model.hpp"

namespace kgrec {

inline constexpr const char* kModelFormat = "kgrec-model-v1";

inline nlohmann::json read_json_file(const std::string& path, const std::string& expected_format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path + "' is not valid JSON: " + e.what());
  }
  const auto format = j.is_object() ? j.value("format", std::string{}) : std::string{};
  if (format != expected_format) {
    throw DataError("schema version mismatch in '" + path + "': expected " + expected_format +
                    ", found '" + format + "'");
  }
  return j;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << j.dump(1) << '\n';
}

namespace detail {

template <class M>
nlohmann::json matrix_to_json(const M& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

template <class M>
M matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols,
                   const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw DataError("checkpoint: '" + what + "' has wrong row count");
  M m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw DataError("checkpoint: '" + what + "' has wrong column count");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j, Eigen::Index n,
                                        const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n)
    throw DataError("checkpoint: '" + what + "' has wrong length");
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace detail

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"d", c.dim},
          {"k", c.slices},
          {"gamma", c.margin},
          {"alpha", c.alpha},
          {"s", c.noise},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"optimizer", to_string(c.optimizer)},
          {"rmsprop_decay", c.rmsprop_decay},
          {"seed", c.seed},
          {"sum_slices", c.sum_slices},
          {"max_norm_entities", c.max_norm_entities}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.dim = j.at("d").get<int>();
  c.slices = j.at("k").get<int>();
  c.margin = j.value("gamma", c.margin);
  c.alpha = j.value("alpha", c.alpha);
  c.noise = j.value("s", c.noise);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.optimizer = parse_optimizer(j.value("optimizer", std::string("gd")));
  c.rmsprop_decay = j.value("rmsprop_decay", c.rmsprop_decay);
  c.seed = j.value("seed", c.seed);
  c.sum_slices = j.value("sum_slices", c.sum_slices);
  c.max_norm_entities = j.value("max_norm_entities", c.max_norm_entities);
  return c;
}

inline nlohmann::json model_to_json(const KgModel& model) {
  nlohmann::json relation_params = nlohmann::json::object();
  for (std::size_t r = 0; r < model.relations.size(); ++r) {
    const auto& rp = model.params.relations[r];
    nlohmann::json entry;
    if (model.variant() == Variant::transe) {
      entry["t"] = detail::vector_to_json(rp.t);
    } else {
      nlohmann::json w = nlohmann::json::array();
      for (const auto& slice : rp.W) w.push_back(detail::matrix_to_json(slice));
      entry["W"] = std::move(w);
      entry["V"] = detail::matrix_to_json(rp.V);
      entry["b"] = detail::vector_to_json(rp.b);
      entry["u"] = detail::vector_to_json(rp.u);
    }
    relation_params[model.relations.label(static_cast<RelationId>(r))] = std::move(entry);
  }
  return {{"format", kModelFormat},
          {"variant", to_string(model.variant())},
          {"d", model.dim()},
          {"k", model.slices()},
          {"entities", model.entities.labels()},
          {"relations", model.relations.labels()},
          {"entity_vecs", detail::matrix_to_json(model.params.entities)},
          {"relation_params", std::move(relation_params)},
          {"config", config_to_json(model.config)}};
}

inline KgModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != kModelFormat)
    throw DataError(std::string("schema version mismatch: expected ") + kModelFormat);
  try {
    KgModel model;
    model.config = config_from_json(j.at("config"));
    model.config.variant = parse_variant(j.at("variant").get<std::string>());
    model.config.dim = j.at("d").get<int>();
    model.config.slices = j.at("k").get<int>();
    const auto entity_labels = j.at("entities").get<std::vector<std::string>>();
    const auto relation_labels = j.at("relations").get<std::vector<std::string>>();
    model.entities = Vocabulary(entity_labels);
    model.relations = Vocabulary(relation_labels);
    if (model.entities.size() != entity_labels.size() ||
        model.relations.size() != relation_labels.size())
      throw DataError("checkpoint: duplicate labels in vocabulary");
    const Eigen::Index d = model.dim();
    const Eigen::Index k = model.slices();
    model.params.entities = detail::matrix_from_json<EntityMatrix>(
        j.at("entity_vecs"), static_cast<Eigen::Index>(entity_labels.size()), d, "entity_vecs");
    const auto& rel = j.at("relation_params");
    for (const auto& label : relation_labels) {
      const auto& entry = rel.at(label);
      RelationParams rp;
      if (model.variant() == Variant::transe) {
        rp.t = detail::vector_from_json(entry.at("t"), d, label + ".t");
      } else {
        const auto& w = entry.at("W");
        if (!w.is_array() || static_cast<Eigen::Index>(w.size()) != k)
          throw DataError("checkpoint: '" + label + ".W' has wrong slice count");
        for (const auto& slice : w)
          rp.W.push_back(detail::matrix_from_json<Eigen::MatrixXd>(slice, d, d, label + ".W"));
        rp.V = detail::matrix_from_json<Eigen::MatrixXd>(entry.at("V"), k, 2 * d, label + ".V");
        rp.b = detail::vector_from_json(entry.at("b"), k, label + ".b");
        rp.u = detail::vector_from_json(entry.at("u"), k, label + ".u");
      }
      model.params.relations.push_back(std::move(rp));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed model: ") + e.what());
  }
}

inline void save_model(const std::string& path, const KgModel& model) {
  write_json_file(path, model_to_json(model));
}

inline KgModel load_model(const std::string& path) {
  return model_from_json(read_json_file(path, kModelFormat));
}

}  // namespace kgrec
