#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "kgrec/checkpoint.hpp"
#include "kgrec/error.hpp"
#include "kgrec/random.hpp"
#include "kgrec/triple_store.hpp"

namespace kgrec {

inline constexpr const char* kFeatureHeader = "#kgrec-features-v1";
inline constexpr const char* kEmbedderFormat = "kgrec-embedder-v1";

struct FeatureRecord {
  std::string image_id;
  std::string label;  // entity label, or "?" for open-world images
  Eigen::VectorXd feature;
};

struct FeatureSet {
  int dim = 0;
  std::vector<FeatureRecord> records;
};

inline FeatureSet read_features(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty feature file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::string prefix = std::string(kFeatureHeader) + " dim=";
  if (line.rfind(kFeatureHeader, 0) != 0)
    throw DataError(source + ": schema version mismatch: expected header '" + kFeatureHeader + "'");
  if (line.rfind(prefix, 0) != 0) throw DataError(source + ":1: malformed feature header");
  FeatureSet set;
  {
    const auto digits = line.substr(prefix.size());
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), set.dim);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || set.dim < 1)
      throw DataError(source + ":1: malformed feature dimension");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto where = source + ":" + std::to_string(line_no);
    const auto fields = split_tabs(line);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty())
      throw DataError(where + ": expected image_id<TAB>label<TAB>values");
    FeatureRecord rec{std::string(fields[0]), std::string(fields[1]), Eigen::VectorXd(set.dim)};
    std::string_view values = fields[2];
    int count = 0;
    std::size_t start = 0;
    while (start <= values.size()) {
      auto comma = values.find(',', start);
      if (comma == std::string_view::npos) comma = values.size();
      const auto token = values.substr(start, comma - start);
      if (count >= set.dim)
        throw DataError(where + ": more than " + std::to_string(set.dim) + " values");
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(v))
        throw DataError(where + ": bad value '" + std::string(token) + "'");
      rec.feature[count++] = v;
      start = comma + 1;
    }
    if (count != set.dim)
      throw DataError(where + ": expected " + std::to_string(set.dim) + " values, got " +
                      std::to_string(count));
    set.records.push_back(std::move(rec));
  }
  return set;
}

inline FeatureSet load_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature file '" + path + "'");
  return read_features(in, path);
}

inline void write_features(std::ostream& out, const FeatureSet& set) {
  out << kFeatureHeader << " dim=" << set.dim << '\n';
  out.precision(17);
  for (const auto& r : set.records) {
    out << r.image_id << '\t' << r.label << '\t';
    for (Eigen::Index i = 0; i < r.feature.size(); ++i) out << (i ? "," : "") << r.feature[i];
    out << '\n';
  }
}

inline void save_features(const std::string& path, const FeatureSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write feature file '" + path + "'");
  write_features(out, set);
}

struct LabeledFeature {
  std::string image_id;
  EntityId entity = 0;
  Eigen::VectorXd feature;
};

// Records whose label is in `entities`; fails on unknown labels unless
// `skip_unknown` is set. Unlabeled ("?") records are always skipped.
inline std::vector<LabeledFeature> label_features(const FeatureSet& set,
                                                  const Vocabulary& entities,
                                                  bool skip_unknown = false) {
  std::vector<LabeledFeature> out;
  for (const auto& r : set.records) {
    if (r.label == "?") continue;
    auto id = entities.find(r.label);
    if (!id) {
      if (skip_unknown) continue;
      throw DataError("feature record '" + r.image_id + "': label '" + r.label +
                      "' has no target embedding");
    }
    out.push_back({r.image_id, *id, r.feature});
  }
  return out;
}

// Arithmetic mean, re-normalized to unit length.
inline Eigen::VectorXd class_mean(std::span<const Eigen::VectorXd> vectors) {
  require(!vectors.empty(), "class_mean: no vectors");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(vectors.front().size());
  for (const auto& v : vectors) {
    require(v.size() == mean.size(), "class_mean: dimension mismatch");
    mean += v;
  }
  mean /= static_cast<double>(vectors.size());
  const double n = mean.norm();
  if (!(n > 0.0)) throw std::domain_error("class_mean: mean vector is zero");
  return mean / n;
}

// Feed-forward map F -> hidden... -> d with ELU activations on hidden layers
// and L2 normalization of the output.
class ImageEmbedder {
 public:
  ImageEmbedder() = default;

  ImageEmbedder(std::vector<int> dims, double dropout, std::uint64_t seed)
      : dims_(std::move(dims)), dropout_(dropout) {
    require(dims_.size() >= 2, "ImageEmbedder: need at least input and output widths");
    for (int w : dims_) require(w >= 1, "ImageEmbedder: layer widths must be >= 1");
    require(dropout_ >= 0.0 && dropout_ < 1.0, "ImageEmbedder: dropout must lie in [0, 1)");
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      const int in = dims_[l], out = dims_[l + 1];
      const double bound = std::sqrt(6.0 / (in + out));
      Eigen::MatrixXd w(out, in);
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = uniform(-bound, bound, rng);
      weights_.push_back(std::move(w));
      biases_.push_back(Eigen::VectorXd::Zero(out));
    }
  }

  ImageEmbedder(std::vector<Eigen::MatrixXd> weights, std::vector<Eigen::VectorXd> biases,
                double dropout = 0.0)
      : dropout_(dropout), weights_(std::move(weights)), biases_(std::move(biases)) {
    require(!weights_.empty() && weights_.size() == biases_.size(),
            "ImageEmbedder: weights and biases must be non-empty and aligned");
    dims_.push_back(static_cast<int>(weights_.front().cols()));
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      require(weights_[l].cols() == dims_.back(), "ImageEmbedder: layer shapes do not chain");
      require(biases_[l].size() == weights_[l].rows(), "ImageEmbedder: bias shape mismatch");
      dims_.push_back(static_cast<int>(weights_[l].rows()));
    }
  }

  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  const std::vector<int>& dims() const { return dims_; }
  double dropout() const { return dropout_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }
  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }

  // Layer inputs and pre-activations of one forward pass.
  struct Trace {
    std::vector<Eigen::VectorXd> inputs;
    std::vector<Eigen::VectorXd> pre;
    std::vector<Eigen::VectorXd> masks;  // dropout scale per hidden layer
    Eigen::VectorXd raw_output;
    Eigen::VectorXd output;
  };

  // rng == nullptr: inference (no dropout).
  Trace forward(const Eigen::VectorXd& x, Rng* rng) const {
    if (x.size() != input_dim())
      throw std::invalid_argument("embed: feature has dimension " + std::to_string(x.size()) +
                                  ", embedder expects " + std::to_string(input_dim()));
    Trace trace;
    Eigen::VectorXd a = x;
    const auto layers = weights_.size();
    for (std::size_t l = 0; l < layers; ++l) {
      trace.inputs.push_back(a);
      Eigen::VectorXd z = weights_[l] * a + biases_[l];
      trace.pre.push_back(z);
      if (l + 1 == layers) {
        a = z;
        break;
      }
      a = z.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
      Eigen::VectorXd mask = Eigen::VectorXd::Ones(a.size());
      if (rng && dropout_ > 0.0) {
        std::bernoulli_distribution keep(1.0 - dropout_);
        for (Eigen::Index i = 0; i < mask.size(); ++i)
          mask[i] = keep(*rng) ? 1.0 / (1.0 - dropout_) : 0.0;
        a = a.cwiseProduct(mask);
      }
      trace.masks.push_back(std::move(mask));
    }
    trace.raw_output = a;
    const double n = a.norm();
    if (!(n > 0.0)) throw std::domain_error("embed: output is zero before normalization");
    trace.output = a / n;
    return trace;
  }

  Eigen::VectorXd embed(const Eigen::VectorXd& feature) const {
    return forward(feature, nullptr).output;
  }

  // Training-mode forward pass (dropout active).
  Eigen::VectorXd embed_training(const Eigen::VectorXd& feature, Rng& rng) const {
    return forward(feature, &rng).output;
  }

 private:
  std::vector<int> dims_;
  double dropout_ = 0.0;
  std::vector<Eigen::MatrixXd> weights_;  // out x in
  std::vector<Eigen::VectorXd> biases_;
};

inline Eigen::VectorXd embed(const ImageEmbedder& embedder, const Eigen::VectorXd& feature) {
  return embedder.embed(feature);
}

struct EmbedderConfig {
  std::vector<int> hidden{256};
  double dropout = 0.3;
  int epochs = 50;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double rmsprop_decay = 0.9;
  std::uint64_t seed = 0;
};

struct EmbedderTrainResult {
  ImageEmbedder embedder;
  // Full-data loss in inference mode: [0] before training, then after each epoch.
  std::vector<double> epoch_loss;
  double final_loss() const { return epoch_loss.back(); }
};

// (1/|D|) sum ||h(x) - g*(e)||^2, inference mode.
template <class Targets>
double embedding_loss(const ImageEmbedder& embedder, std::span<const LabeledFeature> data,
                      const Targets& targets) {
  double total = 0.0;
  for (const auto& item : data) {
    total += (embedder.embed(item.feature) - targets.row(item.entity).transpose()).squaredNorm();
  }
  return total / static_cast<double>(data.size());
}

// Mini-batch RMSProp on the least-squares objective; `targets` row e is g*(e).
template <class Targets>
EmbedderTrainResult train_embedder(std::span<const LabeledFeature> data, const Targets& targets,
                                   const EmbedderConfig& config) {
  require(!data.empty(), "train_embedder: no training data");
  require(config.epochs >= 0 && config.batch_size >= 1, "train_embedder: bad epoch/batch setting");
  require(config.learning_rate >= 0.0, "train_embedder: learning_rate must be >= 0");
  const auto feature_dim = static_cast<int>(data.front().feature.size());
  const auto out_dim = static_cast<int>(targets.cols());
  for (const auto& item : data) {
    if (item.feature.size() != feature_dim)
      throw DataError("train_embedder: inconsistent feature dimension for '" + item.image_id + "'");
    if (item.entity >= targets.rows())
      throw DataError("train_embedder: label of '" + item.image_id + "' has no target row");
  }

  std::vector<int> dims{feature_dim};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(out_dim);
  EmbedderTrainResult result{ImageEmbedder(dims, config.dropout, config.seed), {}};
  auto& net = result.embedder;
  const auto layers = net.weights().size();

  std::vector<Eigen::MatrixXd> cache_w, grad_w;
  std::vector<Eigen::VectorXd> cache_b, grad_b;
  for (std::size_t l = 0; l < layers; ++l) {
    cache_w.push_back(Eigen::MatrixXd::Zero(net.weights()[l].rows(), net.weights()[l].cols()));
    cache_b.push_back(Eigen::VectorXd::Zero(net.biases()[l].size()));
  }
  grad_w = cache_w;
  grad_b = cache_b;

  Rng rng(derive_seed(config.seed, 2));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const double decay = config.rmsprop_decay;
  constexpr double eps = 1e-8;

  result.epoch_loss.push_back(embedding_loss(net, data, targets));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const auto stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (std::size_t l = 0; l < layers; ++l) {
        grad_w[l].setZero();
        grad_b[l].setZero();
      }
      for (auto i = start; i < stop; ++i) {
        const auto& item = data[order[i]];
        const auto trace = net.forward(item.feature, &rng);
        const Eigen::VectorXd& y = trace.output;
        const double norm = trace.raw_output.norm();
        const Eigen::VectorXd dy = 2.0 * (y - targets.row(item.entity).transpose());
        // Through y = a / ||a||.
        Eigen::VectorXd delta = (dy - y * y.dot(dy)) / norm;
        for (std::size_t l = layers; l-- > 0;) {
          if (l + 1 < layers) {
            // Hidden layer: dropout mask, then ELU derivative.
            const auto& z = trace.pre[l];
            delta = delta.cwiseProduct(trace.masks[l]);
            for (Eigen::Index j = 0; j < delta.size(); ++j)
              delta[j] *= z[j] > 0.0 ? 1.0 : std::exp(z[j]);
          }
          grad_w[l] += inv * delta * trace.inputs[l].transpose();
          grad_b[l] += inv * delta;
          if (l > 0) delta = net.weights()[l].transpose() * delta;
        }
      }
      if (config.learning_rate == 0.0) continue;
      for (std::size_t l = 0; l < layers; ++l) {
        cache_w[l] = decay * cache_w[l] + (1.0 - decay) * grad_w[l].cwiseProduct(grad_w[l]);
        cache_b[l] = decay * cache_b[l] + (1.0 - decay) * grad_b[l].cwiseProduct(grad_b[l]);
        net.weights()[l].array() -=
            config.learning_rate * grad_w[l].array() / (cache_w[l].array().sqrt() + eps);
        net.biases()[l].array() -=
            config.learning_rate * grad_b[l].array() / (cache_b[l].array().sqrt() + eps);
      }
    }
    result.epoch_loss.push_back(embedding_loss(net, data, targets));
  }
  return result;
}

inline nlohmann::json embedder_to_json(const ImageEmbedder& net) {
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    weights.push_back(detail::matrix_to_json(net.weights()[l]));
    biases.push_back(detail::vector_to_json(net.biases()[l]));
  }
  return {{"format", kEmbedderFormat},
          {"dims", net.dims()},
          {"activation", "elu"},
          {"dropout", net.dropout()},
          {"weights", std::move(weights)},
          {"biases", std::move(biases)}};
}

inline ImageEmbedder embedder_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != kEmbedderFormat)
    throw DataError(std::string("schema version mismatch: expected ") + kEmbedderFormat);
  try {
    const auto dims = j.at("dims").get<std::vector<int>>();
    if (dims.size() < 2) throw DataError("embedder: need at least two layer widths");
    const auto& jw = j.at("weights");
    const auto& jb = j.at("biases");
    if (jw.size() + 1 != dims.size() || jb.size() + 1 != dims.size())
      throw DataError("embedder: layer count does not match dims");
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      weights.push_back(detail::matrix_from_json<Eigen::MatrixXd>(jw[l], dims[l + 1], dims[l],
                                                                  "weights"));
      biases.push_back(detail::vector_from_json(jb[l], dims[l + 1], "biases"));
    }
    return ImageEmbedder(std::move(weights), std::move(biases), j.value("dropout", 0.0));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("embedder: malformed checkpoint: ") + e.what());
  }
}

inline void save_embedder(const std::string& path, const ImageEmbedder& net) {
  write_json_file(path, embedder_to_json(net));
}

inline ImageEmbedder load_embedder(const std::string& path) {
  return embedder_from_json(read_json_file(path, kEmbedderFormat));
}

}  // namespace kgrec
