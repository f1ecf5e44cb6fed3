// kgrec: command-line pipeline for knowledge-graph embeddings, image
// embeddings and open-world link prediction.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kgrec/kgrec.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace kgrec::cli {
namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

// Stage offsets for sub-seeds derived from --seed.
enum Stage : std::uint64_t {
  kStageToy = 10,
  kStageSplit = 11,
  kStageKg = 12,
  kStageImage = 13,
  kStageContext = 14,
  kStageFeatures = 15,
  kStageFoldIn = 16,
  kStageProjection = 17,
};

json typed_value(const CLI::Option& opt, const std::string& text) {
  const std::string type = opt.get_type_name();
  if (type.rfind("INT", 0) == 0 || type.rfind("UINT", 0) == 0 || type.rfind("FLOAT", 0) == 0) {
    json parsed = json::parse(text, nullptr, false);
    if (parsed.is_number()) return parsed;
  }
  return text;
}

// Resolved value of every option of a subcommand, defaults included.
json resolved_options(const CLI::App& app) {
  json out = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_name() == "--help") continue;
    std::string name = opt->get_name();
    while (!name.empty() && name.front() == '-') name.erase(name.begin());
    if (opt->get_expected_max() == 0) {
      out[name] = opt->count() > 0;
    } else if (opt->get_expected_max() > 1) {
      std::vector<std::string> items;
      if (opt->count() > 0) {
        items = opt->results();
      } else {
        std::string text = opt->get_default_str();
        if (text.size() >= 2 && (text.front() == '[' || text.front() == '{')) text = text.substr(1, text.size() - 2);
        std::stringstream ss(text);
        std::string part;
        while (std::getline(ss, part, ','))
          if (!part.empty()) items.push_back(part);
      }
      json arr = json::array();
      for (const auto& item : items) arr.push_back(typed_value(*opt, item));
      out[name] = arr;
    } else {
      const std::string text = opt->count() > 0 ? opt->results().back() : opt->get_default_str();
      out[name] = typed_value(*opt, text);
    }
  }
  return out;
}

void write_manifest(const std::string& path, const CLI::App& sub, std::uint64_t seed) {
  write_json_file(path + ".manifest.json", {{"format", "kgrec-run-v1"},
                                            {"subcommand", sub.get_name()},
                                            {"seed", seed},
                                            {"options", resolved_options(sub)}});
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
}

std::vector<std::string> read_label_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open label list '" + path + "'");
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    labels.push_back(line);
  }
  return labels;
}

std::vector<std::string> split_commas(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ','))
      if (!part.empty()) out.push_back(part);
  }
  return out;
}

// Semantic vectors for feature records: through the embedder if given, else
// the features themselves (which must then have the model dimension).
std::vector<Eigen::VectorXd> semantic_vectors(const FeatureSet& features,
                                              const std::optional<ImageEmbedder>& embedder,
                                              const KgModel& model) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(features.records.size());
  if (!embedder && features.dim != model.dim())
    throw DataError("feature dimension " + std::to_string(features.dim) +
                    " differs from model dimension " + std::to_string(model.dim()) +
                    "; pass --embedder");
  if (embedder && embedder->output_dim() != model.dim())
    throw DataError("embedder output dimension does not match the model");
  for (const auto& r : features.records)
    out.push_back(embedder ? embedder->embed(r.feature) : r.feature);
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"kgrec: knowledge-graph and image embeddings for open-world link prediction"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  std::uint64_t seed = 0;

  // gen-toy
  auto* gen = app.add_subcommand("gen-toy", "Generate a balanced toy taxonomy with part-of links");
  int branching = 3, depth = 4, meronyms = 40;
  std::string gen_out;
  gen->add_option("--branching", branching, "Children per node")->check(CLI::PositiveNumber);
  gen->add_option("--depth", depth, "Levels below the root")->check(CLI::PositiveNumber);
  gen->add_option("--meronyms", meronyms, "Random part-meronym pairs")->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", seed, "Run seed");
  gen->add_option("--out", gen_out, "Output triple TSV")->required();

  // expand
  auto* expand = app.add_subcommand("expand", "Expand transitive relations up to a path depth");
  std::string expand_in, expand_out;
  std::vector<std::string> expand_relations = default_transitive_relations();
  int expand_depth = 4;
  expand->add_option("--in", expand_in, "Input triple TSV")->required();
  expand->add_option("--relations", expand_relations, "Transitive relations (comma-separated)")
      ->delimiter(',');
  expand->add_option("--depth", expand_depth, "Maximum path length")->check(CLI::PositiveNumber);
  expand->add_option("--out", expand_out, "Output triple TSV")->required();

  // split
  auto* split = app.add_subcommand("split", "Split triples into train, standard test and hard test");
  std::string split_in, split_dir = ".", holdout_file;
  int holdout_count = 0;
  double test_fraction = 0.02;
  split->add_option("--in", split_in, "Input triple TSV")->required();
  auto* hf = split->add_option("--holdout-file", holdout_file, "Entity labels to hold out, one per line");
  split->add_option("--holdout-count", holdout_count, "Hold out this many random entities")
      ->check(CLI::NonNegativeNumber)
      ->excludes(hf);
  split->add_option("--test-fraction", test_fraction, "Fraction of remaining triples for testing")
      ->check(CLI::Range(0.0, 1.0));
  split->add_option("--seed", seed, "Run seed");
  split->add_option("--out-dir", split_dir, "Output directory");

  // train-kg
  auto* train_kg = app.add_subcommand("train-kg", "Train a TransE, NTL or SNTL graph embedding");
  std::string kg_train_path, kg_out, kg_report, variant_name = "sntl", optimizer_name = "gd";
  ModelConfig kg_config;
  bool kg_no_max_norm = false;
  train_kg->add_option("--train", kg_train_path, "Training triple TSV")->required();
  train_kg->add_option("--variant", variant_name, "transe | ntl | sntl")
      ->check(CLI::IsMember({"transe", "ntl", "sntl"}));
  train_kg->add_option("--dim", kg_config.dim, "Embedding dimension d")->check(CLI::PositiveNumber);
  train_kg->add_option("--slices", kg_config.slices, "Tensor slices k")->check(CLI::PositiveNumber);
  train_kg->add_option("--gamma", kg_config.margin, "Margin");
  train_kg->add_option("--alpha", kg_config.alpha, "Clean-loss weight of the smoothed objective");
  train_kg->add_option("--noise", kg_config.noise, "Perturbation standard deviation s");
  train_kg->add_option("--epochs", kg_config.epochs, "Epochs")->check(CLI::NonNegativeNumber);
  train_kg->add_option("--batch-size", kg_config.batch_size, "Triples per batch")
      ->check(CLI::PositiveNumber);
  train_kg->add_option("--lr", kg_config.learning_rate, "Learning rate");
  train_kg->add_option("--optimizer", optimizer_name, "gd | rmsprop")
      ->check(CLI::IsMember({"gd", "rmsprop"}));
  train_kg->add_flag("--sum-slices", kg_config.sum_slices, "Freeze u at all-ones (plain slice sum)");
  train_kg->add_flag("--no-max-norm", kg_no_max_norm, "Do not project entities into the unit ball");
  train_kg->add_option("--seed", seed, "Run seed");
  train_kg->add_option("--out", kg_out, "Model checkpoint JSON")->required();
  train_kg->add_option("--report", kg_report, "Per-epoch loss CSV");

  // gen-features
  auto* gen_features = app.add_subcommand(
      "gen-features", "Simulate image feature vectors around entity embeddings");
  std::string gf_model, gf_labels, gf_links, gf_out;
  int gf_per_entity = 10, gf_feature_dim = 0;
  std::uint64_t gf_projection_seed = 0;
  double gf_noise = 0.1;
  bool gf_unlabeled = false;
  gen_features->add_option("--model", gf_model, "Model checkpoint JSON")->required();
  gen_features->add_option("--labels", gf_labels, "Entity labels to simulate, one per line (default: all)");
  gen_features->add_option("--links", gf_links,
                           "Triples placing entities unknown to the model (folded in first)");
  gen_features->add_option("--per-entity", gf_per_entity, "Images per entity")
      ->check(CLI::PositiveNumber);
  gen_features->add_option("--noise", gf_noise, "Per-dimension noise standard deviation");
  gen_features->add_option("--feature-dim", gf_feature_dim,
                           "Feature width F (0: same as the model, identity map)")
      ->check(CLI::NonNegativeNumber);
  gen_features->add_option("--projection-seed", gf_projection_seed,
                           "Seed of the feature projection (share it across feature files)");
  gen_features->add_flag("--unlabeled", gf_unlabeled, "Write '?' instead of the entity label");
  gen_features->add_option("--seed", seed, "Run seed");
  gen_features->add_option("--out", gf_out, "Output feature file")->required();

  // train-img
  auto* train_img = app.add_subcommand("train-img", "Train the image embedding on a feature file");
  std::string img_model, img_features, img_out, img_report;
  EmbedderConfig img_config;
  img_config.hidden = {256};
  train_img->add_option("--model", img_model, "Model checkpoint JSON (targets)")->required();
  train_img->add_option("--features", img_features, "Training feature file")->required();
  train_img->add_option("--hidden", img_config.hidden, "Hidden layer widths (comma-separated)")
      ->delimiter(',');
  train_img->add_option("--dropout", img_config.dropout, "Dropout rate during training")
      ->check(CLI::Range(0.0, 0.99));
  train_img->add_option("--epochs", img_config.epochs, "Epochs")->check(CLI::NonNegativeNumber);
  train_img->add_option("--batch-size", img_config.batch_size, "Mini-batch size")
      ->check(CLI::PositiveNumber);
  train_img->add_option("--lr", img_config.learning_rate, "RMSProp learning rate");
  train_img->add_option("--seed", seed, "Run seed");
  train_img->add_option("--out", img_out, "Embedder checkpoint JSON")->required();
  train_img->add_option("--report", img_report, "Per-epoch loss CSV");

  // fit-context
  auto* fit_ctx = app.add_subcommand("fit-context", "Fit attention counts and score Gaussians");
  std::string ctx_model, ctx_train, ctx_out;
  std::size_t ctx_false = 10000;
  ContextOptions ctx_options;
  fit_ctx->add_option("--model", ctx_model, "Model checkpoint JSON")->required();
  fit_ctx->add_option("--train", ctx_train, "Training triple TSV")->required();
  fit_ctx->add_option("--false-sample", ctx_false, "Corrupted triples for the false fit")
      ->check(CLI::Range(std::size_t{2}, std::numeric_limits<std::size_t>::max()));
  fit_ctx->add_flag("--per-relation", ctx_options.per_relation, "Fit Gaussians per relation");
  fit_ctx->add_option("--laplace", ctx_options.laplace, "Attention smoothing pseudo-count")
      ->check(CLI::NonNegativeNumber);
  fit_ctx->add_option("--seed", seed, "Run seed");
  fit_ctx->add_option("--out", ctx_out, "Context stats JSON")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Rank links and report mean rank, t@n and f@n");
  std::string ev_model, ev_queries, ev_embedder, ev_context, ev_test, ev_report, ev_summary;
  std::vector<std::string> ev_truth, ev_filter;
  std::string ev_candidates = "all";
  int ev_n = 3;
  bool ev_per_class = false;
  eval->add_option("--model", ev_model, "Model checkpoint JSON")->required();
  auto* ev_q = eval->add_option("--queries", ev_queries, "Feature file of query images");
  eval->add_option("--test", ev_test, "Triple TSV for entity link prediction")->excludes(ev_q);
  eval->add_option("--embedder", ev_embedder, "Embedder checkpoint (omit if features are semantic vectors)");
  eval->add_option("--context", ev_context, "Context stats JSON");
  eval->add_option("--truth", ev_truth, "Triple TSVs defining true links of query labels")
      ->delimiter(',');
  eval->add_option("--filter", ev_filter, "Known triples removed from --test candidates")
      ->delimiter(',');
  eval->add_option("--candidates", ev_candidates, "all | observed (relation-tail pairs seen in --truth)")
      ->check(CLI::IsMember({"all", "observed"}));
  eval->add_option("--n", ev_n, "Cut-off n")->check(CLI::PositiveNumber);
  eval->add_flag("--per-class", ev_per_class, "Rank class-mean vectors instead of single images");
  eval->add_option("--report", ev_report, "Ranking CSV");
  eval->add_option("--summary", ev_summary, "Summary JSON")->required();

  // predict
  auto* predict = app.add_subcommand("predict", "Rank links for image feature vectors");
  std::string pr_model, pr_features, pr_embedder, pr_context, pr_out;
  std::size_t pr_top = 10;
  bool pr_per_class = false;
  predict->add_option("--model", pr_model, "Model checkpoint JSON")->required();
  predict->add_option("--features", pr_features, "Feature file (labels may be '?')")->required();
  predict->add_option("--embedder", pr_embedder, "Embedder checkpoint");
  predict->add_option("--context", pr_context, "Context stats JSON");
  predict->add_flag("--per-class", pr_per_class, "Collapse labeled images by class mean first");
  predict->add_option("--top", pr_top, "Links kept per query (0: all)");
  predict->add_option("--out", pr_out, "Prediction CSV")->required();

  // project
  auto* project = app.add_subcommand("project", "PCA projection of entity and image vectors");
  std::string pj_model, pj_features, pj_embedder, pj_out;
  int pj_components = 2;
  bool pj_no_entities = false;
  project->add_option("--model", pj_model, "Model checkpoint JSON")->required();
  project->add_option("--features", pj_features, "Feature file of images to include");
  project->add_option("--embedder", pj_embedder, "Embedder checkpoint");
  project->add_option("--components", pj_components, "Principal components")
      ->check(CLI::PositiveNumber);
  project->add_flag("--no-entities", pj_no_entities, "Project only the images");
  project->add_option("--out", pj_out, "Projection CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  if (*gen) {
    const auto store = gen_toy_graph(branching, depth, meronyms, derive_seed(seed, kStageToy));
    save_triples(gen_out, store);
    write_manifest(gen_out, *gen, seed);
    std::cout << "wrote " << store.size() << " triples over " << store.entities().size()
              << " entities to " << gen_out << '\n';
  } else if (*expand) {
    const auto store = load_triples(expand_in);
    const auto expanded =
        transitive_expand(store, split_commas(expand_relations), expand_depth);
    save_triples(expand_out, expanded);
    write_manifest(expand_out, *expand, seed);
    std::cout << "expanded " << store.size() << " -> " << expanded.size() << " triples\n";
  } else if (*split) {
    const auto store = load_triples(split_in);
    std::vector<EntityId> holdout;
    if (!holdout_file.empty()) {
      for (const auto& label : read_label_list(holdout_file)) {
        auto id = store.entities().find(label);
        if (!id) throw DataError("holdout entity '" + label + "' is not in " + split_in);
        holdout.push_back(*id);
      }
    } else if (holdout_count > 0) {
      if (static_cast<std::size_t>(holdout_count) >= store.entities().size())
        throw std::invalid_argument("--holdout-count must be smaller than the entity count");
      std::vector<EntityId> ids(store.entities().size());
      std::iota(ids.begin(), ids.end(), EntityId{0});
      Rng rng(derive_seed(seed, kStageSplit) + 1);
      std::shuffle(ids.begin(), ids.end(), rng);
      holdout.assign(ids.begin(), ids.begin() + holdout_count);
      std::sort(holdout.begin(), holdout.end());
    }
    const auto splits = make_splits(store, holdout, test_fraction, derive_seed(seed, kStageSplit));
    fs::create_directories(split_dir);
    const fs::path dir(split_dir);
    save_triples((dir / "train.tsv").string(), splits.train);
    save_triples((dir / "standard_test.tsv").string(), splits.standard_test);
    save_triples((dir / "hard_test.tsv").string(), splits.hard_test);
    write_json_file((dir / "splits.json").string(), split_manifest(splits, seed, test_fraction));
    if (!holdout.empty()) {
      std::ostringstream labels;
      for (const auto& l : splits.holdout) labels << l << '\n';
      write_text((dir / "holdout.txt").string(), labels.str());
    }
    write_manifest((dir / "split").string(), *split, seed);
    std::cout << "train " << splits.train.size() << ", standard test "
              << splits.standard_test.size() << ", hard test " << splits.hard_test.size() << '\n';
  } else if (*train_kg) {
    const auto store = load_triples(kg_train_path);
    kg_config.variant = parse_variant(variant_name);
    kg_config.optimizer = parse_optimizer(optimizer_name);
    kg_config.max_norm_entities = !kg_no_max_norm;
    kg_config.seed = derive_seed(seed, kStageKg);
    auto model = init_model(kg_config, store.entities(), store.relations());
    auto result = train(std::move(model), store, kg_config);
    result.model.config.seed = seed;
    save_model(kg_out, result.model);
    if (!kg_report.empty()) write_text(kg_report, result.report.to_csv());
    write_manifest(kg_out, *train_kg, seed);
    if (!result.report.epoch_loss.empty())
      std::cout << "final epoch mean loss " << result.report.epoch_loss.back() << '\n';
  } else if (*gen_features) {
    auto model = load_model(gf_model);
    if (!gf_links.empty()) {
      FoldInConfig fold;
      fold.seed = derive_seed(seed, kStageFoldIn);
      model = fold_in(model, load_triples(gf_links), fold);
    }
    std::vector<std::string> labels =
        gf_labels.empty() ? model.entities.labels() : read_label_list(gf_labels);
    Rng rng(derive_seed(seed, kStageFeatures));
    Eigen::MatrixXd projection;
    const int width = gf_feature_dim == 0 ? model.dim() : gf_feature_dim;
    if (gf_feature_dim != 0) {
      Rng proj_rng(derive_seed(gf_projection_seed, kStageProjection));
      projection.resize(width, model.dim());
      for (Eigen::Index i = 0; i < projection.size(); ++i)
        projection.data()[i] = gaussian_vector(1, 1.0 / std::sqrt(model.dim()), proj_rng)[0];
    }
    FeatureSet set;
    set.dim = width;
    for (const auto& label : labels) {
      const auto id = model.entities.find(label);
      if (!id)
        throw DataError("entity '" + label + "' has no embedding (pass --links to fold it in)");
      for (int i = 0; i < gf_per_entity; ++i) {
        Eigen::VectorXd v = model.entity(*id) + gaussian_vector(model.dim(), gf_noise, rng);
        if (gf_feature_dim != 0) v = projection * v;
        set.records.push_back(
            {label + "#" + std::to_string(i), gf_unlabeled ? std::string(kUnlabeled) : label, v});
      }
    }
    save_features(gf_out, set);
    write_manifest(gf_out, *gen_features, seed);
    std::cout << "wrote " << set.records.size() << " feature records\n";
  } else if (*train_img) {
    const auto model = load_model(img_model);
    const auto features = load_features(img_features);
    const auto data = label_features(features, model.entities);
    img_config.seed = derive_seed(seed, kStageImage);
    const auto result = train_embedder(data, model.params.entities, img_config);
    save_embedder(img_out, result.embedder);
    if (!img_report.empty()) {
      std::ostringstream csv;
      csv.precision(17);
      csv << "epoch,loss\n";
      for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
        csv << e << ',' << result.epoch_loss[e] << '\n';
      write_text(img_report, csv.str());
    }
    write_manifest(img_out, *train_img, seed);
    std::cout << "image embedding loss " << result.epoch_loss.front() << " -> "
              << result.final_loss() << '\n';
  } else if (*fit_ctx) {
    const auto model = load_model(ctx_model);
    const auto store = load_triples(ctx_train);
    // Re-index the store into the model vocabulary.
    TripleStore aligned(model.entities, model.relations);
    for (const auto& t : store.triples()) {
      aligned.insert({model.entities.at(store.head_label(t)),
                      model.relations.at(store.relation_label(t)),
                      model.entities.at(store.tail_label(t))});
    }
    Rng rng(derive_seed(seed, kStageContext));
    const auto stats = fit_context(model, aligned, ctx_false, rng, ctx_options);
    save_context(ctx_out, stats, model);
    write_manifest(ctx_out, *fit_ctx, seed);
    std::cout << "true scores N(" << stats.truth.mean << ", " << stats.truth.stddev
              << "), false scores N(" << stats.falsity.mean << ", " << stats.falsity.stddev
              << ")\n";
  } else if (*eval) {
    const auto model = load_model(ev_model);
    std::optional<ContextStats> context;
    if (!ev_context.empty()) context = load_context(ev_context, model);
    std::vector<TripleStore> truth_stores;
    for (const auto& p : ev_truth) truth_stores.push_back(load_triples(p));
    std::vector<const TripleStore*> truth_ptrs;
    for (const auto& s : truth_stores) truth_ptrs.push_back(&s);

    std::vector<LinkQuery> queries;
    if (!ev_test.empty()) {
      // Entity link prediction: one query per (head, relation) of the test set,
      // tails over E' with known triples filtered out.
      const auto test = load_triples(ev_test);
      std::vector<TripleStore> filters;
      for (const auto& p : ev_filter) filters.push_back(load_triples(p));
      std::map<std::pair<EntityId, RelationId>, std::vector<Link>> groups;
      for (const auto& t : test.triples()) {
        const auto h = model.entities.find(test.head_label(t));
        const auto r = model.relations.find(test.relation_label(t));
        const auto e = model.entities.find(test.tail_label(t));
        if (!h || !r || !e) throw DataError("test triple references an entity unknown to the model");
        groups[{*h, *r}].push_back({*r, *e});
      }
      for (const auto& [key, truth] : groups) {
        const auto& head_label = model.entities.label(key.first);
        const auto& rel_label = model.relations.label(key.second);
        std::vector<Link> candidates;
        for (EntityId e = 0; e < model.entities.size(); ++e) {
          const Link link{key.second, e};
          const bool is_test = std::find(truth.begin(), truth.end(), link) != truth.end();
          bool known = false;
          for (const auto& f : filters) {
            const auto fh = f.entities().find(head_label);
            const auto fr = f.relations().find(rel_label);
            const auto fe = f.entities().find(model.entities.label(e));
            known = known || (fh && fr && fe && f.contains(*fh, *fr, *fe));
          }
          if (is_test || !known) candidates.push_back(link);
        }
        queries.push_back(make_query(head_label + "|" + rel_label, head_label,
                                     model.entity(key.first), std::move(candidates), truth));
      }
    } else if (!ev_queries.empty()) {
      const auto features = load_features(ev_queries);
      std::optional<ImageEmbedder> embedder;
      if (!ev_embedder.empty()) embedder = load_embedder(ev_embedder);
      const auto vectors = semantic_vectors(features, embedder, model);
      std::vector<Link> candidates;
      if (ev_candidates == "observed") {
        std::set<Link> seen;
        for (const auto& s : truth_stores)
          for (const auto& l : observed_links(model, s)) seen.insert(l);
        candidates.assign(seen.begin(), seen.end());
      } else {
        candidates = all_links(model);
      }
      for (std::size_t i = 0; i < features.records.size(); ++i) {
        const auto& rec = features.records[i];
        std::vector<Link> truth;
        if (rec.label != kUnlabeled) {
          truth = true_links_for(model, rec.label, truth_ptrs);
          std::erase_if(truth, [&](const Link& l) {
            return !std::binary_search(candidates.begin(), candidates.end(), l);
          });
        }
        queries.push_back(make_query(rec.image_id, rec.label, vectors[i], candidates, truth));
      }
    } else {
      throw std::invalid_argument("eval: pass --queries or --test");
    }
    const auto report = evaluate_dataset(model, queries, context ? &*context : nullptr, ev_n,
                                         ev_per_class ? EvalMode::per_class : EvalMode::per_image);
    write_json_file(ev_summary, report.summary());
    if (!ev_report.empty()) write_text(ev_report, ranking_csv(report, model));
    write_manifest(ev_summary, *eval, seed);
    std::cout << report.summary().dump() << '\n';
  } else if (*predict) {
    const auto model = load_model(pr_model);
    std::optional<ContextStats> context;
    if (!pr_context.empty()) context = load_context(pr_context, model);
    const auto features = load_features(pr_features);
    std::optional<ImageEmbedder> embedder;
    if (!pr_embedder.empty()) embedder = load_embedder(pr_embedder);
    const auto vectors = semantic_vectors(features, embedder, model);
    const auto candidates = all_links(model);
    std::vector<LinkQuery> queries;
    for (std::size_t i = 0; i < features.records.size(); ++i) {
      const auto& rec = features.records[i];
      queries.push_back(make_query(rec.image_id, rec.label, vectors[i], candidates, {}));
    }
    if (pr_per_class) queries = collapse_by_class(queries);
    RankingReport report;
    report.rankings.resize(queries.size());
    parallel_for(queries.size(), [&](std::size_t i) {
      report.rankings[i] = rank_links(model, queries[i], context ? &*context : nullptr);
    });
    write_text(pr_out, ranking_csv(report, model, pr_top));
    write_manifest(pr_out, *predict, seed);
    std::cout << "ranked links for " << queries.size() << " queries\n";
  } else if (*project) {
    const auto model = load_model(pj_model);
    std::vector<std::string> ids;
    std::vector<Eigen::VectorXd> vectors;
    if (!pj_no_entities) {
      for (EntityId e = 0; e < model.entities.size(); ++e) {
        ids.push_back(model.entities.label(e));
        vectors.push_back(model.entity(e));
      }
    }
    if (!pj_features.empty()) {
      const auto features = load_features(pj_features);
      std::optional<ImageEmbedder> embedder;
      if (!pj_embedder.empty()) embedder = load_embedder(pj_embedder);
      const auto image_vectors = semantic_vectors(features, embedder, model);
      for (std::size_t i = 0; i < features.records.size(); ++i) {
        ids.push_back(features.records[i].image_id);
        vectors.push_back(image_vectors[i]);
      }
    }
    const auto proj = pca_project(vectors, pj_components);
    std::ostringstream csv;
    csv.precision(17);
    csv << "# explained_variance:";
    for (Eigen::Index c = 0; c < proj.explained.size(); ++c) csv << ' ' << proj.explained[c];
    csv << "\nid";
    for (int c = 0; c < pj_components; ++c) csv << ",pc" << c + 1;
    csv << '\n';
    for (std::size_t i = 0; i < ids.size(); ++i) {
      csv << ids[i];
      for (int c = 0; c < pj_components; ++c)
        csv << ',' << proj.coordinates(static_cast<Eigen::Index>(i), c);
      csv << '\n';
    }
    write_text(pj_out, csv.str());
    write_manifest(pj_out, *project, seed);
  }
  return 0;
}

}  // namespace
}  // namespace kgrec::cli

int main(int argc, char** argv) {
  try {
    return kgrec::cli::run(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kgrec::cli::kUsageError;
  } catch (const kgrec::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kgrec::cli::kDataError;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kgrec::cli::kDataError;
  }
}
