#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <png.h>

#include "scnn/checkpoint.hpp"
#include "scnn/config.hpp"
#include "scnn/manifest.hpp"
#include "scnn/metrics.hpp"
#include "scnn/synthetic.hpp"

namespace scnn {

inline constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;

namespace detail {

inline const std::string& require_path(const std::string& path, const char* what, const char* flag) {
  if (path.empty()) fail(ErrorCategory::config, "cli", "no ", what, " given (", flag, ")");
  return path;
}

inline const std::string& require_input(const std::string& path, const char* what, const char* flag) {
  require_path(path, what, flag);
  if (!fs::is_regular_file(path)) fail(ErrorCategory::io, "cli", what, " not found: ", path);
  return path;
}

inline const std::string& prepare_output(const std::string& path, const char* what, const char* flag) {
  require_path(path, what, flag);
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  return path;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) fail(ErrorCategory::io, "cli", "cannot open '", path, "' for writing");
  out << text;
  if (!out) fail(ErrorCategory::io, "cli", "failed writing '", path, "'");
}

}  // namespace detail

/// Timer plus config for one subcommand invocation; writes `<artifact>.meta.json` sidecars.
class RunRecorder {
 public:
  RunRecorder(std::string command, const RunConfig& cfg)
      : command_(std::move(command)), cfg_(cfg), start_(std::chrono::steady_clock::now()) {}

  nlohmann::ordered_json metadata(const std::string& artifact, const nlohmann::ordered_json& extra = {}) const {
    nlohmann::ordered_json j;
    j["command"] = command_;
    j["artifact"] = artifact;
    j["seed"] = cfg_.seed;
    j["config_hash"] = config_hash(cfg_);
    j["versions"] = {{"scnn", kVersion},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                     {"cli11", CLI11_VERSION},
                     {"libpng", PNG_LIBPNG_VER_STRING},
                     {"compiler", __VERSION__}};
    j["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    if (!extra.is_null()) j["details"] = extra;
    return j;
  }

  void write(const std::string& artifact, const nlohmann::ordered_json& extra = {}) const {
    detail::write_text(artifact + ".meta.json", metadata(artifact, extra).dump(2) + "\n");
  }

 private:
  std::string command_;
  RunConfig cfg_;
  std::chrono::steady_clock::time_point start_;
};

// ---- subcommands. Each takes a fully resolved config and writes only its declared outputs.

/// <out>/manifest.csv with every image, plus train.csv / test.csv from a stratified split.
inline void run_synth(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  RunRecorder rec("synth", cfg);
  detail::require_path(out_dir, "output directory", "--out");
  const Dataset ds = generate_synthetic(static_cast<int>(cfg.synth.classes), cfg.synth.per_class, cfg.synth.size,
                                        derive_seed(cfg.seed, {0x5e7}));
  const std::vector<ManifestRecord> records = write_dataset(ds, out_dir, "manifest.csv");
  Rng split_rng(derive_seed(cfg.seed, {0x5b1}));
  const auto [train, test] = stratified_split(ds, cfg.split_train_fraction, split_rng);
  std::map<std::string, const ManifestRecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;
  auto subset = [&](const Dataset& part) {
    std::vector<ManifestRecord> out;
    for (const auto& item : part) out.push_back(*by_id.at(item.id));
    return out;
  };
  const fs::path dir(out_dir);
  write_manifest((dir / "train.csv").string(), subset(train));
  write_manifest((dir / "test.csv").string(), subset(test));
  for (const char* name : {"manifest.csv", "train.csv", "test.csv"}) rec.write((dir / name).string());
  log << "synth: " << ds.size() << " images (" << train.size() << " train / " << test.size() << " test) -> " << out_dir
      << "\n";
}

/// Preprocesses every image of a manifest into a new directory; the manifest keeps its file name.
inline void run_preprocess(const RunConfig& cfg, const std::string& manifest, const std::string& out_dir,
                           std::ostream& log) {
  RunRecorder rec("preprocess", cfg);
  detail::require_input(manifest, "manifest", "--manifest");
  detail::require_path(out_dir, "output directory", "--out");
  const Manifest m = parse_manifest(manifest);
  const fs::path src = fs::weakly_canonical(m.base_dir.empty() ? fs::path(".") : m.base_dir);
  if (fs::exists(out_dir) && fs::equivalent(src, fs::weakly_canonical(out_dir))) {
    detail::fail(ErrorCategory::config, "cli", "preprocess output directory must differ from the input directory");
  }
  Dataset ds = load_dataset(m);
  for (auto& item : ds) item.image = preprocess_image(item.image, cfg.preprocess, item.id);
  const std::string name = fs::path(manifest).filename().string();
  write_dataset(ds, out_dir, name);
  rec.write((fs::path(out_dir) / name).string());
  log << "preprocess: " << ds.size() << " images -> " << out_dir << "\n";
}

inline void run_train(const RunConfig& cfg, std::ostream& log) {
  RunRecorder rec("train", cfg);
  const std::string& manifest = detail::require_input(cfg.paths.train_manifest, "training manifest", "--manifest");
  const std::string& ckpt = detail::prepare_output(cfg.paths.checkpoint, "checkpoint path", "--out");
  const std::string history_path = cfg.paths.history.empty() ? ckpt + ".history.csv" : cfg.paths.history;
  detail::prepare_output(history_path, "history path", "--history");

  Dataset ds = load_dataset(parse_manifest(manifest));
  const NetworkSpec spec = cfg.network_spec();
  for (const auto& item : ds) {
    if (item.image.height != cfg.network.input_size || item.image.width != cfg.network.input_size) {
      detail::fail(ErrorCategory::shape, "cli", "image '", item.id, "' is ", item.image.height, "x", item.image.width,
                   " but network.input_size is ", cfg.network.input_size, " (run preprocess first)");
    }
  }
  if (cfg.balance) {
    Rng rng(derive_seed(cfg.seed, {0xba1}));
    ds = balance_classes(ds, cfg.augment, rng);
  }
  auto [net, history] = train(ds, spec, cfg.train_config(), [&](const EpochStats& e) {
    log << "epoch " << e.epoch + 1 << "/" << cfg.train.epochs << " loss " << e.mean_loss << " same " << e.mean_same_dist
        << " diff " << e.mean_diff_dist << "\n";
  });
  save_checkpoint(net, ckpt);
  history.write_csv(history_path);
  nlohmann::ordered_json extra;
  extra["training_images"] = ds.size();
  extra["epochs"] = history.epochs.size();
  if (!history.epochs.empty()) extra["final_mean_loss"] = history.epochs.back().mean_loss;
  rec.write(ckpt, extra);
  rec.write(history_path);
}

inline void run_embed(const RunConfig& cfg, std::ostream& log) {
  RunRecorder rec("embed", cfg);
  const std::string& ckpt = detail::require_input(cfg.paths.checkpoint, "checkpoint", "--ckpt");
  const std::string& manifest = detail::require_input(cfg.paths.manifest, "manifest", "--manifest");
  const std::string& out = detail::prepare_output(cfg.paths.embeddings, "embedding path", "--out");
  const Network net = load_checkpoint(ckpt);
  const Dataset ds = load_dataset(parse_manifest(manifest));
  const std::vector<EmbeddingEntry> entries = embed_dataset(net, ds);
  save_embeddings(entries, out);
  rec.write(out, {{"count", entries.size()}, {"dim", net.spec().embedding_dim}});
  log << "embed: " << entries.size() << " embeddings -> " << out << "\n";
}

/// Loads and validates an embedding file and prints a summary of the index.
inline void run_index(const RunConfig& cfg, std::ostream& out) {
  const std::string& emb = detail::require_input(cfg.paths.embeddings, "embedding file", "--emb");
  const EmbeddingIndex index = EmbeddingIndex::build(load_embeddings(emb));
  std::map<int, std::size_t> counts;
  for (const auto& e : index.entries()) ++counts[e.label];
  nlohmann::ordered_json j;
  j["entries"] = index.size();
  j["dim"] = index.dim();
  nlohmann::ordered_json pc = nlohmann::ordered_json::object();
  for (auto [label, n] : counts) pc[std::to_string(label)] = n;
  j["per_class"] = pc;
  out << j.dump(2) << "\n";
}

struct QueryRequest {
  std::optional<std::string> image;
  std::optional<std::string> id;
  std::size_t k = 5;
  bool preprocess = false;
};

/// Prints `rank id label distance`, one neighbor per line.
inline RetrievalResult run_query(const RunConfig& cfg, const QueryRequest& q, std::ostream& out) {
  const std::string& emb = detail::require_input(cfg.paths.embeddings, "embedding file", "--emb");
  if (q.image.has_value() == q.id.has_value()) detail::fail(ErrorCategory::config, "cli", "give exactly one of --image or --id");
  if (q.image) {
    detail::require_input(*q.image, "query image", "--image");
    detail::require_input(cfg.paths.checkpoint, "checkpoint", "--ckpt");
  }
  const EmbeddingIndex index = EmbeddingIndex::build(load_embeddings(emb));
  RetrievalResult res;
  if (q.id) {
    const EmbeddingEntry* e = index.find(*q.id);
    if (!e) detail::fail(ErrorCategory::data, "cli", "id '", *q.id, "' is not in ", emb);
    res = query_knn(index, e->vector, q.k, *q.id);
  } else {
    Network net = load_checkpoint(cfg.paths.checkpoint);
    RawImage img = read_png(*q.image);
    if (q.preprocess) img = preprocess_image(img, cfg.preprocess, *q.image);
    const Shape& in = net.spec().input_shape;
    if (img.height != in[1] || img.width != in[2]) {
      detail::fail(ErrorCategory::shape, "cli", "query image is ", img.height, "x", img.width, " but the network expects ",
                   in[1], "x", in[2], " (try --preprocess)");
    }
    const Tensor v = embed(net, to_tensor(img));
    res = query_knn(index, v.span(), q.k);
  }
  for (std::size_t i = 0; i < res.size(); ++i) {
    out << i + 1 << '\t' << res[i].id << '\t' << res[i].label << '\t' << detail::shortest(res[i].distance) << '\n';
  }
  return res;
}

inline std::string metrics_json(const RunConfig& cfg, const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["config_hash"] = config_hash(cfg);
  const nlohmann::ordered_json body = report.to_json();
  for (const auto& [key, value] : body.items()) j[key] = value;
  return j.dump(2) + "\n";
}

/// Leave-one-out evaluation of an embedding set against itself.
inline MetricsReport run_evaluate(const RunConfig& cfg, std::ostream& log) {
  RunRecorder rec("evaluate", cfg);
  const std::string& emb = detail::require_input(cfg.paths.embeddings, "embedding file", "--emb");
  const std::string& out = detail::prepare_output(cfg.paths.metrics, "metrics path", "--out");
  const std::vector<EmbeddingEntry> entries = load_embeddings(emb);
  const EmbeddingIndex index = EmbeddingIndex::build(entries);
  std::optional<std::size_t> cutoff;
  if (cfg.eval_k > 0) cutoff.emplace(cfg.eval_k);
  const MetricsReport report = evaluate_retrieval(index, entries, cutoff);
  detail::write_text(out, metrics_json(cfg, report));
  rec.write(out, {{"skipped_queries", report.skipped}});
  log << "evaluate: MAP " << report.map << " MRR " << report.mrr << " over " << report.q << " queries -> " << out << "\n";
  return report;
}

inline void run_project(const RunConfig& cfg, std::ostream& log) {
  RunRecorder rec("project", cfg);
  const std::string& emb = detail::require_input(cfg.paths.embeddings, "embedding file", "--emb");
  const std::string& out = detail::prepare_output(cfg.paths.projection, "projection path", "--out");
  const Projection p = project_embeddings(load_embeddings(emb), cfg.projection_config());
  export_projection(p.points, out);
  rec.write(out, {{"kl_initial", p.kl_initial}, {"kl_final", p.kl_final}});
  log << "project: " << p.points.size() << " points, KL " << p.kl_initial << " -> " << p.kl_final << "\n";
}

// ---- command line

inline std::string error_json(const Error& e) {
  nlohmann::ordered_json j;
  j["error"] = {{"category", std::string(to_string(e.category()))}, {"module", e.module()}, {"message", e.message()}};
  return j.dump();
}

/// Runs `scnn <subcommand> ...`. Structured errors go to `err` as one JSON line; exit 2.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Siamese embedding training and retrieval pipeline", "scnn"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  struct Common {
    std::string config;
    std::vector<std::string> sets;
  } common;
  std::map<std::string, std::string> flag_values;
  std::optional<std::uint64_t> seed;
  std::string synth_out, pre_manifest, pre_out;
  QueryRequest query;
  std::optional<std::size_t> eval_k;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "config file (key = value lines)");
    sub->add_option("--set", common.sets, "override a config key, e.g. --set train.epochs=5")->take_all();
    sub->add_option("--seed", seed, "global seed");
  };
  auto keyed = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(flag, [&flag_values, key](const std::string& v) { flag_values[key] = v; }, help);
  };

  auto* synth = app.add_subcommand("synth", "generate the synthetic severity dataset");
  add_common(synth);
  keyed(synth, "--classes", "synth.classes", "number of classes");
  keyed(synth, "--per-class", "synth.per_class", "images per class");
  keyed(synth, "--size", "synth.size", "image side length");
  synth->add_option("--out", synth_out, "output directory")->required();

  auto* pre = app.add_subcommand("preprocess", "radius-normalize, subtract local average, crop and resize");
  add_common(pre);
  pre->add_option("--manifest", pre_manifest, "input manifest")->required();
  pre->add_option("--out", pre_out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train the Siamese network");
  add_common(tr);
  keyed(tr, "--manifest", "paths.train_manifest", "training manifest");
  keyed(tr, "--out", "paths.checkpoint", "checkpoint output");
  keyed(tr, "--history", "paths.history", "history CSV output");

  auto* em = app.add_subcommand("embed", "embed every image of a manifest");
  add_common(em);
  keyed(em, "--ckpt", "paths.checkpoint", "checkpoint");
  keyed(em, "--manifest", "paths.manifest", "manifest");
  keyed(em, "--out", "paths.embeddings", "embedding output");

  auto* ix = app.add_subcommand("index", "load an embedding file and summarize it");
  add_common(ix);
  keyed(ix, "--emb", "paths.embeddings", "embedding file");

  auto* qu = app.add_subcommand("query", "k nearest neighbors of an image or a stored id");
  add_common(qu);
  keyed(qu, "--emb", "paths.embeddings", "embedding file");
  keyed(qu, "--ckpt", "paths.checkpoint", "checkpoint (needed with --image)");
  qu->add_option("--image", query.image, "query PNG");
  qu->add_option("--id", query.id, "id of a stored embedding (excluded from its own results)");
  qu->add_option("--k", query.k, "number of neighbors")->check(CLI::PositiveNumber);
  qu->add_flag("--preprocess", query.preprocess, "run the preprocessing chain on --image first");

  auto* ev = app.add_subcommand("evaluate", "leave-one-out MAP / MRR");
  add_common(ev);
  keyed(ev, "--emb", "paths.embeddings", "embedding file");
  keyed(ev, "--out", "paths.metrics", "metrics JSON output");
  keyed(ev, "--k", "eval.k", "rank cutoff (0 = whole pool)");

  auto* pr = app.add_subcommand("project", "PCA + t-SNE to 2-D");
  add_common(pr);
  keyed(pr, "--emb", "paths.embeddings", "embedding file");
  keyed(pr, "--out", "paths.projection", "projection CSV output");

  std::vector<const char*> argv{"scnn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    RunConfig cfg = common.config.empty() ? RunConfig{} : load_config(common.config);
    for (const auto& s : common.sets) set_config_value(cfg, s, "--set: ");
    for (const auto& [key, value] : flag_values) set_config_value(cfg, key + "=" + value, "flag: ");
    if (seed) cfg.seed = *seed;
    cfg.validate();

    if (synth->parsed()) run_synth(cfg, synth_out, out);
    else if (pre->parsed()) run_preprocess(cfg, pre_manifest, pre_out, out);
    else if (tr->parsed()) run_train(cfg, out);
    else if (em->parsed()) run_embed(cfg, out);
    else if (ix->parsed()) run_index(cfg, out);
    else if (qu->parsed()) run_query(cfg, query, out);
    else if (ev->parsed()) run_evaluate(cfg, out);
    else if (pr->parsed()) run_project(cfg, out);
  } catch (const Error& e) {
    err << error_json(e) << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << error_json(Error(ErrorCategory::io, "cli", e.what())) << "\n";
    return 2;
  }
  return 0;
}

}  // namespace scnn
