#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "scnn/augment.hpp"
#include "scnn/network.hpp"
#include "scnn/preprocess.hpp"
#include "scnn/projection.hpp"
#include "scnn/trainer.hpp"

namespace scnn {

struct NetworkOptions {
  std::size_t input_size = 32;
  std::size_t embedding_dim = 32;
  std::size_t channels = 16;
  double dropout = 0.25;
  std::size_t blocks = 2;
};

struct SynthOptions {
  std::size_t classes = 5;
  std::size_t per_class = 150;
  std::size_t size = 32;
};

struct RunPaths {
  std::string manifest;
  std::string train_manifest;
  std::string test_manifest;
  std::string checkpoint;
  std::string embeddings;
  std::string metrics;
  std::string projection;
  std::string history;
};

/// Every tunable of the pipeline under a dotted key. `seed` drives training,
/// synthesis, splitting, balancing and t-SNE initialization.
struct RunConfig {
  std::uint64_t seed = 0;
  TrainConfig train;
  NetworkOptions network;
  AugmentSpec augment = AugmentSpec::standard();
  bool balance = true;
  PreprocessConfig preprocess;
  ProjectionConfig projection;
  SynthOptions synth;
  double split_train_fraction = 0.7;
  std::size_t eval_k = 0;  // 0 = rank the whole pool
  RunPaths paths;

  NetworkSpec network_spec() const {
    return default_network_spec(network.input_size, network.embedding_dim, network.channels, network.dropout,
                                network.blocks);
  }
  TrainConfig train_config() const {
    TrainConfig t = train;
    t.seed = seed;
    return t;
  }
  ProjectionConfig projection_config() const {
    ProjectionConfig p = projection;
    p.tsne.seed = derive_seed(seed, {0x75e});
    return p;
  }

  void validate() const;
};

namespace detail {

using FieldRef = std::variant<double*, std::size_t*, bool*, std::string*>;

struct Field {
  const char* key;
  FieldRef ref;
};

inline std::vector<Field> config_fields(RunConfig& c) {
  return {
      {"seed", &c.seed},
      {"train.margin", &c.train.margin},
      {"train.learning_rate", &c.train.learning_rate},
      {"train.adam_beta1", &c.train.adam_beta1},
      {"train.adam_beta2", &c.train.adam_beta2},
      {"train.adam_epsilon", &c.train.adam_epsilon},
      {"train.batch_size", &c.train.batch_size},
      {"train.epochs", &c.train.epochs},
      {"train.pairs_per_epoch", &c.train.pairs_per_epoch},
      {"train.same_pair_fraction", &c.train.same_pair_fraction},
      {"network.input_size", &c.network.input_size},
      {"network.embedding_dim", &c.network.embedding_dim},
      {"network.channels", &c.network.channels},
      {"network.dropout", &c.network.dropout},
      {"network.blocks", &c.network.blocks},
      {"augment.balance", &c.balance},
      {"augment.crop_offset_max", &c.augment.crop_offset_max},
      {"augment.hflip", &c.augment.allow_hflip},
      {"augment.vflip", &c.augment.allow_vflip},
      {"augment.blur_sigma_min", &c.augment.blur_sigma_min},
      {"augment.blur_sigma_max", &c.augment.blur_sigma_max},
      {"augment.rotation_min_deg", &c.augment.rotation_min_deg},
      {"augment.rotation_max_deg", &c.augment.rotation_max_deg},
      {"preprocess.target_radius", &c.preprocess.target_radius},
      {"preprocess.keep_fraction", &c.preprocess.keep_fraction},
      {"preprocess.output_size", &c.preprocess.output_size},
      {"preprocess.local_sigma_fraction", &c.preprocess.local_sigma_fraction},
      {"preprocess.subtract_local", &c.preprocess.subtract_local},
      {"projection.pca_dim", &c.projection.pca_dim},
      {"projection.perplexity", &c.projection.tsne.perplexity},
      {"projection.iterations", &c.projection.tsne.iterations},
      {"projection.learning_rate", &c.projection.tsne.learning_rate},
      {"synth.classes", &c.synth.classes},
      {"synth.per_class", &c.synth.per_class},
      {"synth.size", &c.synth.size},
      {"split.train_fraction", &c.split_train_fraction},
      {"eval.k", &c.eval_k},
      {"paths.manifest", &c.paths.manifest},
      {"paths.train_manifest", &c.paths.train_manifest},
      {"paths.test_manifest", &c.paths.test_manifest},
      {"paths.checkpoint", &c.paths.checkpoint},
      {"paths.embeddings", &c.paths.embeddings},
      {"paths.metrics", &c.paths.metrics},
      {"paths.projection", &c.paths.projection},
      {"paths.history", &c.paths.history},
  };
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename N>
bool parse_number(std::string_view v, N& out) {
  if (v.empty() || v.front() == '+' || (std::is_unsigned_v<N> && v.front() == '-')) return false;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  return ec == std::errc{} && ptr == v.data() + v.size();
}

inline void assign_field(const Field& f, std::string_view value, const std::string& where) {
  auto bad = [&](const char* expected) {
    fail(ErrorCategory::config, "cli", where, "key '", f.key, "': '", value, "' is not ", expected);
  };
  std::visit(
      [&](auto* p) {
        using V = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<V, std::string>) {
          *p = std::string(value);
        } else if constexpr (std::is_same_v<V, bool>) {
          if (value == "true" || value == "1") *p = true;
          else if (value == "false" || value == "0") *p = false;
          else bad("a boolean (true/false)");
        } else if constexpr (std::is_same_v<V, double>) {
          double d = 0.0;
          if (!parse_number(value, d) || !std::isfinite(d)) bad("a finite number");
          *p = d;
        } else {
          V n = 0;
          if (!parse_number(value, n)) bad("a non-negative integer");
          *p = n;
        }
      },
      f.ref);
}

inline std::string format_field(const Field& f) {
  return std::visit(
      [](auto* p) -> std::string {
        using V = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<V, std::string>) return *p;
        else if constexpr (std::is_same_v<V, bool>) return *p ? "true" : "false";
        else if constexpr (std::is_same_v<V, double>) return shortest(*p);
        else return std::to_string(*p);
      },
      f.ref);
}

}  // namespace detail

inline void RunConfig::validate() const {
  auto bad = [](auto&&... what) { detail::fail(ErrorCategory::config, "cli", what...); };
  train_config().validate();
  augment.validate();
  if (network.input_size == 0 || network.embedding_dim == 0 || network.channels == 0) {
    bad("network sizes must be positive");
  }
  if (!(network.dropout >= 0.0 && network.dropout < 1.0)) bad("network.dropout must be in [0,1)");
  if (!(preprocess.target_radius > 0.0)) bad("preprocess.target_radius must be > 0");
  if (!(preprocess.keep_fraction > 0.0 && preprocess.keep_fraction <= 1.0)) bad("preprocess.keep_fraction must be in (0,1]");
  if (preprocess.output_size == 0) bad("preprocess.output_size must be positive");
  if (!(preprocess.local_sigma_fraction > 0.0)) bad("preprocess.local_sigma_fraction must be > 0");
  if (projection.pca_dim == 0) bad("projection.pca_dim must be positive");
  if (!(projection.tsne.perplexity > 0.0)) bad("projection.perplexity must be > 0");
  if (projection.tsne.iterations == 0) bad("projection.iterations must be positive");
  if (!(projection.tsne.learning_rate > 0.0)) bad("projection.learning_rate must be > 0");
  if (synth.classes < 2 || synth.classes > static_cast<std::size_t>(kMaxLabel) + 1) bad("synth.classes must be in [2, 5]");
  if (synth.per_class == 0 || synth.size < 8) bad("synth.per_class must be positive and synth.size >= 8");
  if (!(split_train_fraction > 0.0 && split_train_fraction < 1.0)) bad("split.train_fraction must be in (0,1)");
}

/// Applies one `key = value` (or `key=value`) assignment; unknown keys are rejected.
inline void set_config_value(RunConfig& cfg, std::string_view assignment, const std::string& where = {}) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    detail::fail(ErrorCategory::config, "cli", where, "expected 'key = value', got '", assignment, "'");
  }
  const std::string_view key = detail::trim(assignment.substr(0, eq));
  const std::string_view value = detail::trim(assignment.substr(eq + 1));
  for (const auto& f : detail::config_fields(cfg)) {
    if (key == f.key) {
      detail::assign_field(f, value, where);
      return;
    }
  }
  detail::fail(ErrorCategory::config, "cli", where, "unknown key '", key, "'");
}

inline void apply_config_text(RunConfig& cfg, std::string_view text, const std::string& source = "<memory>") {
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq != std::string_view::npos && !seen.insert(std::string(detail::trim(line.substr(0, eq)))).second) {
      detail::fail(ErrorCategory::config, "cli", where, "key '", detail::trim(line.substr(0, eq)), "' set twice");
    }
    set_config_value(cfg, line, where);
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) detail::fail(ErrorCategory::io, "cli", "cannot open config '", path, "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  RunConfig cfg;
  apply_config_text(cfg, text, path);
  return cfg;
}

/// Every key with its effective value, one `key = value` per line, in a fixed order.
inline std::string config_to_text(const RunConfig& cfg, bool include_paths = true) {
  std::string out;
  for (const auto& f : detail::config_fields(const_cast<RunConfig&>(cfg))) {
    if (!include_paths && std::string_view(f.key).starts_with("paths.")) continue;
    out += f.key;
    out += " = ";
    out += detail::format_field(f);
    out += '\n';
  }
  return out;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of the effective settings. Paths are left out so that moving a run
/// directory does not change it.
inline std::string config_hash(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(config_to_text(cfg, false))));
  return buf;
}

}  // namespace scnn
