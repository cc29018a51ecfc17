// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <Eigen/Dense>

#include "scnn/scnn.hpp"

using namespace scnn;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

int failures = 0;

void report(int n, const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  if (!o.pass) ++failures;
  std::printf("[%s] criterion %d: %s (%.1fs)%s%s\n", o.pass ? "PASS" : "FAIL", n, name.c_str(), seconds_since(t0),
              o.detail.empty() ? "" : " | ", o.detail.c_str());
  std::fflush(stdout);
}

template <typename T>
BasicTensor<T> random_tensor(Shape shape, Rng& rng, double lo, double hi) {
  BasicTensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

LayerSpec random_spec(LayerKind kind, Rng& rng, Shape& input) {
  const std::size_t n = 2 + rng.below(3), c = 1 + rng.below(3), h = 3 + rng.below(4), w = 3 + rng.below(4);
  switch (kind) {
    case LayerKind::conv2d:
      input = {n, c, h, w};
      return LayerSpec::conv2d(c, 1 + rng.below(3), 1 + rng.below(3), 1 + rng.below(2), rng.below(2));
    case LayerKind::dense: {
      const std::size_t in = 1 + rng.below(6);
      input = {n, in};
      return LayerSpec::dense(in, 1 + rng.below(5));
    }
    case LayerKind::batch_norm:
      input = rng.bernoulli(0.5) ? Shape{n + 2, c, h, w} : Shape{n + 2, c + 1};
      return LayerSpec::batch_norm(input[1]);
    case LayerKind::relu: input = {n, c, h, w}; return LayerSpec::relu();
    case LayerKind::global_avg_pool: input = {n, c, h, w}; return LayerSpec::global_avg_pool();
    case LayerKind::dropout: input = {n, c, h, w}; return LayerSpec::dropout(0.1 + 0.5 * rng.uniform());
  }
  return {};
}

// ---- 1
Outcome gradient_soundness() {
  Outcome o;
  const auto t0 = Clock::now();
  for (LayerKind kind : {LayerKind::conv2d, LayerKind::dense, LayerKind::batch_norm, LayerKind::relu,
                         LayerKind::global_avg_pool, LayerKind::dropout}) {
    Rng rng(derive_seed(500, {static_cast<std::uint64_t>(kind)}));
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
      Shape shape;
      const LayerSpec spec = random_spec(kind, rng, shape);
      const GradCheckResult r =
          finite_difference_check<double>(spec, random_tensor<double>(shape, rng, -2, 2), 1e-3, rng.next_u64());
      o.require(r.checked > 0, to_string(kind) + " checked nothing");
      worst = std::max(worst, r.max_relative_error);
    }
    o.require(worst < 1e-3, to_string(kind) + " max rel err " + fmt(worst));
  }

  // contrastive gradient against central differences of a 64-bit loss
  Rng rng(501);
  int checked = 0;
  double worst = 0;
  while (checked < 50) {
    const std::size_t n = 1 + rng.below(8);
    const double margin = 0.5 + 1.5 * rng.uniform();
    const bool same = rng.bernoulli(0.5);
    std::vector<float> f1(n), f2(n);
    for (auto& v : f1) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : f2) v = static_cast<float>(rng.uniform(-1, 1));
    std::vector<double> e1(f1.begin(), f1.end()), e2(f2.begin(), f2.end());
    auto loss = [&] {
      double d2 = 0;
      for (std::size_t i = 0; i < n; ++i) d2 += (e1[i] - e2[i]) * (e1[i] - e2[i]);
      const double d = std::sqrt(d2);
      return same ? 0.5 * d2 : 0.5 * std::pow(std::max(0.0, margin - d), 2);
    };
    double d2 = 0;
    for (std::size_t i = 0; i < n; ++i) d2 += (e1[i] - e2[i]) * (e1[i] - e2[i]);
    const double d = std::sqrt(d2);
    if (std::abs(d - margin) < 1e-4 || d < 1e-4) continue;
    const PairGradient g = contrastive_loss_grad(std::span<const float>(f1), std::span<const float>(f2), same, margin);
    for (int branch = 0; branch < 2; ++branch)
      for (std::size_t i = 0; i < n; ++i) {
        auto& v = branch == 0 ? e1 : e2;
        const double orig = v[i];
        v[i] = orig + 1e-6;
        const double lp = loss();
        v[i] = orig - 1e-6;
        const double lm = loss();
        v[i] = orig;
        const double num = (lp - lm) / 2e-6;
        const double ana = branch == 0 ? g.first[i] : g.second[i];
        worst = std::max(worst, std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), 1e-3}));
      }
    ++checked;
  }
  o.require(worst < 1e-3, "contrastive max rel err " + fmt(worst));
  const double t = seconds_since(t0);
  o.require(t < 60.0, "runtime " + fmt(t) + "s");
  if (o.pass) o.detail = "6 layer kinds x 20 + 50 contrastive pairs, worst contrastive err " + fmt(worst, 2);
  return o;
}

// ---- 2
Outcome contrastive_exactness() {
  Outcome o;
  auto sp = [](const std::vector<float>& v) { return std::span<const float>(v); };
  const std::vector<float> z{0, 0}, p{3, 4}, q{0.6f, 0};
  o.require(contrastive_loss(sp(p), sp(p), true, 1.0) == 0.0, "identical same-label pair");
  o.require(std::abs(contrastive_loss(sp(z), sp(p), true, 1.0) - 12.5) <= 1e-6, "(0,0)-(3,4) same");
  o.require(std::abs(contrastive_loss(sp(z), sp(q), false, 1.0) - 0.08) <= 1e-6, "(0,0)-(0.6,0) different");
  PairGradient g = contrastive_loss_grad(sp(p), sp(z), true, 1.0);
  o.require(std::abs(g.first[0] - 3) <= 1e-6 && std::abs(g.first[1] - 4) <= 1e-6, "grad of same pair");
  g = contrastive_loss_grad(sp(q), sp(z), false, 1.0);
  o.require(std::abs(g.first[0] + 0.4) <= 1e-6 && std::abs(g.first[1]) <= 1e-6, "grad of different pair");
  // hinge: D >= margin
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const double margin = 0.1 + rng.uniform();
    std::vector<float> a(4), b(4);
    for (auto& v : a) v = static_cast<float>(rng.uniform(-3, 3));
    for (auto& v : b) v = static_cast<float>(rng.uniform(-3, 3));
    const double d = l2_distance(sp(a), sp(b));
    if (d < margin) continue;
    const PairGradient h = contrastive_loss_grad(sp(a), sp(b), false, margin);
    const bool zero = std::all_of(h.first.begin(), h.first.end(), [](double v) { return v == 0.0; }) &&
                      std::all_of(h.second.begin(), h.second.end(), [](double v) { return v == 0.0; });
    o.require(contrastive_loss(sp(a), sp(b), false, margin) == 0.0 && zero, "hinge not exactly zero");
  }
  const std::vector<float> unit{1, 0};
  o.require(contrastive_loss(sp(z), sp(unit), false, 1.0) == 0.0, "D == margin loss");
  return o;
}

// ---- 3
Outcome twin_invariance() {
  Outcome o;
  const Dataset ds = generate_synthetic(5, 4, 16, 3);
  Network net = build_network(default_network_spec(16, 8, 4), 1);
  const Network first_twin = net.twin();
  SiameseTrainer trainer(net, TrainConfig{});
  const Tensor probe = to_tensor(ds[0].image);
  Rng rng(5);
  for (int step = 0; step < 10; ++step) {
    trainer.step(ds, sample_pairs(ds, 8, 0.5, rng), rng);
    Network a = net.twin(), b = first_twin.twin();
    const Tensor ea = embed(a, probe), eb = embed(b, probe), en = embed(net, probe);
    const bool same = ea.size() == eb.size() &&
                      std::memcmp(ea.data(), eb.data(), ea.size() * sizeof(float)) == 0 &&
                      std::memcmp(ea.data(), en.data(), ea.size() * sizeof(float)) == 0;
    o.require(same, "branches diverged at step " + std::to_string(step));
  }
  return o;
}

// ---- 4
double step_sum_ap(const std::vector<bool>& flags, std::size_t total) {
  double area = 0, prev = 0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < flags.size(); ++k) {
    hits += flags[k];
    const double recall = static_cast<double>(hits) / total;
    area += (recall - prev) * static_cast<double>(hits) / (k + 1);
    prev = recall;
  }
  return area;
}

Outcome metric_oracles() {
  Outcome o;
  Rng rng(40);
  double worst = 0;
  for (int set = 0; set < 1000; ++set) {
    // random pool of scored items; the oracle sorts it fully
    std::vector<QueryJudgment> js;
    double map = 0, mrr = 0;
    const std::size_t nq = 1 + rng.below(15);
    for (std::size_t q = 0; q < nq; ++q) {
      const std::size_t n = 1 + rng.below(40);
      std::vector<std::pair<double, bool>> items(n);
      for (auto& it : items) it = {rng.uniform(), rng.bernoulli(0.3)};
      std::size_t total = 0;
      for (auto& it : items) total += it.second;
      if (total == 0) {
        items[0].second = true;
        total = 1;
      }
      std::sort(items.begin(), items.end());
      std::vector<bool> flags;
      for (auto& it : items) flags.push_back(it.second);
      const auto first = std::find(flags.begin(), flags.end(), true) - flags.begin();
      mrr += 1.0 / static_cast<double>(first + 1);
      map += step_sum_ap(flags, total);
      js.push_back({"q" + std::to_string(q), 0, flags, total});
    }
    worst = std::max({worst, std::abs(mean_average_precision(js) - map / nq), std::abs(mean_reciprocal_rank(js) - mrr / nq)});
  }
  o.require(worst <= 1e-12, "max oracle deviation " + fmt(worst));

  std::vector<EmbeddingEntry> entries;
  for (int i = 0; i < 500; ++i) {
    std::vector<float> v(16);
    for (auto& x : v) x = static_cast<float>(rng.uniform());
    entries.push_back({"r" + std::to_string(i), i % 5, v});
  }
  const MetricsReport r = evaluate_retrieval(EmbeddingIndex::build(entries), entries);
  o.require(r.q >= 200, "too few queries");
  o.require(std::abs(r.map - 0.2) <= 0.05, "chance MAP " + fmt(r.map));
  o.detail = o.pass ? "oracle dev " + fmt(worst, 2) + ", chance MAP " + fmt(r.map) + " over " + std::to_string(r.q) : o.detail;
  return o;
}

// ---- 5
Outcome knn_exactness() {
  Outcome o;
  Rng rng(50);
  int tie_cases = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const bool ties = trial % 2 == 0;
    const std::size_t n = 1 + rng.below(150), dim = 1 + rng.below(6);
    std::vector<EmbeddingEntry> entries;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<float> v(dim);
      for (auto& x : v) x = ties ? static_cast<float>(rng.below(3)) : static_cast<float>(rng.normal());
      entries.push_back({"id" + std::to_string(rng.below(1000000)) + "_" + std::to_string(i), static_cast<int>(rng.below(5)), v});
    }
    std::vector<float> q(dim);
    for (auto& x : q) x = ties ? static_cast<float>(rng.below(3)) : static_cast<float>(rng.normal());
    const std::size_t k = 1 + rng.below(n + 3);
    std::vector<Neighbor> all;
    for (const auto& e : entries) {
      long double s = 0;
      for (std::size_t i = 0; i < dim; ++i) s += (static_cast<long double>(q[i]) - e.vector[i]) * (static_cast<long double>(q[i]) - e.vector[i]);
      all.push_back({e.id, e.label, static_cast<double>(std::sqrt(s))});
    }
    std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
      return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
    });
    for (std::size_t i = 1; i < all.size(); ++i) tie_cases += all[i].distance == all[i - 1].distance;
    all.resize(std::min(k, all.size()));
    const RetrievalResult got = query_knn(EmbeddingIndex::build(entries), q, k);
    bool same = got.size() == all.size();
    for (std::size_t i = 0; same && i < got.size(); ++i)
      same = got[i].id == all[i].id && std::abs(got[i].distance - all[i].distance) <= 1e-9;
    o.require(same, "instance " + std::to_string(trial) + " differs");
  }
  o.require(tie_cases > 0, "no ties exercised");
  if (o.pass) o.detail = std::to_string(tie_cases) + " tied neighbor pairs";
  return o;
}

// ---- 6, 7
struct LearningRun {
  double map = 0, mrr = 0, random_map = 0, d01 = 0, d04 = 0;
};

double mean_class_distance(const std::vector<EmbeddingEntry>& emb, int a, int b) {
  double s = 0;
  std::size_t n = 0;
  for (const auto& x : emb)
    for (const auto& y : emb)
      if (x.label == a && y.label == b && x.id != y.id) {
        s += l2_distance(std::span<const float>(x.vector), std::span<const float>(y.vector));
        ++n;
      }
  return s / static_cast<double>(n);
}

LearningRun learning_run(std::uint64_t seed, std::size_t& n_train, std::size_t& n_test) {
  const Dataset all = generate_synthetic(5, 150, 32, derive_seed(seed, {0x5e7}));
  Rng split(derive_seed(seed, {0x5b1}));
  const auto [train_set, test_set] = stratified_split(all, 2.0 / 3.0, split);
  n_train = train_set.size();
  n_test = test_set.size();
  const NetworkSpec spec = default_network_spec();
  TrainConfig cfg;
  cfg.seed = seed;
  LearningRun r;
  const auto random_emb = embed_dataset(build_network(spec, seed), test_set);
  r.random_map = evaluate_retrieval(EmbeddingIndex::build(random_emb), random_emb).map;
  auto [net, hist] = train(train_set, spec, cfg);
  const auto emb = embed_dataset(net, test_set);
  const MetricsReport m = evaluate_retrieval(EmbeddingIndex::build(emb), emb);
  r.map = m.map;
  r.mrr = m.mrr;
  r.d01 = mean_class_distance(emb, 0, 1);
  r.d04 = mean_class_distance(emb, 0, 4);
  return r;
}

std::vector<LearningRun> learning_runs;
double learning_seconds = 0;

Outcome learning_effect() {
  Outcome o;
  const auto t0 = Clock::now();
  std::ostringstream d;
  for (std::uint64_t seed : {1, 2, 3}) {
    std::size_t n_train = 0, n_test = 0;
    const LearningRun r = learning_run(seed, n_train, n_test);
    learning_runs.push_back(r);
    const std::string s = "seed " + std::to_string(seed);
    o.require(n_train == 500 && n_test == 250, s + " split " + std::to_string(n_train) + "/" + std::to_string(n_test));
    o.require(r.map >= 0.45, s + " MAP " + fmt(r.map));
    o.require(r.map - r.random_map >= 0.15, s + " MAP gain " + fmt(r.map - r.random_map));
    o.require(r.mrr >= 0.75, s + " MRR " + fmt(r.mrr));
    d << (seed > 1 ? ", " : "") << s << ": MAP " << fmt(r.map) << " (random " << fmt(r.random_map) << "), MRR "
      << fmt(r.mrr);
  }
  learning_seconds = seconds_since(t0);
  o.require(learning_seconds < 600.0, "runtime " + fmt(learning_seconds) + "s");
  o.detail = o.pass ? d.str() : o.detail + " || " + d.str();
  return o;
}

Outcome severity_ordering() {
  Outcome o;
  o.require(!learning_runs.empty(), "no trained model");
  std::ostringstream d;
  for (std::size_t i = 0; i < learning_runs.size(); ++i) {
    const auto& r = learning_runs[i];
    o.require(r.d04 > r.d01, "seed " + std::to_string(i + 1) + ": d(0,4) " + fmt(r.d04) + " <= d(0,1) " + fmt(r.d01));
    d << (i ? ", " : "") << "d(0,1) " << fmt(r.d01) << " < d(0,4) " << fmt(r.d04);
  }
  if (o.pass) o.detail = d.str();
  return o;
}

// ---- 8
RawImage disk(std::size_t h, std::size_t w, double cy, double cx, double r, float value) {
  RawImage img(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r)
        for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = value;
  return img;
}

Outcome preprocessing() {
  Outcome o;
  Rng rng(80);
  double worst = 0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t h = 60 + rng.below(80), w = 60 + rng.below(80);
    const double r = 10 + rng.uniform() * (std::min(h, w) / 2.0 - 14);
    const double target = rng.uniform(20, 80);
    const RawImage img = disk(h, w, h / 2.0 + rng.uniform(-2, 2), w / 2.0 + rng.uniform(-2, 2), r,
                              static_cast<float>(rng.uniform(0.3, 1.0)));
    worst = std::max(worst, std::abs(estimate_field_radius(normalize_radius(img, target)) - target));
  }
  o.require(worst <= 1.0, "radius error " + fmt(worst) + " px");

  RawImage noise(20, 24);
  for (auto& v : noise.pixels) v = static_cast<float>(rng.uniform());
  for (int i = 0; i < 20; ++i) o.require(augment(noise, AugmentSpec{}, rng) == noise, "disabled augmentation changed the image");

  // per-class round-half-away-from-zero of 0.7 * n
  Dataset ds;
  const std::map<int, std::size_t> counts{{0, 10}, {1, 7}, {2, 3}, {3, 25}, {4, 150}};
  for (auto [label, n] : counts)
    for (std::size_t i = 0; i < n; ++i) ds.push_back({"c" + std::to_string(label) + "_" + std::to_string(i), noise, label, {}});
  Rng srng(81);
  const auto [train_set, test_set] = stratified_split(ds, 0.7, srng);
  const auto tc = class_counts(train_set), sc = class_counts(test_set);
  for (auto [label, n] : counts) {
    const auto expect = static_cast<std::size_t>(std::floor(0.7 * static_cast<double>(n) + 0.5));
    o.require(tc.at(label) == expect && sc.at(label) == n - expect, "class " + std::to_string(label) + " split " +
                                                                         std::to_string(tc.at(label)) + "/" +
                                                                         std::to_string(sc.at(label)));
  }

  Dataset skewed;
  for (auto [label, n] : std::map<int, std::size_t>{{0, 60}, {1, 9}, {2, 25}})
    for (std::size_t i = 0; i < n; ++i) skewed.push_back({"s" + std::to_string(label) + "_" + std::to_string(i), noise, label, {}});
  Rng brng(82);
  const auto balanced = class_counts(balance_classes(skewed, AugmentSpec::standard(), brng));
  o.require(balanced == std::map<int, std::size_t>{{0, 60}, {1, 60}, {2, 60}}, "balance did not reach the max class");
  if (o.pass) o.detail = "worst radius error " + fmt(worst, 3) + " px";
  return o;
}

// ---- 9
Outcome projection() {
  Outcome o;
  Rng rng(90);
  double worst = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 30 + rng.below(40), d = 3 + rng.below(12);
    Matrix x(n, std::vector<double>(d));
    Eigen::MatrixXd m(n, d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) m(i, k) = x[i][k] = rng.normal(0, 1.0 + k);
    const PcaResult r = pca(x, std::min<std::size_t>(2, d));
    const Eigen::MatrixXd c = m.rowwise() - m.colwise().mean();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.transpose() * c / static_cast<double>(n - 1));
    for (std::size_t k = 0; k < d; ++k) worst = std::max(worst, std::abs(r.eigenvalues[k] - es.eigenvalues()(d - 1 - k)));
  }
  o.require(worst <= 1e-8, "eigenvalue deviation " + fmt(worst));

  Matrix blobs;
  for (std::size_t b = 0; b < 3; ++b)
    for (int i = 0; i < 50; ++i) {
      std::vector<double> p(10);
      for (std::size_t k = 0; k < 10; ++k) p[k] = rng.normal() + (k == b ? 12.0 : 0.0);
      blobs.push_back(std::move(p));
    }
  double entropy_err = 0;
  for (double perp : {5.0, 30.0}) {
    const Affinities a = calibrate_affinities(squared_distances(blobs), perp);
    for (const auto& row : a.conditional) {
      double h = 0;
      for (double v : row)
        if (v > 0) h -= v * std::log(v);
      entropy_err = std::max(entropy_err, std::abs(h - std::log(perp)));
    }
  }
  o.require(entropy_err <= 1e-5, "entropy error " + fmt(entropy_err));
  TsneConfig cfg;
  cfg.seed = 9;
  const TsneResult t = tsne(blobs, cfg);
  o.require(t.kl_final < t.kl_initial, "KL " + fmt(t.kl_initial) + " -> " + fmt(t.kl_final));
  if (o.pass) o.detail = "KL " + fmt(t.kl_initial) + " -> " + fmt(t.kl_final);
  return o;
}

// ---- 10
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome reproducibility() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "scnn_acceptance_repro";
  fs::remove_all(root);
  const std::vector<std::string> common{"--seed", "11", "--set", "network.input_size=16", "--set", "train.epochs=2",
                                        "--set", "train.pairs_per_epoch=96"};
  auto run = [&](const fs::path& dir) {
    std::ostringstream out, err;
    auto call = [&](std::vector<std::string> args) {
      args.insert(args.end(), common.begin(), common.end());
      if (run_cli(args, out, err) != 0) o.require(false, "cli failed: " + err.str());
    };
    const std::string d = dir.string();
    call({"synth", "--per-class", "12", "--size", "16", "--out", d + "/data"});
    call({"train", "--manifest", d + "/data/train.csv", "--out", d + "/model.snet"});
    call({"embed", "--ckpt", d + "/model.snet", "--manifest", d + "/data/test.csv", "--out", d + "/test.semb"});
    call({"evaluate", "--emb", d + "/test.semb", "--out", d + "/metrics.json"});
    return slurp(dir / "metrics.json");
  };
  const std::string a = run(root / "a"), b = run(root / "b");
  o.require(!a.empty(), "empty metrics");
  o.require(a == b, "metrics JSON differs between runs");
  if (o.pass) o.detail = std::to_string(a.size()) + " identical bytes";
  fs::remove_all(root);
  return o;
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  report(1, "gradient soundness", gradient_soundness);
  report(2, "contrastive-loss exactness", contrastive_exactness);
  report(3, "twin invariance", twin_invariance);
  report(4, "metric oracles", metric_oracles);
  report(5, "k-NN exactness", knn_exactness);
  report(6, "desk-scale learning effect", learning_effect);
  report(7, "severity ordering", severity_ordering);
  report(8, "preprocessing", preprocessing);
  report(9, "projection", projection);
  report(10, "reproducibility", reproducibility);
  std::printf("%s: %d failing criteria, %.1fs total\n", failures ? "FAIL" : "PASS", failures, seconds_since(t0));
  return failures ? 1 : 0;
}
