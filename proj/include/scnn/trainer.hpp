#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scnn/adam.hpp"
#include "scnn/contrastive.hpp"
#include "scnn/network.hpp"
#include "scnn/pairs.hpp"

namespace scnn {

struct TrainConfig {
  double margin = 1.0;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 8;
  std::size_t epochs = 10;
  std::size_t pairs_per_epoch = 512;
  double same_pair_fraction = 0.5;
  std::uint64_t seed = 0;

  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_epsilon}; }

  void validate() const {
    auto bad = [](const std::string& what) { detail::fail(ErrorCategory::config, "siamese-training", what); };
    if (!(margin > 0.0)) bad("margin must be > 0");
    if (!(learning_rate > 0.0)) bad("learning_rate must be > 0");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) bad("adam_beta1 must be in (0,1)");
    if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) bad("adam_beta2 must be in (0,1)");
    if (!(adam_epsilon > 0.0)) bad("adam_epsilon must be > 0");
    if (batch_size == 0) bad("batch_size must be positive");
    if (pairs_per_epoch == 0) bad("pairs_per_epoch must be positive");
    if (!(same_pair_fraction > 0.0 && same_pair_fraction < 1.0)) bad("same_pair_fraction must be in (0,1)");
  }
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double mean_same_dist = 0.0;
  double mean_diff_dist = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;

  std::string to_csv() const {
    std::string out = "epoch,mean_loss,mean_same_dist,mean_diff_dist\n";
    auto num = [](double v) {
      char buf[64];
      auto r = std::to_chars(buf, buf + sizeof buf, v);
      return std::string(buf, r.ptr);
    };
    for (const auto& e : epochs) {
      out += std::to_string(e.epoch) + "," + num(e.mean_loss) + "," + num(e.mean_same_dist) + "," +
             num(e.mean_diff_dist) + "\n";
    }
    return out;
  }

  void write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) detail::fail(ErrorCategory::io, "siamese-training", "cannot open '", path, "' for writing");
    out << to_csv();
  }
};

struct StepStats {
  double loss_sum = 0.0;
  double same_dist_sum = 0.0;
  double diff_dist_sum = 0.0;
  std::size_t same_count = 0;
  std::size_t diff_count = 0;
  std::size_t pairs = 0;
};

/// Twin forward/backward over one shared parameter store. Both members of
/// every pair go through a single batched forward call, so batch-norm sees
/// the combined statistics of both branches and their gradients sum into the
/// same parameter gradients.
class SiameseTrainer {
 public:
  SiameseTrainer(Network& net, TrainConfig config) : net_(net), config_(std::move(config)) { config_.validate(); }

  /// Mean contrastive loss of the pairs under train-mode forward (no update).
  StepStats evaluate(const Dataset& data, std::span<const ImagePair> pairs, Rng& dropout_rng) {
    return forward_pairs(data, pairs, dropout_rng, nullptr);
  }

  /// One Adam step on the mean loss of `pairs`.
  StepStats step(const Dataset& data, std::span<const ImagePair> pairs, Rng& dropout_rng) {
    Tensor grad;
    StepStats stats = forward_pairs(data, pairs, dropout_rng, &grad);
    NetworkGradients grads = net_.backward(grad);
    std::vector<Tensor> flat;
    for (auto& layer : grads)
      for (auto& t : layer) flat.push_back(std::move(t));
    const std::vector<Tensor*> params = net_.learned_parameters();
    adam_update<float>(params, flat, adam_, config_.adam());
    return stats;
  }

  const AdamState<float>& adam_state() const { return adam_; }

 private:
  StepStats forward_pairs(const Dataset& data, std::span<const ImagePair> pairs, Rng& rng, Tensor* grad_out) {
    const std::size_t B = pairs.size();
    if (B == 0) detail::fail(ErrorCategory::data, "siamese-training", "empty pair batch");
    std::vector<const RawImage*> images(2 * B);
    for (std::size_t i = 0; i < B; ++i) {
      images[i] = &data.at(pairs[i].first).image;
      images[B + i] = &data.at(pairs[i].second).image;
    }
    const Tensor emb = net_.forward(to_batch(images), Mode::train, &rng);
    const std::size_t D = emb.dim(1);
    StepStats stats;
    stats.pairs = B;
    if (grad_out) *grad_out = Tensor(emb.shape());
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t i = 0; i < B; ++i) {
      std::span<const float> e1(emb.data() + i * D, D), e2(emb.data() + (B + i) * D, D);
      const bool same = pairs[i].same_label;
      stats.loss_sum += contrastive_loss(e1, e2, same, config_.margin);
      const double d = l2_distance(e1, e2);
      if (same) {
        stats.same_dist_sum += d;
        ++stats.same_count;
      } else {
        stats.diff_dist_sum += d;
        ++stats.diff_count;
      }
      if (grad_out) {
        const PairGradient g = contrastive_loss_grad(e1, e2, same, config_.margin);
        for (std::size_t k = 0; k < D; ++k) {
          (*grad_out)[i * D + k] = static_cast<float>(g.first[k] * inv_b);
          (*grad_out)[(B + i) * D + k] = static_cast<float>(g.second[k] * inv_b);
        }
      }
    }
    return stats;
  }

  Network& net_;
  TrainConfig config_;
  AdamState<float> adam_;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Trains a freshly built network (init seed = config.seed) on pairs drawn
/// from `dataset`. Pairs are resampled every epoch from a stream derived from
/// (seed, epoch); dropout masks come from a stream derived from (seed, epoch, step).
inline std::pair<Network, TrainHistory> train(const Dataset& dataset, const NetworkSpec& spec, const TrainConfig& config,
                                              const EpochCallback& on_epoch = {}) {
  config.validate();
  Network net = build_network(spec, config.seed);
  SiameseTrainer trainer(net, config);
  TrainHistory history;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng pair_rng(derive_seed(config.seed, {0x9a1e, epoch}));
    const std::vector<ImagePair> pairs = sample_pairs(dataset, config.pairs_per_epoch, config.same_pair_fraction, pair_rng);
    StepStats total;
    std::size_t step = 0;
    for (std::size_t begin = 0; begin < pairs.size(); begin += config.batch_size, ++step) {
      const std::size_t end = std::min(pairs.size(), begin + config.batch_size);
      Rng dropout_rng(derive_seed(config.seed, {0xd0, epoch, step}));
      const StepStats s = trainer.step(dataset, std::span(pairs).subspan(begin, end - begin), dropout_rng);
      total.loss_sum += s.loss_sum;
      total.same_dist_sum += s.same_dist_sum;
      total.diff_dist_sum += s.diff_dist_sum;
      total.same_count += s.same_count;
      total.diff_count += s.diff_count;
      total.pairs += s.pairs;
    }
    EpochStats e;
    e.epoch = epoch;
    e.mean_loss = total.loss_sum / static_cast<double>(total.pairs);
    e.mean_same_dist = total.same_count ? total.same_dist_sum / static_cast<double>(total.same_count) : 0.0;
    e.mean_diff_dist = total.diff_count ? total.diff_dist_sum / static_cast<double>(total.diff_count) : 0.0;
    history.epochs.push_back(e);
    if (on_epoch) on_epoch(e);
  }
  return {std::move(net), std::move(history)};
}

}  // namespace scnn
