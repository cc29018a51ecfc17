#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <vector>

#include "scnn/image.hpp"
#include "scnn/random.hpp"

namespace scnn {

/// Binary pair supervision: indices into a dataset plus the same-label flag
/// (true <=> L = 0).
struct ImagePair {
  std::size_t first = 0;
  std::size_t second = 0;
  bool same_label = false;

  friend bool operator==(const ImagePair&, const ImagePair&) = default;
};

/// Draws exactly round(count * same_fraction) same-label pairs and the rest
/// different-label pairs, then shuffles them. Same pairs pick a class
/// uniformly among classes with two or more members; different pairs pick an
/// unordered class pair uniformly. Items with unknown labels are ignored.
inline std::vector<ImagePair> sample_pairs(const Dataset& dataset, std::size_t count, double same_fraction, Rng& rng) {
  static constexpr const char* kModule = "siamese-training";
  if (!(same_fraction >= 0.0 && same_fraction <= 1.0)) {
    detail::fail(ErrorCategory::range, kModule, "same_fraction must be in [0,1], got ", same_fraction);
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (dataset[i].label != kUnknownLabel) by_class[dataset[i].label].push_back(i);

  std::vector<const std::vector<std::size_t>*> classes, multi;
  for (const auto& [label, members] : by_class) {
    classes.push_back(&members);
    if (members.size() >= 2) multi.push_back(&members);
  }

  const auto n_same = static_cast<std::size_t>(std::llround(static_cast<double>(count) * same_fraction));
  const std::size_t n_diff = count - n_same;
  if (n_same > 0 && multi.empty()) {
    detail::fail(ErrorCategory::data, kModule, "same-label pairs requested but no class has two members");
  }
  if (n_diff > 0 && classes.size() < 2) {
    detail::fail(ErrorCategory::data, kModule, "different-label pairs requested but the dataset has ", classes.size(),
                 " labeled class(es)");
  }

  std::vector<ImagePair> pairs;
  pairs.reserve(count);
  for (std::size_t k = 0; k < n_same; ++k) {
    const auto& members = *multi[rng.below(multi.size())];
    const std::size_t a = rng.below(members.size());
    std::size_t b = rng.below(members.size() - 1);
    if (b >= a) ++b;
    pairs.push_back({members[a], members[b], true});
  }
  for (std::size_t k = 0; k < n_diff; ++k) {
    const std::size_t ca = rng.below(classes.size());
    std::size_t cb = rng.below(classes.size() - 1);
    if (cb >= ca) ++cb;
    const auto& ma = *classes[ca];
    const auto& mb = *classes[cb];
    pairs.push_back({ma[rng.below(ma.size())], mb[rng.below(mb.size())], false});
  }
  rng.shuffle(pairs);
  return pairs;
}

}  // namespace scnn
