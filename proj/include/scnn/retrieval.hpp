#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "scnn/binary_io.hpp"
#include "scnn/image.hpp"
#include "scnn/network.hpp"

namespace scnn {

struct EmbeddingEntry {
  std::string id;
  int label = kUnknownLabel;
  std::vector<float> vector;

  friend bool operator==(const EmbeddingEntry&, const EmbeddingEntry&) = default;
};

/// Infer-mode embeddings of every item, in dataset order.
inline std::vector<EmbeddingEntry> embed_dataset(const Network& net, const Dataset& dataset, std::size_t batch_size = 64) {
  std::vector<EmbeddingEntry> out;
  out.reserve(dataset.size());
  const Shape& in = net.spec().input_shape;
  for (std::size_t begin = 0; begin < dataset.size(); begin += batch_size) {
    const std::size_t end = std::min(dataset.size(), begin + batch_size);
    std::vector<const RawImage*> images;
    for (std::size_t i = begin; i < end; ++i) {
      const RawImage& img = dataset[i].image;
      if (img.height != in[1] || img.width != in[2]) {
        detail::fail(ErrorCategory::shape, "retrieval", "image '", dataset[i].id, "' is ", img.height, "x", img.width,
                     " but the network expects ", in[1], "x", in[2]);
      }
      images.push_back(&img);
    }
    const Tensor emb = net.infer(to_batch(images));
    const std::size_t D = emb.dim(1);
    for (std::size_t i = begin; i < end; ++i) {
      const float* row = emb.data() + (i - begin) * D;
      out.push_back({dataset[i].id, dataset[i].label, std::vector<float>(row, row + D)});
    }
  }
  return out;
}

struct Neighbor {
  std::string id;
  int label = kUnknownLabel;
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

using RetrievalResult = std::vector<Neighbor>;

/// Immutable table of embeddings supporting exact Euclidean k-NN.
class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;

  static EmbeddingIndex build(std::vector<EmbeddingEntry> entries) {
    EmbeddingIndex idx;
    if (!entries.empty()) idx.dim_ = entries.front().vector.size();
    if (!entries.empty() && idx.dim_ == 0) detail::fail(ErrorCategory::shape, "retrieval", "embedding dimension must be positive");
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].vector.size() != idx.dim_) {
        detail::fail(ErrorCategory::shape, "retrieval", "entry '", entries[i].id, "' has dimension ",
                     entries[i].vector.size(), ", expected ", idx.dim_);
      }
      if (!idx.by_id_.emplace(entries[i].id, i).second) {
        detail::fail(ErrorCategory::data, "retrieval", "duplicate id '", entries[i].id, "'");
      }
    }
    idx.entries_ = std::move(entries);
    return idx;
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<EmbeddingEntry>& entries() const noexcept { return entries_; }

  const EmbeddingEntry* find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &entries_[it->second];
  }

 private:
  std::size_t dim_ = 0;
  std::vector<EmbeddingEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// The k nearest entries by Euclidean distance, ascending, ties broken by
/// ascending id. `exclude_id` drops that entry from the candidate pool.
inline RetrievalResult query_knn(const EmbeddingIndex& index, std::span<const float> query, std::size_t k,
                                 std::optional<std::string_view> exclude_id = std::nullopt) {
  if (k == 0) detail::fail(ErrorCategory::range, "retrieval", "k must be >= 1");
  if (index.empty()) return {};
  if (query.size() != index.dim()) {
    detail::fail(ErrorCategory::shape, "retrieval", "query dimension ", query.size(), " does not match index dimension ",
                 index.dim());
  }
  struct Candidate {
    double distance;
    const EmbeddingEntry* entry;
  };
  std::vector<Candidate> cands;
  cands.reserve(index.size());
  for (const auto& e : index.entries()) {
    if (exclude_id && e.id == *exclude_id) continue;
    cands.push_back({l2_distance(query, std::span<const float>(e.vector)), &e});
  }
  auto less = [](const Candidate& a, const Candidate& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.entry->id < b.entry->id;
  };
  const std::size_t take = std::min(k, cands.size());
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take), cands.end(), less);
  RetrievalResult out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back({cands[i].entry->id, cands[i].entry->label, cands[i].distance});
  return out;
}

// "SEMB" | version u32 | dim u32 | count u64 | per entry: id-length u32, UTF-8 id, label i32, dim f32
inline constexpr std::uint32_t kEmbeddingFileVersion = 1;

inline std::vector<unsigned char> serialize_embeddings(const std::vector<EmbeddingEntry>& entries) {
  detail::ByteWriter w;
  w.put_bytes("SEMB", 4);
  w.put(kEmbeddingFileVersion);
  const std::size_t dim = entries.empty() ? 0 : entries.front().vector.size();
  w.put(static_cast<std::uint32_t>(dim));
  w.put(static_cast<std::uint64_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.vector.size() != dim) detail::fail(ErrorCategory::shape, "retrieval", "entry '", e.id, "' has inconsistent dimension");
    w.put_string(e.id);
    w.put(static_cast<std::int32_t>(e.label));
    for (float v : e.vector) w.put(v);
  }
  return w.bytes();
}

inline std::vector<EmbeddingEntry> deserialize_embeddings(std::vector<unsigned char> bytes,
                                                          const std::string& source = "<memory>") {
  detail::ByteReader r(std::move(bytes), "retrieval", source);
  if (r.get_raw(4) != "SEMB") r.corrupt("bad magic, not an embedding file");
  const auto version = r.get<std::uint32_t>();
  if (version != kEmbeddingFileVersion) r.corrupt("unsupported embedding file version " + std::to_string(version));
  const auto dim = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  if (count > r.remaining()) r.corrupt("entry count exceeds file size");
  std::vector<EmbeddingEntry> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    EmbeddingEntry e;
    e.id = r.get_string();
    e.label = r.get<std::int32_t>();
    e.vector.resize(dim);
    for (auto& v : e.vector) v = r.get<float>();
    out.push_back(std::move(e));
  }
  if (!r.at_end()) r.corrupt("trailing bytes after entries");
  return out;
}

inline void save_embeddings(const std::vector<EmbeddingEntry>& entries, const std::string& path) {
  detail::write_file_bytes(path, serialize_embeddings(entries), "retrieval");
}

inline std::vector<EmbeddingEntry> load_embeddings(const std::string& path) {
  return deserialize_embeddings(detail::read_file_bytes(path, "retrieval"), path);
}

}  // namespace scnn
