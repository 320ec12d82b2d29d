#pragma once

// Top-k cosine retrieval over embedding banks: exhaustive scan, IVF
// (spherical k-means coarse quantizer) and recall evaluation.
//
// Hit lists are ordered by score descending, ties by ascending id. Scores are
// the double-accumulated dot product rounded to f32, so the ranking is a pure
// function of the stored vectors and is identical for every search path.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "retroclass/embank.hpp"

namespace retroclass {

struct RetrievalHit {
  std::int64_t id = 0;
  float score = 0.0f;

  bool operator==(const RetrievalHit&) const = default;
};

// Strict total order used for every hit list.
inline bool ranks_before(const RetrievalHit& a, const RetrievalHit& b) noexcept {
  return a.score > b.score || (a.score == b.score && a.id < b.id);
}

// Tags are "<space>-<modality>" ("vlm-text", "vlm-image"); two tags are
// searchable against each other when their space parts agree.
std::string_view space_of(std::string_view space_tag) noexcept;
bool spaces_compatible(std::string_view a, std::string_view b) noexcept;

struct QueryEmbedding {
  std::vector<float> vector;
  std::string space_tag;

  // L2-normalizes `raw`; throws ZeroVector below the 1e-8 norm threshold.
  static QueryEmbedding normalized(std::span<const float> raw,
                                   std::string space_tag);
  // Row `i` of a bank (already unit-norm), tagged with the bank's space.
  static QueryEmbedding from_bank_row(const EmbeddingBank& bank, std::size_t i);
};

std::vector<RetrievalHit> exact_topk(const QueryEmbedding& query,
                                     const EmbeddingBank& bank, std::size_t k,
                                     int threads = 1);

// Same contract as exact_topk, reading the bank file in chunks.
std::vector<RetrievalHit> exact_topk(const QueryEmbedding& query,
                                     BankReader& reader, std::size_t k,
                                     std::size_t chunk_rows = 65536);

inline constexpr std::array<char, 8> kIvfMagic = {'R', 'T', 'R', 'C',
                                                  'I', 'V', 'F', '1'};
inline constexpr std::uint32_t kIvfVersion = 1;

struct IvfBuildOptions {
  std::size_t n_clusters = 0;
  std::uint64_t seed = 0;
  std::size_t max_iters = 25;
  // Rows used for k-means training; 0 trains on the whole bank. All rows are
  // assigned to lists either way.
  std::size_t train_size = 0;
  int threads = 1;
};

class IvfIndex {
 public:
  const EmbeddingBank& bank() const noexcept { return bank_; }
  std::size_t n_clusters() const noexcept { return lists_.size(); }
  std::size_t dim() const noexcept { return bank_.dim(); }
  std::uint64_t seed() const noexcept { return seed_; }

  std::span<const float> centroid(std::size_t c) const noexcept {
    return {centroids_.data() + c * dim(), dim()};
  }
  std::span<const float> centroids() const noexcept { return centroids_; }
  std::span<const std::int64_t> list(std::size_t c) const noexcept {
    return lists_[c];
  }

  bool operator==(const IvfIndex& other) const {
    return bank_.same_storage(other.bank_) && seed_ == other.seed_ &&
           centroids_ == other.centroids_ && lists_ == other.lists_;
  }

 private:
  friend IvfIndex build_ivf(const EmbeddingBank&, const IvfBuildOptions&);
  friend IvfIndex load_ivf(const std::filesystem::path&, const EmbeddingBank&);

  EmbeddingBank bank_;
  std::uint64_t seed_ = 0;
  std::vector<float> centroids_;
  std::vector<std::vector<std::int64_t>> lists_;
};

IvfIndex build_ivf(const EmbeddingBank& bank, const IvfBuildOptions& options);

std::vector<RetrievalHit> ivf_search(const IvfIndex& index,
                                     const QueryEmbedding& query, std::size_t k,
                                     std::size_t nprobe);

// Layout: "RTRCIVF1" | u32 version | u32 n_clusters | u32 dim | u64 seed |
// centroids (f32) | per cluster: u64 length, u64 ids.
void save_ivf(const IvfIndex& index, const std::filesystem::path& path);
// Validates the file against `bank`: dimension and an exact partition of ids.
IvfIndex load_ivf(const std::filesystem::path& path, const EmbeddingBank& bank);

// |approx ids ∩ exact ids| / |exact ids|.
double recall_at_k(std::span<const RetrievalHit> approx,
                   std::span<const RetrievalHit> exact);

// A bank plus an optional IVF index: the search strategy used by the
// enrichment and evaluation layers.
class Retriever {
 public:
  explicit Retriever(EmbeddingBank bank) : bank_(std::move(bank)) {}
  Retriever(IvfIndex index, std::size_t nprobe);

  const EmbeddingBank& bank() const noexcept { return bank_; }
  bool uses_ivf() const noexcept { return index_.has_value(); }
  std::size_t nprobe() const noexcept { return nprobe_; }

  std::vector<RetrievalHit> search(const QueryEmbedding& query,
                                   std::size_t k) const;

 private:
  EmbeddingBank bank_;
  std::optional<IvfIndex> index_;
  std::size_t nprobe_ = 0;
};

// Element-wise equal to per-query search, in input order. Errors carry the
// failing query's index.
std::vector<std::vector<RetrievalHit>> batch_topk(
    std::span<const QueryEmbedding> queries, const Retriever& retriever,
    std::size_t k, int threads = 1);

}  // namespace retroclass
