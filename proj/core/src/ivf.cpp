#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "retroclass/error.hpp"
#include "retroclass/kernels.hpp"
#include "retroclass/parallel.hpp"
#include "retroclass/vindex.hpp"
#include "topk.hpp"

namespace retroclass {

namespace {

using Assignment = std::vector<std::uint32_t>;

// Spherical k-means state over a subset of bank rows.
class SphericalKMeans {
 public:
  SphericalKMeans(const EmbeddingBank& bank, std::vector<std::int64_t> rows,
                  std::size_t n_clusters, int threads)
      : bank_(bank),
        rows_(std::move(rows)),
        n_clusters_(n_clusters),
        dim_(bank.dim()),
        threads_(threads),
        centroids_(n_clusters * dim_) {}

  std::span<const float> centroid(std::size_t c) const {
    return {centroids_.data() + c * dim_, dim_};
  }
  std::vector<float>& centroids() { return centroids_; }

  // k-means++ seeding with squared chordal distance 2 - 2cos.
  void seed_plus_plus(std::mt19937_64& rng) {
    const std::size_t m = rows_.size();
    std::vector<double> d2(m, std::numeric_limits<double>::infinity());
    std::size_t pick = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
    for (std::size_t c = 0; c < n_clusters_; ++c) {
      set_centroid(c, bank_.row(rows_[pick]));
      if (c + 1 == n_clusters_) break;
      const auto cen = centroid(c);
      parallel_for(m, threads_, [&](std::size_t i) {
        const double d = std::max(
            0.0, 2.0 - 2.0 * static_cast<double>(dot_f32(bank_.row(rows_[i]), cen)));
        d2[i] = std::min(d2[i], d);
      });
      double total = 0.0;
      for (double v : d2) total += v;
      if (!(total > 0.0)) {
        pick = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
        continue;
      }
      const double target =
          std::uniform_real_distribution<double>(0.0, total)(rng);
      double running = 0.0;
      pick = m - 1;
      for (std::size_t i = 0; i < m; ++i) {
        running += d2[i];
        if (running > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
  }

  // Nearest centroid (max cosine, ties to the lower cluster) for each row.
  // Returns how many rows changed cluster.
  std::size_t assign(std::span<const std::int64_t> rows, Assignment& out) const {
    std::vector<std::uint8_t> changed(rows.size(), 0);
    parallel_for(rows.size(), threads_, [&](std::size_t i) {
      const auto r = bank_.row(rows[i]);
      std::uint32_t best = 0;
      float best_score = dot_f32(r, centroid(0));
      for (std::size_t c = 1; c < n_clusters_; ++c) {
        const float s = dot_f32(r, centroid(c));
        if (s > best_score) {
          best_score = s;
          best = static_cast<std::uint32_t>(c);
        }
      }
      changed[i] = out[i] != best;
      out[i] = best;
    });
    return static_cast<std::size_t>(std::count(changed.begin(), changed.end(), 1));
  }

  // Empty clusters take the member of the largest cluster that is farthest
  // from that cluster's centroid, and are re-centred on it.
  bool repair_empty(std::span<const std::int64_t> rows, Assignment& assignment) {
    std::vector<std::size_t> sizes(n_clusters_, 0);
    for (auto a : assignment) ++sizes[a];
    bool repaired = false;
    for (std::size_t c = 0; c < n_clusters_; ++c) {
      if (sizes[c] != 0) continue;
      const std::size_t donor = static_cast<std::size_t>(
          std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
      if (sizes[donor] < 2) break;
      std::size_t far = rows.size();
      float far_score = std::numeric_limits<float>::infinity();
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (assignment[i] != donor) continue;
        const float s = dot_f32(bank_.row(rows[i]), centroid(donor));
        if (s < far_score) {
          far_score = s;
          far = i;
        }
      }
      assignment[far] = static_cast<std::uint32_t>(c);
      --sizes[donor];
      ++sizes[c];
      set_centroid(c, bank_.row(rows[far]));
      repaired = true;
    }
    return repaired;
  }

  // Normalized mean of each cluster's members, accumulated in row order.
  void update(const Assignment& assignment) {
    std::vector<double> sums(n_clusters_ * dim_, 0.0);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const auto r = bank_.row(rows_[i]);
      double* s = sums.data() + assignment[i] * dim_;
      for (std::size_t j = 0; j < dim_; ++j) s[j] += r[j];
    }
    for (std::size_t c = 0; c < n_clusters_; ++c) {
      const double* s = sums.data() + c * dim_;
      double norm = 0.0;
      for (std::size_t j = 0; j < dim_; ++j) norm += s[j] * s[j];
      norm = std::sqrt(norm);
      if (norm <= kZeroNormThreshold) continue;  // keep previous centroid
      float* out = centroids_.data() + c * dim_;
      for (std::size_t j = 0; j < dim_; ++j) {
        out[j] = static_cast<float>(s[j] / norm);
      }
    }
  }

  const std::vector<std::int64_t>& rows() const { return rows_; }

 private:
  void set_centroid(std::size_t c, std::span<const float> v) {
    std::copy(v.begin(), v.end(), centroids_.begin() + c * dim_);
  }

  const EmbeddingBank& bank_;
  std::vector<std::int64_t> rows_;
  std::size_t n_clusters_;
  std::size_t dim_;
  int threads_;
  std::vector<float> centroids_;
};

std::vector<std::int64_t> training_rows(std::size_t count, std::size_t wanted,
                                        std::mt19937_64& rng) {
  std::vector<std::int64_t> ids(count);
  std::iota(ids.begin(), ids.end(), 0);
  if (wanted == 0 || wanted >= count) return ids;
  for (std::size_t i = 0; i < wanted; ++i) {
    const std::size_t j =
        std::uniform_int_distribution<std::size_t>(i, count - 1)(rng);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(wanted);
  std::sort(ids.begin(), ids.end());
  return ids;
}

template <class T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T take(std::istream& in, std::uint64_t& offset, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw Error(ErrorCode::kCorruptIndex, std::string("truncated ") + what,
                offset);
  }
  offset += sizeof(T);
  return value;
}

}  // namespace

IvfIndex build_ivf(const EmbeddingBank& bank, const IvfBuildOptions& options) {
  const std::size_t n = options.n_clusters;
  if (n == 0) throw Error(ErrorCode::kInvalidClusters, "n_clusters must be >= 1");
  if (bank.empty()) throw Error(ErrorCode::kEmptyBank, "bank has no rows");
  if (n > bank.count()) {
    throw Error(ErrorCode::kTooManyClusters,
                std::to_string(n) + " clusters for " +
                    std::to_string(bank.count()) + " rows");
  }
  if (options.max_iters == 0) {
    throw Error(ErrorCode::kInvalidConfig, "max_iters must be >= 1");
  }

  std::mt19937_64 rng(options.seed);
  const std::size_t train =
      options.train_size == 0 ? 0 : std::max(options.train_size, n);
  SphericalKMeans km(bank, training_rows(bank.count(), train, rng), n,
                     options.threads);
  km.seed_plus_plus(rng);

  const auto& rows = km.rows();
  Assignment assignment(rows.size(), std::numeric_limits<std::uint32_t>::max());
  for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
    const std::size_t changed = km.assign(rows, assignment);
    const bool repaired = km.repair_empty(rows, assignment);
    if (iter > 0 && changed == 0 && !repaired) break;
    km.update(assignment);
  }

  std::vector<std::int64_t> all(bank.count());
  std::iota(all.begin(), all.end(), 0);
  Assignment final_assignment(all.size(), std::numeric_limits<std::uint32_t>::max());
  km.assign(all, final_assignment);
  km.repair_empty(all, final_assignment);

  IvfIndex index;
  index.bank_ = bank;
  index.seed_ = options.seed;
  index.centroids_ = std::move(km.centroids());
  index.lists_.assign(n, {});
  for (std::size_t i = 0; i < all.size(); ++i) {
    index.lists_[final_assignment[i]].push_back(all[i]);
  }
  return index;
}

std::vector<RetrievalHit> ivf_search(const IvfIndex& index,
                                     const QueryEmbedding& query, std::size_t k,
                                     std::size_t nprobe) {
  if (k == 0) throw Error(ErrorCode::kInvalidK, "k must be >= 1");
  if (nprobe == 0 || nprobe > index.n_clusters()) {
    throw Error(ErrorCode::kInvalidProbe,
                "nprobe " + std::to_string(nprobe) + " not in [1, " +
                    std::to_string(index.n_clusters()) + "]");
  }
  const auto& bank = index.bank();
  if (query.vector.size() != bank.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "query dim != index dim");
  }
  if (!spaces_compatible(query.space_tag, bank.space_tag())) {
    throw Error(ErrorCode::kSpaceMismatch,
                "query space '" + query.space_tag + "' cannot search bank '" +
                    bank.space_tag() + "'");
  }
  detail::check_unit_query(query.vector);

  const std::span<const float> q = query.vector;
  std::vector<std::pair<float, std::uint32_t>> coarse(index.n_clusters());
  for (std::size_t c = 0; c < coarse.size(); ++c) {
    coarse[c] = {dot_f32(q, index.centroid(c)), static_cast<std::uint32_t>(c)};
  }
  std::partial_sort(coarse.begin(), coarse.begin() + nprobe, coarse.end(),
                    [](const auto& a, const auto& b) {
                      return a.first > b.first ||
                             (a.first == b.first && a.second < b.second);
                    });

  detail::TopKCollector collector(
      k, q, detail::screening_margin(bank.dim(), l2_norm(q)));
  for (std::size_t p = 0; p < nprobe; ++p) {
    for (auto id : index.list(coarse[p].second)) {
      const auto r = bank.row(static_cast<std::size_t>(id));
      collector.offer(id, dot_f32(q, r), r);
    }
  }
  return std::move(collector).take();
}

void save_ivf(const IvfIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  out.write(kIvfMagic.data(), kIvfMagic.size());
  put<std::uint32_t>(out, kIvfVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(index.n_clusters()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(index.dim()));
  put<std::uint64_t>(out, index.seed());
  const auto cents = index.centroids();
  out.write(reinterpret_cast<const char*>(cents.data()),
            static_cast<std::streamsize>(cents.size_bytes()));
  for (std::size_t c = 0; c < index.n_clusters(); ++c) {
    const auto list = index.list(c);
    put<std::uint64_t>(out, list.size());
    out.write(reinterpret_cast<const char*>(list.data()),
              static_cast<std::streamsize>(list.size_bytes()));
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for '" + path.string() + "'");
}

IvfIndex load_ivf(const std::filesystem::path& path, const EmbeddingBank& bank) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");

  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 8 || magic != kIvfMagic) {
    throw Error(ErrorCode::kCorruptIndex, "bad magic", 0);
  }
  std::uint64_t offset = 8;
  const auto version = take<std::uint32_t>(in, offset, "version");
  if (version != kIvfVersion) {
    throw Error(ErrorCode::kCorruptIndex,
                "unsupported version " + std::to_string(version), 8);
  }
  const auto n_clusters = take<std::uint32_t>(in, offset, "n_clusters");
  const std::uint64_t dim_at = offset;
  const auto dim = take<std::uint32_t>(in, offset, "dim");
  const auto seed = take<std::uint64_t>(in, offset, "seed");
  if (n_clusters == 0) {
    throw Error(ErrorCode::kCorruptIndex, "n_clusters is 0", 12);
  }
  if (dim != bank.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "index dim " + std::to_string(dim) + " != bank dim " +
                    std::to_string(bank.dim()),
                dim_at);
  }

  IvfIndex index;
  index.bank_ = bank;
  index.seed_ = seed;
  index.centroids_.resize(static_cast<std::size_t>(n_clusters) * dim);
  const auto cent_bytes =
      static_cast<std::streamsize>(index.centroids_.size() * sizeof(float));
  in.read(reinterpret_cast<char*>(index.centroids_.data()), cent_bytes);
  if (in.gcount() != cent_bytes) {
    throw Error(ErrorCode::kCorruptIndex, "truncated centroids", offset);
  }
  offset += static_cast<std::uint64_t>(cent_bytes);

  std::vector<std::uint8_t> seen(bank.count(), 0);
  std::size_t total = 0;
  index.lists_.resize(n_clusters);
  for (std::uint32_t c = 0; c < n_clusters; ++c) {
    const auto len = take<std::uint64_t>(in, offset, "list length");
    if (len > bank.count() - total) {
      throw Error(ErrorCode::kCorruptIndex, "list length exceeds bank rows",
                  offset - 8);
    }
    auto& list = index.lists_[c];
    list.resize(static_cast<std::size_t>(len));
    const auto bytes = static_cast<std::streamsize>(len * sizeof(std::int64_t));
    in.read(reinterpret_cast<char*>(list.data()), bytes);
    if (in.gcount() != bytes) {
      throw Error(ErrorCode::kCorruptIndex, "truncated id list", offset);
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto id = list[i];
      if (id < 0 || static_cast<std::size_t>(id) >= bank.count() || seen[id]) {
        throw Error(ErrorCode::kCorruptIndex,
                    "id " + std::to_string(id) + " out of range or repeated",
                    offset + i * sizeof(std::int64_t));
      }
      seen[id] = 1;
    }
    offset += static_cast<std::uint64_t>(bytes);
    total += list.size();
  }
  if (total != bank.count()) {
    throw Error(ErrorCode::kCorruptIndex,
                "lists cover " + std::to_string(total) + " of " +
                    std::to_string(bank.count()) + " ids",
                offset);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::kCorruptIndex, "trailing bytes", offset);
  }
  return index;
}

}  // namespace retroclass
