#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "retroclass/error.hpp"
#include "retroclass/kernels.hpp"
#include "retroclass/parallel.hpp"
#include "retroclass/vindex.hpp"
#include "topk.hpp"

namespace retroclass {

namespace {

constexpr std::size_t kBlockRows = 256;

void check_query(const QueryEmbedding& query, std::size_t dim,
                 std::string_view bank_tag, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidK, "k must be >= 1");
  if (query.vector.size() != dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "query dim " + std::to_string(query.vector.size()) +
                    " != bank dim " + std::to_string(dim));
  }
  if (!spaces_compatible(query.space_tag, bank_tag)) {
    throw Error(ErrorCode::kSpaceMismatch,
                "query space '" + query.space_tag + "' cannot search bank '" +
                    std::string(bank_tag) + "'");
  }
  detail::check_unit_query(query.vector);
}

void scan_rows(const EmbeddingBank& bank, std::size_t begin, std::size_t end,
               detail::TopKCollector& collector, std::span<const float> q) {
  float scores[kBlockRows];
  for (std::size_t b = begin; b < end; b += kBlockRows) {
    const std::size_t n = std::min(kBlockRows, end - b);
    for (std::size_t i = 0; i < n; ++i) scores[i] = dot_f32(q, bank.row(b + i));
    for (std::size_t i = 0; i < n; ++i) {
      collector.offer(static_cast<std::int64_t>(b + i), scores[i],
                      bank.row(b + i));
    }
  }
}

}  // namespace

std::string_view space_of(std::string_view space_tag) noexcept {
  const auto dash = space_tag.rfind('-');
  return dash == std::string_view::npos ? space_tag : space_tag.substr(0, dash);
}

bool spaces_compatible(std::string_view a, std::string_view b) noexcept {
  return space_of(a) == space_of(b);
}

QueryEmbedding QueryEmbedding::normalized(std::span<const float> raw,
                                          std::string space_tag) {
  if (raw.empty()) throw Error(ErrorCode::kInvalidDimension, "empty query");
  const double norm = l2_norm(raw);
  if (!std::isfinite(norm)) {
    throw Error(ErrorCode::kInvalidRecord, "query has non-finite components");
  }
  if (norm <= kZeroNormThreshold) {
    throw Error(ErrorCode::kZeroVector, "query norm below 1e-8");
  }
  QueryEmbedding q;
  q.vector.reserve(raw.size());
  for (float x : raw) q.vector.push_back(static_cast<float>(x / norm));
  q.space_tag = std::move(space_tag);
  return q;
}

QueryEmbedding QueryEmbedding::from_bank_row(const EmbeddingBank& bank,
                                             std::size_t i) {
  if (i >= bank.count()) {
    throw Error(ErrorCode::kIdOutOfRange, "row " + std::to_string(i));
  }
  const auto r = bank.row(i);
  return {std::vector<float>(r.begin(), r.end()), bank.space_tag()};
}

std::vector<RetrievalHit> exact_topk(const QueryEmbedding& query,
                                     const EmbeddingBank& bank, std::size_t k,
                                     int threads) {
  check_query(query, bank.dim(), bank.space_tag(), k);
  if (bank.empty()) throw Error(ErrorCode::kEmptyBank, "bank has no rows");

  const std::span<const float> q = query.vector;
  const double margin = detail::screening_margin(bank.dim(), l2_norm(q));
  const std::size_t count = bank.count();
  const std::size_t workers = std::min<std::size_t>(
      resolve_threads(threads), std::max<std::size_t>(1, count / 4096));

  if (workers <= 1) {
    detail::TopKCollector collector(k, q, margin);
    scan_rows(bank, 0, count, collector, q);
    return std::move(collector).take();
  }

  // Each slice keeps a superset of its share of the global top-k; merging
  // under the total order gives the single-threaded answer.
  std::vector<std::vector<RetrievalHit>> partial(workers);
  const std::size_t slice = (count + workers - 1) / workers;
  parallel_for(workers, static_cast<int>(workers), [&](std::size_t w) {
    const std::size_t begin = w * slice;
    const std::size_t end = std::min(count, begin + slice);
    detail::TopKCollector collector(k, q, margin);
    scan_rows(bank, begin, end, collector, q);
    partial[w] = std::move(collector).take();
  });
  std::vector<RetrievalHit> merged;
  for (auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
  return detail::TopKCollector::finalize(std::move(merged), k);
}

std::vector<RetrievalHit> exact_topk(const QueryEmbedding& query,
                                     BankReader& reader, std::size_t k,
                                     std::size_t chunk_rows) {
  const auto& h = reader.header();
  check_query(query, h.dim, h.space_tag, k);
  if (h.count == 0) throw Error(ErrorCode::kEmptyBank, "bank has no rows");
  if (reader.next_row() != 0) {
    throw Error(ErrorCode::kInvalidConfig, "reader already advanced");
  }

  const std::span<const float> q = query.vector;
  detail::TopKCollector collector(k, q,
                                  detail::screening_margin(h.dim, l2_norm(q)));
  chunk_rows = std::max<std::size_t>(chunk_rows, 1);
  std::vector<float> buffer(chunk_rows * h.dim);
  while (true) {
    const std::uint64_t first = reader.next_row();
    const std::size_t rows = reader.read_rows(buffer);
    if (rows == 0) break;
    for (std::size_t i = 0; i < rows; ++i) {
      std::span<const float> r(buffer.data() + i * h.dim, h.dim);
      collector.offer(static_cast<std::int64_t>(first + i), dot_f32(q, r), r);
    }
  }
  return std::move(collector).take();
}

double recall_at_k(std::span<const RetrievalHit> approx,
                   std::span<const RetrievalHit> exact) {
  if (exact.empty()) {
    throw Error(ErrorCode::kEmptyBaseline, "exact hit list is empty");
  }
  std::unordered_set<std::int64_t> truth;
  for (const auto& h : exact) truth.insert(h.id);
  std::unordered_set<std::int64_t> seen;
  std::size_t shared = 0;
  for (const auto& h : approx) {
    if (truth.contains(h.id) && seen.insert(h.id).second) ++shared;
  }
  return static_cast<double>(shared) / static_cast<double>(truth.size());
}

Retriever::Retriever(IvfIndex index, std::size_t nprobe)
    : bank_(index.bank()), index_(std::move(index)), nprobe_(nprobe) {
  if (nprobe_ == 0 || nprobe_ > index_->n_clusters()) {
    throw Error(ErrorCode::kInvalidProbe,
                "nprobe must be in [1, " +
                    std::to_string(index_->n_clusters()) + "]");
  }
}

std::vector<RetrievalHit> Retriever::search(const QueryEmbedding& query,
                                            std::size_t k) const {
  if (index_) return ivf_search(*index_, query, k, nprobe_);
  return exact_topk(query, bank_, k);
}

std::vector<std::vector<RetrievalHit>> batch_topk(
    std::span<const QueryEmbedding> queries, const Retriever& retriever,
    std::size_t k, int threads) {
  std::vector<std::vector<RetrievalHit>> out(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    try {
      out[i] = retriever.search(queries[i], k);
    } catch (const Error& e) {
      throw e.with_context("query " + std::to_string(i));
    }
  });
  return out;
}

}  // namespace retroclass
