#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "retroclass/embank.hpp"
#include "retroclass/error.hpp"
#include "retroclass/kernels.hpp"
#include "retroclass/vindex.hpp"

namespace retroclass::detail {

inline void check_unit_query(std::span<const float> q) {
  const double norm = l2_norm(q);
  if (!(std::abs(norm - 1.0) <= kUnitNormTolerance)) {
    throw Error(ErrorCode::kNotNormalized,
                "query norm " + std::to_string(norm) + " is not within " +
                    std::to_string(kUnitNormTolerance) + " of 1");
  }
}

// Top-k selection in two stages. Rows are screened with their fast f32 score;
// anything within `margin` of the running k-th best f32 score is rescored
// with dot_f64 and kept as a candidate. `margin` must be at least twice the
// f32 error bound, which guarantees the true top-k survives screening.
class TopKCollector {
 public:
  TopKCollector(std::size_t k, std::span<const float> query, double margin)
      : k_(k), query_(query), margin_(margin) {}

  double floor() const noexcept {
    return best_.size() < k_ ? -std::numeric_limits<double>::infinity()
                             : static_cast<double>(best_.top()) - margin_;
  }

  void offer(std::int64_t id, float approx, std::span<const float> row) {
    if (static_cast<double>(approx) < floor()) return;
    if (best_.size() < k_) {
      best_.push(approx);
    } else if (approx > best_.top()) {
      best_.pop();
      best_.push(approx);
    }
    candidates_.push_back(
        {{id, static_cast<float>(dot_f64(query_, row))}, approx});
    if (candidates_.size() > 4 * k_ + 1024) prune();
  }

  // Consumes the collector; returns up to k hits in ranking order.
  std::vector<RetrievalHit> take() && {
    prune();
    std::vector<RetrievalHit> hits;
    hits.reserve(candidates_.size());
    for (const auto& c : candidates_) hits.push_back(c.hit);
    return finalize(std::move(hits), k_);
  }

  // Sorts by the hit total order and truncates to k.
  static std::vector<RetrievalHit> finalize(std::vector<RetrievalHit> hits,
                                            std::size_t k) {
    const std::size_t keep = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + keep, hits.end(),
                      ranks_before);
    hits.resize(keep);
    return hits;
  }

 private:
  struct Candidate {
    RetrievalHit hit;
    float approx;
  };

  void prune() {
    const double f = floor();
    std::erase_if(candidates_, [f](const Candidate& c) {
      return static_cast<double>(c.approx) < f;
    });
  }

  std::size_t k_;
  std::span<const float> query_;
  double margin_;
  std::priority_queue<float, std::vector<float>, std::greater<float>> best_;
  std::vector<Candidate> candidates_;
};

// Screening margin for a unit-norm bank and the given query.
inline double screening_margin(std::size_t dim, double query_norm) {
  // Rows are unit-norm to within 1e-4; the extra 2^-22 keeps rows whose
  // rounded f32 score ties with the k-th.
  return 2.0 * dot_f32_error_bound(dim, query_norm, 1.0 + 1e-4) + 0x1p-22;
}

}  // namespace retroclass::detail
