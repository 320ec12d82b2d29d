#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "retroclass/enrich.hpp"

namespace retroclass {

struct RankedClass {
  std::size_t cls = 0;
  double logit = 0.0;

  bool operator==(const RankedClass&) const = default;
};

struct Prediction {
  std::int64_t query_id = 0;
  // Classes by logit descending, ties to the lower index.
  std::vector<RankedClass> ranked;
  bool enriched = false;

  bool operator==(const Prediction&) const = default;
};

// Cosine similarity of u with every prototype row (norms divided out).
std::vector<double> logits(std::span<const float> u, const PrototypeSet& prototypes);

// The m best classes; InvalidM unless 1 <= m <= N.
std::vector<RankedClass> predict_topk(std::span<const double> logits, std::size_t m);

// Image-to-text side of classification: where query captions come from.
struct QueryEnrichment {
  const Retriever* retriever = nullptr;         // searches the VLM-text bank
  const EmbeddingBank* caption_bank = nullptr;  // embeddings fused into u
};

// Ranks all classes for one query. With beta = 0 and no enriched prototypes
// this is plain zero-shot classification against `zeroshot`.
Prediction classify_query(std::int64_t query_id, const QueryEmbedding& query,
                          const PrototypeSet& zeroshot,
                          const PrototypeSet* enriched_prototypes,
                          const QueryEnrichment& query_enrichment,
                          const EnrichmentConfig& config);

// Same, with the query's image-to-text hits already retrieved.
Prediction classify_with_hits(std::int64_t query_id,
                              std::span<const float> query,
                              std::span<const RetrievalHit> hits,
                              const PrototypeSet& prototypes,
                              bool prototypes_enriched,
                              const EmbeddingBank* caption_bank,
                              const EnrichmentConfig& config);

// JSONL: {"query_id": int, "topk": [[class_idx, logit], ...], "enriched": bool}
std::string to_jsonl(const Prediction& prediction);
Prediction prediction_from_jsonl(std::string_view line);
void write_predictions(std::span<const Prediction> predictions,
                       const std::filesystem::path& path);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

}  // namespace retroclass
