#pragma once

// Retrieval enrichment of class prototypes and query embeddings.
//
// Retrieved caption scores s are turned into weights softmax(s / tau), the
// caption embeddings are averaged with those weights, and the result is
// blended into the original vector:
//   prototype:  W* = alpha * w_r + (1 - alpha) * W
//   query:      u~ = beta  * u_r + (1 - beta)  * u

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "retroclass/embank.hpp"
#include "retroclass/prompts.hpp"
#include "retroclass/vindex.hpp"

namespace retroclass {

struct EnrichmentConfig {
  std::size_t k = 10;
  double tau_tt = 1.0;    // text-to-text retrieval temperature
  double tau_it = 100.0;  // image-to-text retrieval temperature
  double alpha = 0.2;     // prototype interpolation
  double beta = 0.5;      // query interpolation
  bool use_temperature_tt = true;
  bool use_temperature_it = true;
  bool renormalize_output = true;

  // Throws InvalidConfig unless k >= 1, temperatures > 0, alpha/beta in [0,1].
  void validate() const;

  bool operator==(const EnrichmentConfig&) const = default;
};

std::string to_json(const EnrichmentConfig& config);
// Missing keys take the defaults above; the result is validated.
EnrichmentConfig parse_enrichment_config(std::string_view json);
EnrichmentConfig load_enrichment_config(const std::filesystem::path& path);

// Max-subtracted softmax of scores / tau.
std::vector<double> softmax_weights(std::span<const double> scores, double tau);
std::vector<double> uniform_weights(std::size_t n);

// Sum of weights[i] * embeddings[i], accumulated in double, rounded to f32.
// Not renormalized.
std::vector<float> weighted_centroid(
    std::span<const std::span<const float>> embeddings,
    std::span<const double> weights);

// Retrieval hits joined with their caption embeddings in VLM-text space.
struct RetrievedCaptions {
  std::vector<RetrievalHit> hits;
  std::vector<std::span<const float>> embeddings;
};

// Looks up each hit id in `caption_bank`; an id past its end is a
// BankMisalignment. The spans borrow from the bank.
RetrievedCaptions gather_captions(std::vector<RetrievalHit> hits,
                                  const EmbeddingBank& caption_bank);

struct WeightedCaptions {
  std::vector<RetrievalHit> hits;
  std::vector<double> weights;
  std::vector<std::span<const float>> embeddings;
};

WeightedCaptions weigh_captions(const RetrievedCaptions& captions, double tau,
                                bool use_temperature);

struct EnrichedVector {
  std::vector<float> vector;
  // Set when nothing was retrieved and the input came back unchanged.
  bool partial = false;
};

EnrichedVector enrich_prototype(std::span<const float> prototype,
                                const RetrievedCaptions& captions,
                                const EnrichmentConfig& config);

EnrichedVector enrich_query(std::span<const float> query,
                            const RetrievedCaptions& captions,
                            const EnrichmentConfig& config);

enum class PrototypeKind { kZeroShot, kRetrieved, kFinal };

// N x dim row-major prototype matrix.
struct PrototypeSet {
  std::size_t dim = 0;
  std::vector<float> matrix;
  PrototypeKind kind = PrototypeKind::kZeroShot;
  // Classes whose enrichment fell back to the zero-shot row.
  std::vector<std::size_t> partial_classes;

  std::size_t size() const noexcept { return dim == 0 ? 0 : matrix.size() / dim; }
  std::span<const float> row(std::size_t n) const noexcept {
    return {matrix.data() + n * dim, dim};
  }
};

PrototypeSet zeroshot_prototypes(std::span<const ClassSpec> specs);

enum class AliasMerge {
  kBeforeEnrichment,  // enrich the merged prototype with the merged query
  kAfterEnrichment,   // enrich every alias separately, then merge
};

struct PrototypeEnrichmentOptions {
  AliasMerge alias_merge = AliasMerge::kBeforeEnrichment;
  int threads = 1;
};

// Text-to-text branch: retrieves top-k captions for each class's retrieval
// query in LLM space and fuses their VLM-text embeddings (same ids) into the
// class prototype.
PrototypeSet enrich_all_prototypes(std::span<const ClassSpec> specs,
                                   const Retriever& llm_retriever,
                                   const EmbeddingBank& vlm_text_bank,
                                   const EnrichmentConfig& config,
                                   const PrototypeEnrichmentOptions& options = {});

// Per-alias hits for the text-to-text branch: hits[n][a] belongs to alias a
// of class n (a = 0 is the name), or hits[n][0] alone for merged queries.
using ClassHits = std::vector<std::vector<std::vector<RetrievalHit>>>;

ClassHits retrieve_class_captions(std::span<const ClassSpec> specs,
                                  const Retriever& llm_retriever, std::size_t k,
                                  AliasMerge alias_merge, int threads = 1);

// enrich_all_prototypes with retrieval already done.
PrototypeSet enrich_prototypes_from_hits(std::span<const ClassSpec> specs,
                                         const ClassHits& hits,
                                         const EmbeddingBank& vlm_text_bank,
                                         const EnrichmentConfig& config,
                                         AliasMerge alias_merge);

}  // namespace retroclass
