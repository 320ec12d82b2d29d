#include "retroclass/classify.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "retroclass/error.hpp"
#include "retroclass/kernels.hpp"

namespace retroclass {

std::vector<double> logits(std::span<const float> u, const PrototypeSet& prototypes) {
  if (u.size() != prototypes.dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "query dim " + std::to_string(u.size()) + " != prototype dim " +
                    std::to_string(prototypes.dim));
  }
  const double u_norm = l2_norm(u);
  if (!(u_norm > kZeroNormThreshold)) {
    throw Error(ErrorCode::kDegenerateQuery, "query has zero norm");
  }
  std::vector<double> out(prototypes.size());
  for (std::size_t n = 0; n < out.size(); ++n) {
    const auto w = prototypes.row(n);
    const double w_norm = l2_norm(w);
    if (!(w_norm > kZeroNormThreshold)) {
      throw Error(ErrorCode::kDegeneratePrototype,
                  "prototype " + std::to_string(n) + " has zero norm");
    }
    out[n] = dot_f64(u, w) / (u_norm * w_norm);
  }
  return out;
}

std::vector<RankedClass> predict_topk(std::span<const double> logits, std::size_t m) {
  if (m == 0 || m > logits.size()) {
    throw Error(ErrorCode::kInvalidM,
                "m = " + std::to_string(m) + " with " +
                    std::to_string(logits.size()) + " classes");
  }
  std::vector<std::size_t> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + m, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return logits[a] > logits[b] || (logits[a] == logits[b] && a < b);
                    });
  std::vector<RankedClass> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) out.push_back({order[i], logits[order[i]]});
  return out;
}

Prediction classify_with_hits(std::int64_t query_id,
                              std::span<const float> query,
                              std::span<const RetrievalHit> hits,
                              const PrototypeSet& prototypes,
                              bool prototypes_enriched,
                              const EmbeddingBank* caption_bank,
                              const EnrichmentConfig& config) {
  Prediction p;
  p.query_id = query_id;
  p.enriched = prototypes_enriched;
  if (config.beta == 0.0) {
    p.ranked = predict_topk(logits(query, prototypes), prototypes.size());
    return p;
  }
  if (caption_bank == nullptr) {
    throw Error(ErrorCode::kInvalidConfig, "query enrichment needs a caption bank");
  }
  const auto captions = gather_captions({hits.begin(), hits.end()}, *caption_bank);
  const auto enriched = enrich_query(query, captions, config);
  p.enriched = p.enriched || !enriched.partial;
  p.ranked = predict_topk(logits(enriched.vector, prototypes), prototypes.size());
  return p;
}

Prediction classify_query(std::int64_t query_id, const QueryEmbedding& query,
                          const PrototypeSet& zeroshot,
                          const PrototypeSet* enriched_prototypes,
                          const QueryEnrichment& query_enrichment,
                          const EnrichmentConfig& config) {
  config.validate();
  const bool use_enriched = enriched_prototypes != nullptr && config.alpha != 0.0;
  const PrototypeSet& prototypes = use_enriched ? *enriched_prototypes : zeroshot;

  std::vector<RetrievalHit> hits;
  if (config.beta != 0.0) {
    if (query_enrichment.retriever == nullptr) {
      throw Error(ErrorCode::kInvalidConfig, "query enrichment needs a retriever");
    }
    hits = query_enrichment.retriever->search(query, config.k);
  }
  const EmbeddingBank* captions = query_enrichment.caption_bank;
  if (captions == nullptr && query_enrichment.retriever != nullptr) {
    captions = &query_enrichment.retriever->bank();
  }
  return classify_with_hits(query_id, query.vector, hits, prototypes,
                            use_enriched, captions, config);
}

std::string to_jsonl(const Prediction& prediction) {
  nlohmann::ordered_json j;
  j["query_id"] = prediction.query_id;
  auto topk = nlohmann::ordered_json::array();
  for (const auto& r : prediction.ranked) {
    topk.push_back(nlohmann::ordered_json::array({r.cls, r.logit}));
  }
  j["topk"] = std::move(topk);
  j["enriched"] = prediction.enriched;
  return j.dump();
}

Prediction prediction_from_jsonl(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    Prediction p;
    p.query_id = j.at("query_id").get<std::int64_t>();
    for (const auto& e : j.at("topk")) {
      p.ranked.push_back({e.at(0).get<std::size_t>(), e.at(1).get<double>()});
    }
    p.enriched = j.at("enriched").get<bool>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidRecord, std::string("prediction: ") + e.what());
  }
}

void write_predictions(std::span<const Prediction> predictions,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  for (const auto& p : predictions) out << to_jsonl(p) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "write failed for '" + path.string() + "'");
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  std::vector<Prediction> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(prediction_from_jsonl(line));
  }
  return out;
}

}  // namespace retroclass
