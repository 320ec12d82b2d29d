#include "retroclass/enrich.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "retroclass/error.hpp"
#include "retroclass/parallel.hpp"

namespace retroclass {

namespace {

constexpr double kWeightSumTolerance = 1e-6;

// factor * centroid(captions) + (1 - factor) * base, optionally renormalized.
EnrichedVector interpolate(std::span<const float> base,
                           const RetrievedCaptions& captions, double factor,
                           double tau, bool use_temperature, bool renormalize) {
  if (factor == 0.0) return {{base.begin(), base.end()}, false};
  if (captions.hits.empty()) {
    spdlog::debug("no captions retrieved; keeping unenriched vector");
    return {{base.begin(), base.end()}, true};
  }
  const auto weighted = weigh_captions(captions, tau, use_temperature);
  const auto centroid = weighted_centroid(weighted.embeddings, weighted.weights);
  if (centroid.size() != base.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "caption dim " + std::to_string(centroid.size()) +
                    " != vector dim " + std::to_string(base.size()));
  }

  std::vector<double> mixed(base.size());
  for (std::size_t j = 0; j < base.size(); ++j) {
    mixed[j] = factor * static_cast<double>(centroid[j]) +
               (1.0 - factor) * static_cast<double>(base[j]);
  }
  double scale = 1.0;
  if (renormalize) {
    double norm = 0.0;
    for (double x : mixed) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > kZeroNormThreshold) scale = 1.0 / norm;
  }
  EnrichedVector out;
  out.vector.resize(base.size());
  for (std::size_t j = 0; j < base.size(); ++j) {
    out.vector[j] = static_cast<float>(renormalize ? mixed[j] * scale : mixed[j]);
  }
  return out;
}

void check_unit(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig,
                std::string(name) + " must be in [0, 1], got " +
                    std::to_string(value));
  }
}

}  // namespace

void EnrichmentConfig::validate() const {
  if (k == 0) throw Error(ErrorCode::kInvalidConfig, "k must be >= 1");
  if (!(tau_tt > 0.0) || !std::isfinite(tau_tt)) {
    throw Error(ErrorCode::kInvalidConfig, "tau_tt must be > 0");
  }
  if (!(tau_it > 0.0) || !std::isfinite(tau_it)) {
    throw Error(ErrorCode::kInvalidConfig, "tau_it must be > 0");
  }
  check_unit(alpha, "alpha");
  check_unit(beta, "beta");
}

std::string to_json(const EnrichmentConfig& c) {
  nlohmann::ordered_json j;
  j["k"] = c.k;
  j["tau_tt"] = c.tau_tt;
  j["tau_it"] = c.tau_it;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["use_temperature_tt"] = c.use_temperature_tt;
  j["use_temperature_it"] = c.use_temperature_it;
  j["renormalize_output"] = c.renormalize_output;
  return j.dump();
}

EnrichmentConfig parse_enrichment_config(std::string_view json) {
  EnrichmentConfig c;
  try {
    const auto j = nlohmann::json::parse(json);
    if (!j.is_object()) {
      throw Error(ErrorCode::kInvalidConfig, "enrichment config must be an object");
    }
    c.k = j.value("k", c.k);
    c.tau_tt = j.value("tau_tt", c.tau_tt);
    c.tau_it = j.value("tau_it", c.tau_it);
    c.alpha = j.value("alpha", c.alpha);
    c.beta = j.value("beta", c.beta);
    c.use_temperature_tt = j.value("use_temperature_tt", c.use_temperature_tt);
    c.use_temperature_it = j.value("use_temperature_it", c.use_temperature_it);
    c.renormalize_output = j.value("renormalize_output", c.renormalize_output);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig,
                std::string("enrichment config: ") + e.what());
  }
  c.validate();
  return c;
}

EnrichmentConfig load_enrichment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_enrichment_config(ss.str());
}

std::vector<double> softmax_weights(std::span<const double> scores, double tau) {
  if (scores.empty()) throw Error(ErrorCode::kEmptyScores, "no scores");
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(ErrorCode::kInvalidTemperature,
                "temperature must be > 0, got " + std::to_string(tau));
  }
  double top = -std::numeric_limits<double>::infinity();
  for (double s : scores) {
    if (!std::isfinite(s)) throw Error(ErrorCode::kInvalidWeights, "non-finite score");
    top = std::max(top, s);
  }
  std::vector<double> w(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    w[i] = std::exp(scores[i] / tau - top / tau);
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

std::vector<double> uniform_weights(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::kEmptyScores, "no scores");
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

std::vector<float> weighted_centroid(
    std::span<const std::span<const float>> embeddings,
    std::span<const double> weights) {
  if (embeddings.size() != weights.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(embeddings.size()) + " embeddings, " +
                    std::to_string(weights.size()) + " weights");
  }
  if (embeddings.empty()) throw Error(ErrorCode::kEmptyScores, "no embeddings");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error(ErrorCode::kInvalidWeights, "negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > kWeightSumTolerance) {
    throw Error(ErrorCode::kInvalidWeights,
                "weights sum to " + std::to_string(total));
  }
  const std::size_t dim = embeddings.front().size();
  std::vector<double> acc(dim, 0.0);
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (embeddings[i].size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch, "embeddings differ in dim");
    }
    for (std::size_t j = 0; j < dim; ++j) {
      acc[j] += weights[i] * static_cast<double>(embeddings[i][j]);
    }
  }
  return {acc.begin(), acc.end()};
}

RetrievedCaptions gather_captions(std::vector<RetrievalHit> hits,
                                  const EmbeddingBank& caption_bank) {
  RetrievedCaptions out;
  out.embeddings.reserve(hits.size());
  for (const auto& h : hits) {
    if (h.id < 0 || static_cast<std::size_t>(h.id) >= caption_bank.count()) {
      throw Error(ErrorCode::kBankMisalignment,
                  "caption id " + std::to_string(h.id) +
                      " has no row in the caption embedding bank (" +
                      std::to_string(caption_bank.count()) + " rows)");
    }
    out.embeddings.push_back(caption_bank.row(static_cast<std::size_t>(h.id)));
  }
  out.hits = std::move(hits);
  return out;
}

WeightedCaptions weigh_captions(const RetrievedCaptions& captions, double tau,
                                bool use_temperature) {
  if (captions.hits.size() != captions.embeddings.size()) {
    throw Error(ErrorCode::kLengthMismatch, "hits and embeddings differ in length");
  }
  WeightedCaptions out;
  out.hits = captions.hits;
  out.embeddings = captions.embeddings;
  if (use_temperature) {
    std::vector<double> scores;
    scores.reserve(captions.hits.size());
    for (const auto& h : captions.hits) scores.push_back(h.score);
    out.weights = softmax_weights(scores, tau);
  } else {
    out.weights = uniform_weights(captions.hits.size());
  }
  return out;
}

EnrichedVector enrich_prototype(std::span<const float> prototype,
                                const RetrievedCaptions& captions,
                                const EnrichmentConfig& config) {
  return interpolate(prototype, captions, config.alpha, config.tau_tt,
                     config.use_temperature_tt, config.renormalize_output);
}

EnrichedVector enrich_query(std::span<const float> query,
                            const RetrievedCaptions& captions,
                            const EnrichmentConfig& config) {
  return interpolate(query, captions, config.beta, config.tau_it,
                     config.use_temperature_it, config.renormalize_output);
}

PrototypeSet zeroshot_prototypes(std::span<const ClassSpec> specs) {
  PrototypeSet set;
  set.kind = PrototypeKind::kZeroShot;
  if (specs.empty()) return set;
  set.dim = specs.front().prototype.size();
  set.matrix.reserve(specs.size() * set.dim);
  for (const auto& s : specs) {
    if (s.prototype.size() != set.dim) {
      throw Error(ErrorCode::kDimensionMismatch, "prototypes differ in dim");
    }
    set.matrix.insert(set.matrix.end(), s.prototype.begin(), s.prototype.end());
  }
  return set;
}

ClassHits retrieve_class_captions(std::span<const ClassSpec> specs,
                                  const Retriever& llm_retriever, std::size_t k,
                                  AliasMerge alias_merge, int threads) {
  ClassHits hits(specs.size());
  parallel_for(specs.size(), threads, [&](std::size_t n) {
    const auto& spec = specs[n];
    try {
      if (alias_merge == AliasMerge::kBeforeEnrichment) {
        const QueryEmbedding q{spec.retrieval_query, spec.retrieval_space_tag};
        hits[n].push_back(llm_retriever.search(q, k));
      } else {
        for (const auto& v : spec.alias_retrieval_queries) {
          const QueryEmbedding q{v, spec.retrieval_space_tag};
          hits[n].push_back(llm_retriever.search(q, k));
        }
      }
    } catch (const Error& e) {
      throw e.with_context("class " + std::to_string(n) + " ('" + spec.name + "')");
    }
  });
  return hits;
}

PrototypeSet enrich_prototypes_from_hits(std::span<const ClassSpec> specs,
                                         const ClassHits& hits,
                                         const EmbeddingBank& vlm_text_bank,
                                         const EnrichmentConfig& config,
                                         AliasMerge alias_merge) {
  config.validate();
  if (specs.empty()) throw Error(ErrorCode::kInvalidConfig, "no classes");
  if (hits.size() != specs.size()) {
    throw Error(ErrorCode::kLengthMismatch, "hits do not match classes");
  }
  PrototypeSet set;
  set.kind = PrototypeKind::kFinal;
  set.dim = specs.front().prototype.size();
  set.matrix.reserve(specs.size() * set.dim);

  for (std::size_t n = 0; n < specs.size(); ++n) {
    const auto& spec = specs[n];
    bool partial = false;
    std::vector<float> row;
    if (alias_merge == AliasMerge::kBeforeEnrichment) {
      const auto captions = gather_captions(hits[n].at(0), vlm_text_bank);
      auto e = enrich_prototype(spec.prototype, captions, config);
      partial = e.partial;
      row = std::move(e.vector);
    } else {
      if (hits[n].size() != spec.alias_prototypes.size()) {
        throw Error(ErrorCode::kLengthMismatch, "per-alias hits do not match aliases");
      }
      std::vector<std::vector<float>> enriched;
      for (std::size_t a = 0; a < spec.alias_prototypes.size(); ++a) {
        const auto captions = gather_captions(hits[n][a], vlm_text_bank);
        auto e = enrich_prototype(spec.alias_prototypes[a], captions, config);
        partial = partial || e.partial;
        enriched.push_back(std::move(e.vector));
      }
      row = merge_alias_prototypes(enriched);
    }
    if (row.size() != set.dim) {
      throw Error(ErrorCode::kDimensionMismatch, "prototypes differ in dim");
    }
    if (partial) set.partial_classes.push_back(n);
    set.matrix.insert(set.matrix.end(), row.begin(), row.end());
  }
  if (!set.partial_classes.empty()) {
    spdlog::warn("{} of {} classes kept their zero-shot prototype (no captions retrieved)",
                 set.partial_classes.size(), specs.size());
  }
  return set;
}

PrototypeSet enrich_all_prototypes(std::span<const ClassSpec> specs,
                                   const Retriever& llm_retriever,
                                   const EmbeddingBank& vlm_text_bank,
                                   const EnrichmentConfig& config,
                                   const PrototypeEnrichmentOptions& options) {
  config.validate();
  if (specs.empty()) throw Error(ErrorCode::kInvalidConfig, "no classes");
  const auto& llm_bank = llm_retriever.bank();
  if (llm_bank.count() != vlm_text_bank.count()) {
    throw Error(ErrorCode::kBankMisalignment,
                "LLM bank has " + std::to_string(llm_bank.count()) +
                    " rows, VLM text bank has " +
                    std::to_string(vlm_text_bank.count()));
  }
  if (config.alpha == 0.0) {
    auto set = zeroshot_prototypes(specs);
    set.kind = PrototypeKind::kFinal;
    return set;
  }
  const auto hits = retrieve_class_captions(specs, llm_retriever, config.k,
                                            options.alias_merge, options.threads);
  return enrich_prototypes_from_hits(specs, hits, vlm_text_bank, config,
                                     options.alias_merge);
}

}  // namespace retroclass
