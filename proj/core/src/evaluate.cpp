#include <algorithm>
#include <chrono>

#include "retroclass/error.hpp"
#include "retroclass/harness.hpp"
#include "retroclass/parallel.hpp"

namespace retroclass {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

Retriever make_retriever(const EmbeddingBank& bank,
                         const std::optional<IvfIndex>& index,
                         const IndexMode& mode) {
  if (mode.kind == IndexMode::Kind::kIvf && index) {
    if (!index->bank().same_storage(bank) && !index->bank().contents_equal(bank)) {
      throw Error(ErrorCode::kInvalidConfig, "IVF index was built for another bank");
    }
    return Retriever(*index, mode.nprobe);
  }
  return Retriever(bank);
}

void check_inputs(const EvalInputs& in, const IndexMode& mode) {
  if (in.classes.empty()) throw Error(ErrorCode::kInvalidConfig, "no classes");
  if (in.labels.size() != in.queries.count()) {
    throw Error(ErrorCode::kLabelMismatch,
                std::to_string(in.labels.size()) + " labels for " +
                    std::to_string(in.queries.count()) + " queries");
  }
  if (in.llm_bank.count() != in.vlm_text_bank.count()) {
    throw Error(ErrorCode::kBankMisalignment,
                "LLM bank has " + std::to_string(in.llm_bank.count()) +
                    " rows, VLM text bank has " +
                    std::to_string(in.vlm_text_bank.count()));
  }
  if (mode.kind == IndexMode::Kind::kIvf && !in.llm_index && !in.vlm_index) {
    throw Error(ErrorCode::kInvalidConfig, "IVF mode without any IVF index");
  }
}

}  // namespace

std::string IndexMode::describe() const {
  return kind == Kind::kExact ? "exact" : "ivf(nprobe=" + std::to_string(nprobe) + ")";
}

bool EvalReport::same_results(const EvalReport& o) const {
  return dataset == o.dataset && config == o.config && index_mode == o.index_mode &&
         acc_at == o.acc_at && per_class_acc == o.per_class_acc &&
         per_class_count == o.per_class_count && n_queries == o.n_queries;
}

EvalReport accuracy(std::span<const Prediction> predictions,
                    std::span<const std::size_t> labels, std::size_t n_classes,
                    std::span<const int> ms) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::kLabelMismatch,
                std::to_string(predictions.size()) + " predictions for " +
                    std::to_string(labels.size()) + " labels");
  }
  for (int m : ms) {
    if (m < 1) throw Error(ErrorCode::kInvalidM, "m must be >= 1");
  }

  EvalReport r;
  r.n_queries = predictions.size();
  r.per_class_count.assign(n_classes, 0);
  std::vector<std::size_t> per_class_hits(n_classes, 0);
  std::map<int, std::size_t> hits;
  for (int m : ms) hits[m] = 0;

  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const std::size_t label = labels[i];
    if (label >= n_classes) {
      throw Error(ErrorCode::kLabelMismatch,
                  "label " + std::to_string(label) + " >= " + std::to_string(n_classes));
    }
    const auto& ranked = predictions[i].ranked;
    const auto it = std::find_if(ranked.begin(), ranked.end(),
                                 [&](const RankedClass& c) { return c.cls == label; });
    const auto rank = static_cast<std::size_t>(it - ranked.begin());
    for (auto& [m, count] : hits) {
      if (rank < static_cast<std::size_t>(m)) ++count;
    }
    ++r.per_class_count[label];
    if (rank == 0) ++per_class_hits[label];
  }

  const auto fraction = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  for (const auto& [m, count] : hits) r.acc_at[m] = fraction(count, r.n_queries);
  r.per_class_acc.resize(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    r.per_class_acc[c] = fraction(per_class_hits[c], r.per_class_count[c]);
  }
  return r;
}

Evaluator::Evaluator(const EvalInputs& inputs, std::size_t k,
                     const EvalOptions& options)
    : inputs_(inputs), k_(k), options_(options) {
  if (k == 0) throw Error(ErrorCode::kInvalidConfig, "k must be >= 1");
  check_inputs(inputs, options.index_mode);
  zeroshot_ = zeroshot_prototypes(inputs.classes);

  const auto llm = make_retriever(inputs.llm_bank, inputs.llm_index, options.index_mode);
  const auto vlm = make_retriever(inputs.vlm_text_bank, inputs.vlm_index, options.index_mode);

  auto t0 = Clock::now();
  try {
    class_hits_ = retrieve_class_captions(inputs.classes, llm, k, options.alias_merge,
                                          options.threads);
  } catch (const Error& e) {
    throw e.with_context("text-to-text retrieval");
  }
  retrieval_ms_["retrieve_text"] = elapsed_ms(t0);

  t0 = Clock::now();
  query_hits_.resize(inputs.queries.count());
  try {
    parallel_for(inputs.queries.count(), options.threads, [&](std::size_t i) {
      try {
        query_hits_[i] = vlm.search(QueryEmbedding::from_bank_row(inputs.queries, i), k);
      } catch (const Error& e) {
        throw e.with_context("query " + std::to_string(i));
      }
    });
  } catch (const Error& e) {
    throw e.with_context("image-to-text retrieval");
  }
  retrieval_ms_["retrieve_image"] = elapsed_ms(t0);
}

std::vector<Prediction> Evaluator::predict(const EnrichmentConfig& config, int threads) const {
  config.validate();
  if (config.k != k_) {
    throw Error(ErrorCode::kInvalidConfig,
                "config k = " + std::to_string(config.k) +
                    " but hits were retrieved with k = " + std::to_string(k_));
  }
  const bool enrich_prototypes = config.alpha != 0.0;
  const PrototypeSet enriched =
      enrich_prototypes
          ? enrich_prototypes_from_hits(inputs_.classes, class_hits_,
                                        inputs_.vlm_text_bank, config,
                                        options_.alias_merge)
          : PrototypeSet{};
  const PrototypeSet& prototypes = enrich_prototypes ? enriched : zeroshot_;

  std::vector<Prediction> out(inputs_.queries.count());
  parallel_for(out.size(), threads < 0 ? options_.threads : threads, [&](std::size_t i) {
    out[i] = classify_with_hits(static_cast<std::int64_t>(i), inputs_.queries.row(i),
                                query_hits_[i], prototypes, enrich_prototypes,
                                &inputs_.vlm_text_bank, config);
  });
  return out;
}

EvalReport Evaluator::evaluate(const EnrichmentConfig& config, int threads) const {
  const auto t0 = Clock::now();
  const auto predictions = predict(config, threads);
  const double predict_ms = elapsed_ms(t0);
  EvalReport r = accuracy(predictions, inputs_.labels, inputs_.classes.size(), options_.ms);
  r.dataset = inputs_.dataset;
  r.config = config;
  r.index_mode = options_.index_mode.describe();
  r.wall_time_ms = retrieval_ms_;
  r.wall_time_ms["enrich_and_classify"] = predict_ms;
  return r;
}

EvalReport run_eval(const EvalInputs& inputs, const EnrichmentConfig& config,
                    const EvalOptions& options) {
  config.validate();
  return Evaluator(inputs, config.k, options).evaluate(config);
}

}  // namespace retroclass
