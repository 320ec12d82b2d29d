#pragma once

// Evaluation harness: accuracy reports, full-pipeline evaluation, ablation
// sweeps, the synthetic fixture used for acceptance and regression tests, and
// report serialization.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "retroclass/classify.hpp"
#include "retroclass/embank.hpp"
#include "retroclass/enrich.hpp"
#include "retroclass/prompts.hpp"
#include "retroclass/vindex.hpp"

namespace retroclass {

inline constexpr std::string_view kReportSchema = "retroclass.eval_report/1";

struct EvalReport {
  std::string dataset;
  EnrichmentConfig config;
  std::string index_mode = "exact";
  std::map<int, double> acc_at;  // m -> Acc@m
  std::vector<double> per_class_acc;
  std::vector<std::size_t> per_class_count;
  std::size_t n_queries = 0;
  // Stage timings; excluded from comparisons and CSV output.
  std::map<std::string, double> wall_time_ms;

  // Equality on everything except wall_time_ms.
  bool same_results(const EvalReport& other) const;
};

// Acc@m for each m: share of queries whose label is among the first m ranked
// classes. Labels must be < n_classes.
EvalReport accuracy(std::span<const Prediction> predictions,
                    std::span<const std::size_t> labels, std::size_t n_classes,
                    std::span<const int> ms = std::vector<int>{1, 5});

struct IndexMode {
  enum class Kind { kExact, kIvf };
  Kind kind = Kind::kExact;
  std::size_t nprobe = 0;

  static IndexMode exact() { return {}; }
  static IndexMode ivf(std::size_t nprobe) { return {Kind::kIvf, nprobe}; }
  std::string describe() const;
};

// Everything one evaluation needs. The IVF indexes are used only when the
// index mode asks for them.
struct EvalInputs {
  std::string dataset = "unnamed";
  EmbeddingBank queries;  // VLM image space
  std::vector<std::size_t> labels;
  std::vector<ClassSpec> classes;
  EmbeddingBank llm_bank;       // captions in LLM space (text-to-text)
  EmbeddingBank vlm_text_bank;  // the same captions in VLM text space
  std::optional<IvfIndex> llm_index;
  std::optional<IvfIndex> vlm_index;
};

struct EvalOptions {
  IndexMode index_mode;
  AliasMerge alias_merge = AliasMerge::kBeforeEnrichment;
  std::vector<int> ms = {1, 5};
  int threads = 1;
};

// Retrieves once for a fixed k, then evaluates any number of configurations
// with that k against the cached hits.
class Evaluator {
 public:
  Evaluator(const EvalInputs& inputs, std::size_t k, const EvalOptions& options);

  std::size_t k() const noexcept { return k_; }
  // threads < 0: use the evaluator's options.
  std::vector<Prediction> predict(const EnrichmentConfig& config, int threads = -1) const;
  EvalReport evaluate(const EnrichmentConfig& config, int threads = -1) const;

 private:
  const EvalInputs& inputs_;
  std::size_t k_;
  EvalOptions options_;
  PrototypeSet zeroshot_;
  ClassHits class_hits_;
  std::vector<std::vector<RetrievalHit>> query_hits_;
  std::map<std::string, double> retrieval_ms_;
};

EvalReport run_eval(const EvalInputs& inputs, const EnrichmentConfig& config,
                    const EvalOptions& options = {});

struct SweepGrid {
  std::vector<double> alphas;
  std::vector<double> betas;
  std::vector<double> taus_tt;  // empty: base config value
  std::vector<double> taus_it;  // empty: base config value
  // (use_temperature_tt, use_temperature_it); empty: base config value
  std::vector<std::pair<bool, bool>> toggles;

  // Grid points in order toggles > tau_tt > tau_it > alpha > beta
  // (beta varies fastest). Throws EmptyGrid / InvalidConfig.
  std::vector<EnrichmentConfig> expand(const EnrichmentConfig& base) const;
};

SweepGrid parse_sweep_grid(std::string_view json);

// zero-shot, +alpha (uniform), +tau_tt, +beta (uniform), +tau_it.
std::vector<EnrichmentConfig> ablation_ladder(const EnrichmentConfig& base);

// One report per configuration, in input order. All configs must share k.
std::vector<EvalReport> run_sweep(std::span<const EnrichmentConfig> configs,
                                  const EvalInputs& inputs,
                                  const EvalOptions& options = {});
std::vector<EvalReport> run_sweep(const SweepGrid& grid,
                                  const EnrichmentConfig& base,
                                  const EvalInputs& inputs,
                                  const EvalOptions& options = {});

struct FixtureParams {
  std::uint64_t seed = 1;
  std::size_t n_classes = 20;
  std::size_t dim = 64;
  std::size_t queries_per_class = 50;
  double prototype_noise = 0.6;  // eta_p
  double caption_noise = 0.1;    // eta_c
  std::size_t captions_per_class = 40;
  double query_noise = 3.0;      // eta_q
};

// Synthetic low-resource task. Noise of scale eta is an isotropic Gaussian
// with per-component std eta / sqrt(dim), added to the class center before
// renormalizing. Prototypes and retrieval queries are center + eta_p noise,
// captions center + eta_c noise (stored identically in the LLM and VLM-text
// banks), queries center + eta_q noise. Requires eta_p >= eta_c >= 0.
struct Fixture {
  FixtureParams params;
  ClassConfig classes;
  EmbeddingBank queries;            // "vlm-image"
  std::vector<std::size_t> labels;
  EmbeddingBank prototypes;         // "vlm-text", zero-shot prompts
  EmbeddingBank retrieval_queries;  // "llm-text", retrieval prompts
  EmbeddingBank llm_bank;           // "llm-text"
  EmbeddingBank vlm_text_bank;      // "vlm-text"
  std::vector<std::vector<float>> centers;

  EvalInputs eval_inputs() const;
};

Fixture synth_fixture(const FixtureParams& params);

// Writes queries.bank, prototypes.bank, retrieval_queries.bank, llm.bank,
// vlm_text.bank (with sidecars), labels.json, classes.json and fixture.json.
void save_fixture(const Fixture& fixture, const std::filesystem::path& dir);

// Loads the files written by save_fixture (fixture.json optional).
EvalInputs load_eval_dir(const std::filesystem::path& dir);

std::vector<std::size_t> load_labels(const std::filesystem::path& path);
void save_labels(std::span<const std::size_t> labels,
                 const std::filesystem::path& path);

enum class ReportFormat { kJson, kCsv };

ReportFormat parse_report_format(std::string_view name);

// {"schema": ..., "reports": [...]}
std::string reports_to_json(std::span<const EvalReport> reports,
                            bool include_timings = true);
std::vector<EvalReport> reports_from_json(std::string_view json);
// Header plus one row per report; no timing columns.
std::string reports_to_csv(std::span<const EvalReport> reports);

void emit_report(std::span<const EvalReport> reports, ReportFormat format,
                 const std::filesystem::path& path);

}  // namespace retroclass
