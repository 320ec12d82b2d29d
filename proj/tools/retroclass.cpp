// retroclass command-line interface.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "retroclass/classify.hpp"
#include "retroclass/embank.hpp"
#include "retroclass/enrich.hpp"
#include "retroclass/error.hpp"
#include "retroclass/harness.hpp"
#include "retroclass/log.hpp"
#include "retroclass/parallel.hpp"
#include "retroclass/prompts.hpp"
#include "retroclass/vindex.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace retroclass;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to `path`, or stdout when it is empty.
void write_output(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path + "'");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::kIoError, "write failed for '" + path + "'");
}

AliasMerge parse_alias_merge(const std::string& s) {
  if (s == "before") return AliasMerge::kBeforeEnrichment;
  if (s == "after") return AliasMerge::kAfterEnrichment;
  throw Error(ErrorCode::kInvalidConfig, "alias merge must be 'before' or 'after'");
}

EnrichmentConfig load_config_or_default(const std::string& path) {
  return path.empty() ? EnrichmentConfig{} : load_enrichment_config(path);
}

Retriever make_retriever(const EmbeddingBank& bank, const std::string& index_path,
                         std::size_t nprobe) {
  if (index_path.empty()) return Retriever(bank);
  return Retriever(load_ivf(index_path, bank), nprobe);
}

std::vector<float> parse_embedding(const nlohmann::json& j) {
  std::vector<float> v;
  v.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw Error(ErrorCode::kInvalidRecord, "embedding must be numeric");
    v.push_back(x.get<float>());
  }
  return v;
}

// ---- bank -------------------------------------------------------------------

struct BankBuildArgs {
  std::string input;
  std::string space_tag;
  std::string out;
};

void cmd_bank_build(const BankBuildArgs& a) {
  std::ifstream in(a.input);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + a.input + "'");
  std::optional<BankBuilder> builder;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kInvalidRecord, e.what());
      }
      if (!j.is_object() || !j.contains("embedding") || !j.contains("text")) {
        throw Error(ErrorCode::kInvalidRecord, "expected {\"embedding\", \"text\"}");
      }
      const auto v = parse_embedding(j.at("embedding"));
      if (!builder) builder.emplace(v.size(), a.space_tag);
      std::optional<std::string> source;
      if (j.contains("source") && !j.at("source").is_null()) {
        source = j.at("source").get<std::string>();
      }
      builder->append(v, j.at("text").get<std::string>(), source);
    } catch (const Error& e) {
      throw e.with_context(a.input + ":" + std::to_string(line_no));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidRecord,
                  a.input + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!builder) throw Error(ErrorCode::kEmptyBank, "no records in '" + a.input + "'");
  const auto bank = std::move(*builder).finalize();
  save_bank(bank, a.out);
  spdlog::info("wrote {} rows of dim {} to {}", bank.count(), bank.dim(), a.out);
}

struct BankInspectArgs {
  std::string bank;
  std::size_t rows = 0;
  std::string out;
};

void cmd_bank_inspect(const BankInspectArgs& a) {
  const auto header = read_bank_header(a.bank);
  const auto bank = load_bank(a.bank);
  ordered_json j;
  j["path"] = a.bank;
  j["version"] = header.version;
  j["dtype"] = "f32";
  j["dim"] = header.dim;
  j["count"] = header.count;
  j["space_tag"] = header.space_tag;
  j["payload_offset"] = header.payload_offset;
  const bool has_meta = fs::exists(metadata_path(a.bank));
  j["metadata"] = has_meta ? metadata_path(a.bank).string() : "";
  if (a.rows > 0 && has_meta) {
    std::vector<std::int64_t> ids;
    for (std::size_t i = 0; i < std::min<std::size_t>(a.rows, bank.count()); ++i) {
      ids.push_back(static_cast<std::int64_t>(i));
    }
    auto records = ordered_json::array();
    for (const auto& r : bank.join_metadata(ids)) {
      ordered_json rec;
      rec["id"] = r.id;
      rec["text"] = r.text;
      rec["source"] = r.source ? ordered_json(*r.source) : ordered_json(nullptr);
      records.push_back(std::move(rec));
    }
    j["records"] = std::move(records);
  }
  write_output(a.out, j.dump(2) + "\n");
}

// ---- index ------------------------------------------------------------------

struct IndexBuildArgs {
  std::string bank;
  std::size_t clusters = 0;
  std::uint64_t seed = 0;
  std::size_t max_iters = 25;
  std::size_t train_size = 0;
  int threads = 1;
  std::string out;
};

void cmd_index_build(const IndexBuildArgs& a) {
  const auto bank = load_bank(a.bank);
  IvfBuildOptions opts;
  opts.n_clusters = a.clusters;
  opts.seed = a.seed;
  opts.max_iters = a.max_iters;
  opts.train_size = a.train_size;
  opts.threads = a.threads;
  const auto index = build_ivf(bank, opts);
  save_ivf(index, a.out);
  spdlog::info("wrote IVF index with {} clusters to {}", index.n_clusters(), a.out);
}

// ---- retrieve ---------------------------------------------------------------

struct RetrieveArgs {
  std::string bank;
  std::string queries;
  std::string index;
  std::size_t nprobe = 8;
  std::size_t k = 10;
  bool with_text = false;
  int threads = 1;
  std::string out;
};

void cmd_retrieve(const RetrieveArgs& a) {
  const auto bank = load_bank(a.bank);
  const auto queries = load_bank(a.queries);
  const auto retriever = make_retriever(bank, a.index, a.nprobe);
  std::vector<QueryEmbedding> qs;
  qs.reserve(queries.count());
  for (std::size_t i = 0; i < queries.count(); ++i) {
    qs.push_back(QueryEmbedding::from_bank_row(queries, i));
  }
  const auto hits = batch_topk(qs, retriever, a.k, a.threads);

  std::string text;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    ordered_json j;
    j["query_id"] = i;
    auto list = ordered_json::array();
    for (const auto& h : hits[i]) list.push_back(ordered_json::array({h.id, h.score}));
    j["hits"] = std::move(list);
    if (a.with_text) {
      std::vector<std::int64_t> ids;
      for (const auto& h : hits[i]) ids.push_back(h.id);
      auto texts = ordered_json::array();
      for (const auto& r : bank.join_metadata(ids)) texts.push_back(r.text);
      j["texts"] = std::move(texts);
    }
    text += j.dump() + "\n";
  }
  write_output(a.out, text);
}

// ---- prompts ----------------------------------------------------------------

struct PromptsArgs {
  std::string classes;
  std::string kind = "zeroshot";
  std::string out;
};

void cmd_prompts(const PromptsArgs& a) {
  const auto config = load_class_config(a.classes);
  PromptKind kind;
  if (a.kind == "zeroshot") {
    kind = PromptKind::kZeroShot;
  } else if (a.kind == "retrieval") {
    kind = PromptKind::kRetrieval;
  } else {
    throw Error(ErrorCode::kInvalidConfig, "kind must be 'zeroshot' or 'retrieval'");
  }
  std::string text;
  for (const auto& p : render_prompts(config, kind)) text += p + "\n";
  write_output(a.out, text);
}

// ---- enrich-prototypes ------------------------------------------------------

struct EnrichArgs {
  std::string classes;
  std::string prototypes;
  std::string retrieval_queries;
  std::string llm_bank;
  std::string vlm_text_bank;
  std::string llm_index;
  std::size_t nprobe = 8;
  std::string config;
  std::string alias_merge = "before";
  int threads = 1;
  std::string out;
};

void cmd_enrich_prototypes(const EnrichArgs& a) {
  const auto classes = load_class_config(a.classes);
  const auto specs = build_class_specs(classes, load_bank(a.prototypes),
                                       load_bank(a.retrieval_queries));
  const auto llm = load_bank(a.llm_bank);
  const auto vlm = load_bank(a.vlm_text_bank);
  const auto config = load_config_or_default(a.config);
  const auto retriever = make_retriever(llm, a.llm_index, a.nprobe);

  PrototypeEnrichmentOptions opts;
  opts.alias_merge = parse_alias_merge(a.alias_merge);
  opts.threads = a.threads;
  const auto set = enrich_all_prototypes(specs, retriever, vlm, config, opts);

  BankBuilder builder(set.dim, vlm.space_tag());
  for (std::size_t n = 0; n < set.size(); ++n) {
    const bool partial = std::find(set.partial_classes.begin(), set.partial_classes.end(),
                                   n) != set.partial_classes.end();
    builder.append(set.row(n), specs[n].name, partial ? "zero-shot" : "enriched");
  }
  save_bank(std::move(builder).finalize(), a.out);
}

// ---- classify ---------------------------------------------------------------

struct ClassifyArgs {
  std::string classes;
  std::string queries;
  std::string prototypes;
  std::string enriched_prototypes;
  std::string vlm_text_bank;
  std::string vlm_index;
  std::size_t nprobe = 8;
  std::string config;
  std::size_t m = 5;
  int threads = 1;
  std::string out;
};

PrototypeSet prototypes_from_bank(const EmbeddingBank& bank, PrototypeKind kind) {
  PrototypeSet set;
  set.dim = bank.dim();
  set.kind = kind;
  const auto m = bank.matrix();
  set.matrix.assign(m.begin(), m.end());
  return set;
}

void cmd_classify(const ClassifyArgs& a) {
  const auto config = load_config_or_default(a.config);
  const auto queries = load_bank(a.queries);

  PrototypeSet prototypes;
  bool enriched = false;
  if (!a.enriched_prototypes.empty()) {
    prototypes = prototypes_from_bank(load_bank(a.enriched_prototypes), PrototypeKind::kFinal);
    enriched = true;
  } else if (!a.prototypes.empty()) {
    const auto bank = load_bank(a.prototypes);
    if (a.classes.empty()) {
      prototypes = prototypes_from_bank(bank, PrototypeKind::kZeroShot);
    } else {
      // Alias rows are merged per class.
      prototypes = zeroshot_prototypes(build_class_specs(load_class_config(a.classes), bank, bank));
    }
  } else {
    throw Error(ErrorCode::kInvalidConfig, "need --prototypes or --enriched-prototypes");
  }

  std::optional<EmbeddingBank> captions;
  std::optional<Retriever> retriever;
  if (config.beta != 0.0) {
    if (a.vlm_text_bank.empty()) {
      throw Error(ErrorCode::kInvalidConfig, "beta > 0 needs --vlm-text-bank");
    }
    captions = load_bank(a.vlm_text_bank);
    retriever.emplace(make_retriever(*captions, a.vlm_index, a.nprobe));
  }
  const std::size_t m = std::min(a.m, prototypes.size());

  std::vector<Prediction> predictions(queries.count());
  parallel_for(queries.count(), a.threads, [&](std::size_t i) {
    try {
      const auto q = QueryEmbedding::from_bank_row(queries, i);
      std::vector<RetrievalHit> hits;
      if (retriever) hits = retriever->search(q, config.k);
      auto p = classify_with_hits(static_cast<std::int64_t>(i), q.vector, hits, prototypes,
                                  enriched, captions ? &*captions : nullptr, config);
      p.ranked.resize(m);
      predictions[i] = std::move(p);
    } catch (const Error& e) {
      throw e.with_context("query " + std::to_string(i));
    }
  });

  std::string text;
  for (const auto& p : predictions) text += to_jsonl(p) + "\n";
  write_output(a.out, text);
}

// ---- eval / sweep -----------------------------------------------------------

struct DataArgs {
  std::string data;
  std::string config;
  std::string index = "exact";
  std::size_t nprobe = 8;
  std::size_t clusters = 0;
  std::string llm_index;
  std::string vlm_index;
  std::uint64_t seed = 0;
  std::string alias_merge = "before";
  std::vector<int> ms = {1, 5};
  int threads = 1;
  std::string format;
  bool no_timings = false;
  std::string out;
};

std::optional<IvfIndex> index_for(const EmbeddingBank& bank, const std::string& path,
                                  const DataArgs& a) {
  if (!path.empty()) return load_ivf(path, bank);
  IvfBuildOptions opts;
  opts.n_clusters = a.clusters != 0
                        ? a.clusters
                        : std::max<std::size_t>(
                              1, static_cast<std::size_t>(std::sqrt(double(bank.count()))));
  opts.seed = a.seed;
  opts.threads = a.threads;
  return build_ivf(bank, opts);
}

EvalInputs load_inputs(const DataArgs& a, EvalOptions& opts) {
  auto inputs = load_eval_dir(a.data);
  opts.alias_merge = parse_alias_merge(a.alias_merge);
  opts.ms = a.ms;
  opts.threads = a.threads;
  if (a.index == "exact") {
    opts.index_mode = IndexMode::exact();
  } else if (a.index == "ivf") {
    opts.index_mode = IndexMode::ivf(a.nprobe);
    inputs.llm_index = index_for(inputs.llm_bank, a.llm_index, a);
    inputs.vlm_index = index_for(inputs.vlm_text_bank, a.vlm_index, a);
  } else {
    throw Error(ErrorCode::kInvalidConfig, "index must be 'exact' or 'ivf'");
  }
  return inputs;
}

void emit(const std::vector<EvalReport>& reports, const DataArgs& a,
          const std::string& default_format) {
  const auto format = parse_report_format(a.format.empty() ? default_format : a.format);
  if (reports.empty()) throw Error(ErrorCode::kInvalidConfig, "no reports to emit");
  const std::string text = format == ReportFormat::kJson
                               ? reports_to_json(reports, !a.no_timings)
                               : reports_to_csv(reports);
  write_output(a.out, text);
}

void cmd_eval(const DataArgs& a) {
  EvalOptions opts;
  const auto inputs = load_inputs(a, opts);
  const auto config = load_config_or_default(a.config);
  emit({run_eval(inputs, config, opts)}, a, "json");
}

void cmd_sweep(const DataArgs& a, const std::string& grid_path, bool ladder) {
  EvalOptions opts;
  const auto inputs = load_inputs(a, opts);
  const auto base = load_config_or_default(a.config);
  std::vector<EvalReport> reports;
  if (ladder) {
    const auto configs = ablation_ladder(base);
    reports = run_sweep(configs, inputs, opts);
  } else {
    reports = run_sweep(parse_sweep_grid(read_file(grid_path)), base, inputs, opts);
  }
  emit(reports, a, "csv");
}

// ---- fixture ----------------------------------------------------------------

void cmd_fixture(const FixtureParams& p, const std::string& out) {
  save_fixture(synth_fixture(p), out);
  spdlog::info("wrote synthetic fixture (seed {}) to {}", p.seed, out);
}

int run(int argc, char** argv) {
  CLI::App app{"Retrieval-enriched zero-shot classification over embedding banks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "retroclass 0.1.0");

  // bank
  auto* bank = app.add_subcommand("bank", "Build or inspect embedding bank files");
  bank->require_subcommand(1);
  BankBuildArgs bb;
  auto* bank_build = bank->add_subcommand("build", "Build a bank from JSONL records");
  bank_build->add_option("--input", bb.input,
                         "JSONL, one {\"embedding\": [...], \"text\": ..., \"source\": ...} per line")
      ->required();
  bank_build->add_option("--space-tag", bb.space_tag, "Embedding space tag, e.g. vlm-text")
      ->required();
  bank_build->add_option("--out", bb.out, "Output bank path")->required();
  bank_build->callback([&] { cmd_bank_build(bb); });

  BankInspectArgs bi;
  auto* bank_inspect = bank->add_subcommand("inspect", "Print bank header and records");
  bank_inspect->add_option("bank", bi.bank, "Bank file")->required();
  bank_inspect->add_option("--rows", bi.rows, "Caption records to print");
  bank_inspect->add_option("--out", bi.out, "Output path (default stdout)");
  bank_inspect->callback([&] { cmd_bank_inspect(bi); });

  // index
  auto* index = app.add_subcommand("index", "Build IVF indexes");
  index->require_subcommand(1);
  IndexBuildArgs ib;
  auto* index_build = index->add_subcommand("build", "Cluster a bank into an IVF index");
  index_build->add_option("--bank", ib.bank, "Bank file")->required();
  index_build->add_option("--clusters", ib.clusters, "Number of clusters")->required();
  index_build->add_option("--seed", ib.seed, "k-means seed");
  index_build->add_option("--max-iters", ib.max_iters, "k-means iteration cap");
  index_build->add_option("--train-size", ib.train_size,
                          "Rows sampled for training (0 = all)");
  index_build->add_option("--threads", ib.threads, "Worker threads (0 = auto)");
  index_build->add_option("--out", ib.out, "Output index path")->required();
  index_build->callback([&] { cmd_index_build(ib); });

  // retrieve
  RetrieveArgs rt;
  auto* retrieve = app.add_subcommand("retrieve", "Top-k search for every row of a query bank");
  retrieve->add_option("--bank", rt.bank, "Bank to search")->required();
  retrieve->add_option("--queries", rt.queries, "Query bank")->required();
  retrieve->add_option("--index", rt.index, "IVF index for --bank (default exact scan)");
  retrieve->add_option("--nprobe", rt.nprobe, "Clusters probed with --index");
  retrieve->add_option("-k,--k", rt.k, "Hits per query");
  retrieve->add_flag("--with-text", rt.with_text, "Join caption text from the sidecar");
  retrieve->add_option("--threads", rt.threads, "Worker threads (0 = auto)");
  retrieve->add_option("--out", rt.out, "Output JSONL (default stdout)");
  retrieve->callback([&] { cmd_retrieve(rt); });

  // prompts
  PromptsArgs pr;
  auto* prompts = app.add_subcommand("prompts", "Render prompt texts in bank row order");
  prompts->add_option("--classes", pr.classes, "Class config JSON")->required();
  prompts->add_option("--kind", pr.kind, "zeroshot or retrieval");
  prompts->add_option("--out", pr.out, "Output path (default stdout)");
  prompts->callback([&] { cmd_prompts(pr); });

  // enrich-prototypes
  EnrichArgs en;
  auto* enrich = app.add_subcommand("enrich-prototypes",
                                    "Enrich class prototypes with retrieved captions");
  enrich->add_option("--classes", en.classes, "Class config JSON")->required();
  enrich->add_option("--prototypes", en.prototypes, "Zero-shot prompt embeddings")->required();
  enrich->add_option("--retrieval-queries", en.retrieval_queries,
                     "Retrieval prompt embeddings (LLM space)")
      ->required();
  enrich->add_option("--llm-bank", en.llm_bank, "Caption bank in LLM space")->required();
  enrich->add_option("--vlm-text-bank", en.vlm_text_bank, "Caption bank in VLM text space")
      ->required();
  enrich->add_option("--llm-index", en.llm_index, "IVF index for --llm-bank");
  enrich->add_option("--nprobe", en.nprobe, "Clusters probed with --llm-index");
  enrich->add_option("--config", en.config, "Enrichment config JSON");
  enrich->add_option("--alias-merge", en.alias_merge, "before or after enrichment");
  enrich->add_option("--threads", en.threads, "Worker threads (0 = auto)");
  enrich->add_option("--out", en.out, "Output prototype bank")->required();
  enrich->callback([&] { cmd_enrich_prototypes(en); });

  // classify
  ClassifyArgs cl;
  auto* classify = app.add_subcommand("classify", "Rank classes for every query");
  classify->add_option("--queries", cl.queries, "Query bank (image space)")->required();
  classify->add_option("--classes", cl.classes, "Class config JSON (merges alias rows)");
  classify->add_option("--prototypes", cl.prototypes, "Zero-shot prompt embeddings");
  classify->add_option("--enriched-prototypes", cl.enriched_prototypes,
                       "Output of enrich-prototypes");
  classify->add_option("--vlm-text-bank", cl.vlm_text_bank,
                       "Caption bank for query enrichment");
  classify->add_option("--vlm-index", cl.vlm_index, "IVF index for --vlm-text-bank");
  classify->add_option("--nprobe", cl.nprobe, "Clusters probed with --vlm-index");
  classify->add_option("--config", cl.config, "Enrichment config JSON");
  classify->add_option("-m,--m", cl.m, "Classes listed per query");
  classify->add_option("--threads", cl.threads, "Worker threads (0 = auto)");
  classify->add_option("--out", cl.out, "Output JSONL (default stdout)");
  classify->callback([&] { cmd_classify(cl); });

  // eval, sweep
  DataArgs ev;
  DataArgs sw;
  std::string grid;
  bool ladder = false;
  for (auto [args, name, help] :
       {std::tuple{&ev, "eval", "Evaluate one configuration on a dataset directory"},
        std::tuple{&sw, "sweep", "Evaluate a grid of configurations"}}) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("--data", args->data, "Directory written by `fixture` or laid out alike")
        ->required();
    cmd->add_option("--config", args->config, "Enrichment config JSON");
    cmd->add_option("--index", args->index, "exact or ivf");
    cmd->add_option("--nprobe", args->nprobe, "Clusters probed in ivf mode");
    cmd->add_option("--clusters", args->clusters,
                    "Clusters when building indexes on the fly (default sqrt(rows))");
    cmd->add_option("--llm-index", args->llm_index, "Prebuilt IVF index for llm.bank");
    cmd->add_option("--vlm-index", args->vlm_index, "Prebuilt IVF index for vlm_text.bank");
    cmd->add_option("--seed", args->seed, "k-means seed for on-the-fly indexes");
    cmd->add_option("--alias-merge", args->alias_merge, "before or after enrichment");
    cmd->add_option("--ms", args->ms, "Accuracy cutoffs")->delimiter(',');
    cmd->add_option("--threads", args->threads, "Worker threads (0 = auto)");
    cmd->add_option("--format", args->format, "json or csv");
    cmd->add_flag("--no-timings", args->no_timings, "Omit wall-time fields from JSON");
    cmd->add_option("--out", args->out, "Output path (default stdout)");
    if (args == &sw) {
      auto* g = cmd->add_option("--grid", grid, "Sweep grid JSON");
      auto* l = cmd->add_flag("--ladder", ladder, "Five-step component ablation");
      g->excludes(l);
      cmd->callback([&] {
        if (grid.empty() && !ladder) {
          throw Error(ErrorCode::kEmptyGrid, "sweep needs --grid or --ladder");
        }
        cmd_sweep(sw, grid, ladder);
      });
    } else {
      cmd->callback([&] { cmd_eval(ev); });
    }
  }

  // fixture
  FixtureParams fp;
  std::string fixture_out;
  auto* fixture = app.add_subcommand("fixture", "Write a synthetic evaluation dataset");
  fixture->add_option("--seed", fp.seed, "RNG seed");
  fixture->add_option("--n-classes", fp.n_classes, "Number of classes");
  fixture->add_option("--dim", fp.dim, "Embedding dimension");
  fixture->add_option("--queries-per-class", fp.queries_per_class);
  fixture->add_option("--captions-per-class", fp.captions_per_class);
  fixture->add_option("--prototype-noise", fp.prototype_noise);
  fixture->add_option("--caption-noise", fp.caption_noise);
  fixture->add_option("--query-noise", fp.query_noise);
  fixture->add_option("--out", fixture_out, "Output directory")->required();
  fixture->callback([&] { cmd_fixture(fp, fixture_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging_from_env();
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
}
