#pragma once

// Reference results written by tests/reference/reference_pipeline.py.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "retroclass/harness.hpp"

namespace rtest {

struct GoldenResult {
  retroclass::EnrichmentConfig config;
  std::size_t n_queries = 0;
  std::map<int, double> acc_at;
  std::vector<double> per_class_acc;
};

struct Golden {
  std::string dataset;
  std::vector<GoldenResult> results;  // ablation ladder, then the default config
};

inline std::filesystem::path golden_path(std::uint64_t seed) {
  return std::filesystem::path(RETROCLASS_GOLDEN_DIR) /
         ("fixture_seed" + std::to_string(seed) + ".json");
}

inline Golden load_golden(std::uint64_t seed) {
  std::ifstream in(golden_path(seed));
  std::stringstream ss;
  ss << in.rdbuf();
  const auto j = nlohmann::json::parse(ss.str());
  Golden g;
  g.dataset = j.at("dataset").get<std::string>();
  for (const auto& r : j.at("results")) {
    GoldenResult gr;
    gr.config = retroclass::parse_enrichment_config(r.at("config").dump());
    gr.n_queries = r.at("n_queries").get<std::size_t>();
    for (const auto& [m, v] : r.at("acc_at").items()) gr.acc_at[std::stoi(m)] = v.get<double>();
    gr.per_class_acc = r.at("per_class_acc").get<std::vector<double>>();
    g.results.push_back(std::move(gr));
  }
  return g;
}

// Ladder plus default, evaluated the way the golden files were produced.
inline std::vector<retroclass::EvalReport> golden_reports(std::uint64_t seed) {
  retroclass::FixtureParams p;
  p.seed = seed;
  const auto fx = retroclass::synth_fixture(p);
  auto configs = retroclass::ablation_ladder({});
  configs.push_back({});
  return retroclass::run_sweep(configs, fx.eval_inputs());
}

inline bool matches_golden(const retroclass::EvalReport& r, const GoldenResult& g) {
  return r.config == g.config && r.n_queries == g.n_queries && r.acc_at == g.acc_at &&
         r.per_class_acc == g.per_class_acc;
}

}  // namespace rtest
