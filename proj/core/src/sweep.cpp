#include <nlohmann/json.hpp>

#include <map>
#include <memory>

#include "retroclass/error.hpp"
#include "retroclass/harness.hpp"
#include "retroclass/parallel.hpp"

namespace retroclass {

namespace {

template <class T>
std::vector<T> axis_or(const std::vector<T>& axis, T fallback) {
  return axis.empty() ? std::vector<T>{fallback} : axis;
}

}  // namespace

std::vector<EnrichmentConfig> SweepGrid::expand(const EnrichmentConfig& base) const {
  if (alphas.empty() && betas.empty() && taus_tt.empty() && taus_it.empty() &&
      toggles.empty()) {
    throw Error(ErrorCode::kEmptyGrid, "sweep grid has no axes");
  }
  const auto t = axis_or<std::pair<bool, bool>>(
      toggles, {base.use_temperature_tt, base.use_temperature_it});
  const auto tt = axis_or(taus_tt, base.tau_tt);
  const auto it = axis_or(taus_it, base.tau_it);
  const auto a = axis_or(alphas, base.alpha);
  const auto b = axis_or(betas, base.beta);

  std::vector<EnrichmentConfig> out;
  out.reserve(t.size() * tt.size() * it.size() * a.size() * b.size());
  for (const auto& [use_tt, use_it] : t) {
    for (double tau_tt : tt) {
      for (double tau_it : it) {
        for (double alpha : a) {
          for (double beta : b) {
            EnrichmentConfig c = base;
            c.use_temperature_tt = use_tt;
            c.use_temperature_it = use_it;
            c.tau_tt = tau_tt;
            c.tau_it = tau_it;
            c.alpha = alpha;
            c.beta = beta;
            c.validate();
            out.push_back(c);
          }
        }
      }
    }
  }
  return out;
}

SweepGrid parse_sweep_grid(std::string_view json) {
  SweepGrid g;
  try {
    const auto j = nlohmann::json::parse(json);
    if (!j.is_object()) throw Error(ErrorCode::kInvalidConfig, "sweep grid must be an object");
    g.alphas = j.value("alpha", std::vector<double>{});
    g.betas = j.value("beta", std::vector<double>{});
    g.taus_tt = j.value("tau_tt", std::vector<double>{});
    g.taus_it = j.value("tau_it", std::vector<double>{});
    if (j.contains("use_temperature")) {
      for (const auto& pair : j.at("use_temperature")) {
        g.toggles.emplace_back(pair.at(0).get<bool>(), pair.at(1).get<bool>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("sweep grid: ") + e.what());
  }
  return g;
}

std::vector<EnrichmentConfig> ablation_ladder(const EnrichmentConfig& base) {
  base.validate();
  std::vector<EnrichmentConfig> ladder;

  EnrichmentConfig c = base;
  c.alpha = 0.0;
  c.beta = 0.0;
  c.use_temperature_tt = false;
  c.use_temperature_it = false;
  ladder.push_back(c);  // zero-shot

  c.alpha = base.alpha;
  ladder.push_back(c);  // prototype enrichment, uniform weights

  c.use_temperature_tt = true;
  ladder.push_back(c);

  c.beta = base.beta;
  ladder.push_back(c);  // query enrichment, uniform weights

  c.use_temperature_it = true;
  ladder.push_back(c);
  return ladder;
}

std::vector<EvalReport> run_sweep(std::span<const EnrichmentConfig> configs,
                                  const EvalInputs& inputs,
                                  const EvalOptions& options) {
  if (configs.empty()) throw Error(ErrorCode::kEmptyGrid, "no configurations to evaluate");
  for (const auto& c : configs) c.validate();

  // One retrieval pass per distinct k, then grid points in parallel.
  std::map<std::size_t, std::unique_ptr<Evaluator>> evaluators;
  for (const auto& c : configs) {
    auto& ev = evaluators[c.k];
    if (!ev) ev = std::make_unique<Evaluator>(inputs, c.k, options);
  }
  std::vector<EvalReport> reports(configs.size());
  parallel_for(configs.size(), options.threads, [&](std::size_t i) {
    try {
      reports[i] = evaluators.at(configs[i].k)->evaluate(configs[i], 1);
    } catch (const Error& e) {
      throw e.with_context("sweep point " + std::to_string(i));
    }
  });
  return reports;
}

std::vector<EvalReport> run_sweep(const SweepGrid& grid, const EnrichmentConfig& base,
                                  const EvalInputs& inputs,
                                  const EvalOptions& options) {
  const auto configs = grid.expand(base);
  return run_sweep(configs, inputs, options);
}

}  // namespace retroclass
