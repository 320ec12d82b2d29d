#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "retroclass/error.hpp"
#include "retroclass/harness.hpp"

namespace retroclass {

namespace {

void check_params(const FixtureParams& p) {
  const auto bad = [](const std::string& why) {
    return Error(ErrorCode::kInvalidFixture, why);
  };
  if (p.n_classes == 0) throw bad("n_classes must be >= 1");
  if (p.dim == 0) throw bad("dim must be >= 1");
  if (p.queries_per_class == 0) throw bad("queries_per_class must be >= 1");
  if (p.captions_per_class == 0) throw bad("captions_per_class must be >= 1");
  for (double eta : {p.prototype_noise, p.caption_noise, p.query_noise}) {
    if (!std::isfinite(eta) || eta < 0.0) throw bad("noise levels must be finite and >= 0");
  }
  if (p.prototype_noise < p.caption_noise) {
    throw bad("prototype noise must be >= caption noise");
  }
}

std::string class_name(std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "class_%03zu", n);
  return buf;
}

// Random unit vectors; orthonormalized (modified Gram-Schmidt) when n <= dim.
std::vector<std::vector<double>> make_centers(std::size_t n, std::size_t dim,
                                              std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> centers(n, std::vector<double>(dim));
  for (auto& c : centers) {
    for (auto& x : c) x = gauss(rng);
  }
  const bool orthogonalize = n <= dim;
  for (std::size_t i = 0; i < n; ++i) {
    auto& c = centers[i];
    if (orthogonalize) {
      for (std::size_t j = 0; j < i; ++j) {
        double proj = 0.0;
        for (std::size_t d = 0; d < dim; ++d) proj += c[d] * centers[j][d];
        for (std::size_t d = 0; d < dim; ++d) c[d] -= proj * centers[j][d];
      }
    }
    double norm = 0.0;
    for (double x : c) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : c) x /= norm;
  }
  return centers;
}

class NoisySampler {
 public:
  NoisySampler(std::mt19937_64& rng, std::size_t dim) : rng_(rng), dim_(dim) {}

  std::vector<float> operator()(const std::vector<double>& center, double eta) {
    const double sigma = eta / std::sqrt(static_cast<double>(dim_));
    std::vector<float> v(dim_);
    for (std::size_t d = 0; d < dim_; ++d) {
      v[d] = static_cast<float>(center[d] + sigma * gauss_(rng_));
    }
    return v;
  }

 private:
  std::mt19937_64& rng_;
  std::size_t dim_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write failed for '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dataset_name(std::uint64_t seed) {
  return "synthetic-seed" + std::to_string(seed);
}

}  // namespace

Fixture synth_fixture(const FixtureParams& params) {
  check_params(params);
  const std::size_t n = params.n_classes;
  const std::size_t dim = params.dim;

  std::mt19937_64 rng(params.seed);
  const auto centers = make_centers(n, dim, rng);
  NoisySampler noisy(rng, dim);

  Fixture fx;
  fx.params = params;
  for (std::size_t c = 0; c < n; ++c) fx.classes.classes.push_back({class_name(c), {}});
  const auto zs_prompts = render_prompts(fx.classes, PromptKind::kZeroShot);
  const auto rt_prompts = render_prompts(fx.classes, PromptKind::kRetrieval);

  BankBuilder prototypes(dim, "vlm-text");
  for (std::size_t c = 0; c < n; ++c) {
    prototypes.append(noisy(centers[c], params.prototype_noise), zs_prompts[c]);
  }
  BankBuilder retrieval(dim, "llm-text");
  for (std::size_t c = 0; c < n; ++c) {
    retrieval.append(noisy(centers[c], params.prototype_noise), rt_prompts[c]);
  }

  BankBuilder llm(dim, "llm-text");
  BankBuilder vlm(dim, "vlm-text");
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t i = 0; i < params.captions_per_class; ++i) {
      const auto v = noisy(centers[c], params.caption_noise);
      const std::string text =
          "synthetic caption " + std::to_string(i) + " of " + class_name(c);
      llm.append(v, text, "synthetic");
      vlm.append(v, text, "synthetic");
    }
  }

  BankBuilder queries(dim, "vlm-image");
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t i = 0; i < params.queries_per_class; ++i) {
      queries.append(noisy(centers[c], params.query_noise),
                     "query " + std::to_string(c * params.queries_per_class + i));
      fx.labels.push_back(c);
    }
  }

  fx.prototypes = std::move(prototypes).finalize();
  fx.retrieval_queries = std::move(retrieval).finalize();
  fx.llm_bank = std::move(llm).finalize();
  fx.vlm_text_bank = std::move(vlm).finalize();
  fx.queries = std::move(queries).finalize();
  for (const auto& c : centers) fx.centers.emplace_back(c.begin(), c.end());
  return fx;
}

EvalInputs Fixture::eval_inputs() const {
  EvalInputs in;
  in.dataset = dataset_name(params.seed);
  in.queries = queries;
  in.labels = labels;
  in.classes = build_class_specs(classes, prototypes, retrieval_queries);
  in.llm_bank = llm_bank;
  in.vlm_text_bank = vlm_text_bank;
  return in;
}

std::vector<std::size_t> load_labels(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_text(path)).at("labels").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, "labels file: " + std::string(e.what()));
  }
}

void save_labels(std::span<const std::size_t> labels,
                 const std::filesystem::path& path) {
  nlohmann::json j;
  j["labels"] = std::vector<std::size_t>(labels.begin(), labels.end());
  write_text(path, j.dump() + "\n");
}

void save_fixture(const Fixture& fx, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create '" + dir.string() + "'");

  save_bank(fx.queries, dir / "queries.bank");
  save_bank(fx.prototypes, dir / "prototypes.bank");
  save_bank(fx.retrieval_queries, dir / "retrieval_queries.bank");
  save_bank(fx.llm_bank, dir / "llm.bank");
  save_bank(fx.vlm_text_bank, dir / "vlm_text.bank");
  save_labels(fx.labels, dir / "labels.json");
  save_class_config(fx.classes, dir / "classes.json");

  const auto& p = fx.params;
  nlohmann::ordered_json meta;
  meta["dataset"] = dataset_name(p.seed);
  meta["seed"] = p.seed;
  meta["n_classes"] = p.n_classes;
  meta["dim"] = p.dim;
  meta["queries_per_class"] = p.queries_per_class;
  meta["prototype_noise"] = p.prototype_noise;
  meta["caption_noise"] = p.caption_noise;
  meta["captions_per_class"] = p.captions_per_class;
  meta["query_noise"] = p.query_noise;
  write_text(dir / "fixture.json", meta.dump(2) + "\n");
}

EvalInputs load_eval_dir(const std::filesystem::path& dir) {
  EvalInputs in;
  in.dataset = dir.filename().string();
  if (std::filesystem::exists(dir / "fixture.json")) {
    try {
      const auto meta = nlohmann::json::parse(read_text(dir / "fixture.json"));
      in.dataset = meta.value("dataset", in.dataset);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidConfig, "fixture.json: " + std::string(e.what()));
    }
  }
  in.queries = load_bank(dir / "queries.bank");
  in.labels = load_labels(dir / "labels.json");
  const auto classes = load_class_config(dir / "classes.json");
  in.classes = build_class_specs(classes, load_bank(dir / "prototypes.bank"),
                                 load_bank(dir / "retrieval_queries.bank"));
  in.llm_bank = load_bank(dir / "llm.bank");
  in.vlm_text_bank = load_bank(dir / "vlm_text.bank");
  return in;
}

}  // namespace retroclass
