#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "retroclass/enrich.hpp"
#include "retroclass/error.hpp"
#include "testing.hpp"

using namespace retroclass;
using rtest::error_code_of;

namespace {

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

double norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += double(x) * x;
  return std::sqrt(s);
}

RetrievedCaptions captions_for(const EmbeddingBank& bank, std::vector<RetrievalHit> hits) {
  return gather_captions(std::move(hits), bank);
}

// HAM-like toy: 7 classes, captions clustered by class in both spaces.
struct Toy {
  std::vector<ClassSpec> specs;
  EmbeddingBank llm;
  EmbeddingBank vlm;
};

Toy toy(rtest::Gen& gen, std::size_t n_classes, std::size_t captions, std::size_t dim) {
  ClassConfig cfg;
  for (std::size_t n = 0; n < n_classes; ++n) cfg.classes.push_back({"c" + std::to_string(n), {}});
  const auto protos = gen.bank(n_classes, dim, false, "vlm-text");
  const auto queries = gen.bank(n_classes, dim, false, "llm-text");
  BankBuilder llm(dim, "llm-text"), vlm(dim, "vlm-text");
  for (std::size_t i = 0; i < captions; ++i) {
    const auto v = gen.nonzero_vector(dim, false);
    llm.append(v, "cap " + std::to_string(i));
    vlm.append(gen.nonzero_vector(dim, false), "cap " + std::to_string(i));
  }
  return {build_class_specs(cfg, protos, queries), std::move(llm).finalize(),
          std::move(vlm).finalize()};
}

}  // namespace

TEST(Softmax, EqualScoresAreUniform) {
  for (double tau : {1e-3, 1.0, 100.0}) {
    const std::vector<double> s = {0.5, 0.5, 0.5};
    for (double w : softmax_weights(s, tau)) EXPECT_NEAR(w, 1.0 / 3.0, 1e-12);
  }
}

TEST(Softmax, ClosedFormTwoPoint) {
  const std::vector<double> s = {1.0, 0.0};
  const auto w = softmax_weights(s, 1.0);
  // e / (1 + e) and 1 / (1 + e)
  const double e = std::exp(1.0);
  EXPECT_NEAR(w[0], e / (1.0 + e), 1e-12);
  EXPECT_NEAR(w[0], 0.731059, 1e-5);
  EXPECT_NEAR(w[1], 0.268941, 1e-5);
}

TEST(Softmax, HighTemperatureIsNearUniform) {
  rtest::Gen gen(1);
  for (int t = 0; t < 500; ++t) {
    const std::size_t k = gen.size(1, 50);
    std::vector<double> s(k);
    for (auto& x : s) x = gen.uniform(-1.0, 1.0);
    // Every weight lies within a factor exp(spread / tau) of 1 / k.
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    const double slack = std::expm1((*hi - *lo) / 100.0);
    for (double w : softmax_weights(s, 100.0)) {
      ASSERT_LE(std::abs(w * k - 1.0), slack + 1e-12);
    }
  }
}

TEST(Softmax, Errors) {
  EXPECT_EQ(error_code_of([] { softmax_weights({}, 1.0); }), ErrorCode::kEmptyScores);
  const std::vector<double> s = {1.0};
  EXPECT_EQ(error_code_of([&] { softmax_weights(s, 0.0); }), ErrorCode::kInvalidTemperature);
  EXPECT_EQ(error_code_of([&] { softmax_weights(s, -1.0); }), ErrorCode::kInvalidTemperature);
  const std::vector<double> bad = {1.0, NAN};
  EXPECT_EQ(error_code_of([&] { softmax_weights(bad, 1.0); }), ErrorCode::kInvalidWeights);
}

TEST(SoftmaxProperty, ContractOverRandomVectors) {
  rtest::Gen gen(2);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t k = gen.size(1, 64);
    const double tau = std::exp(gen.uniform(std::log(1e-3), std::log(1e3)));
    std::vector<double> s(k);
    for (auto& x : s) x = gen.uniform(-1.0, 1.0);
    const auto w = softmax_weights(s, tau);
    ASSERT_NEAR(sum(w), 1.0, 1e-6);
    const double shift = gen.uniform(-50.0, 50.0);
    auto shifted = s;
    for (auto& x : shifted) x += shift;
    const auto ws = softmax_weights(shifted, tau);
    for (std::size_t i = 0; i < k; ++i) {
      ASSERT_TRUE(std::isfinite(w[i]));
      ASSERT_NEAR(ws[i], w[i], 1e-6);
      for (std::size_t j = 0; j < k; ++j) {
        if (s[i] > s[j]) {
          ASSERT_GE(w[i], w[j]);
        }
      }
    }
  }
}

TEST(SoftmaxProperty, LimitsAndStability) {
  rtest::Gen gen(3);
  for (int t = 0; t < 500; ++t) {
    // k <= 20 keeps (k - 1) * exp(-10) below the 1e-3 concentration slack.
    const std::size_t k = gen.size(2, 20);
    std::vector<double> s(k);
    for (auto& x : s) x = gen.uniform(-1.0, 1.0);
    for (double w : softmax_weights(s, 1e6)) ASSERT_LE(std::abs(w - 1.0 / k), 1e-4 / k);

    // Top score separated by at least 0.01.
    const auto top = std::max_element(s.begin(), s.end()) - s.begin();
    for (std::size_t i = 0; i < k; ++i) {
      if (std::ptrdiff_t(i) != top) s[i] = std::min(s[i], s[top] - 0.01 - gen.uniform(0, 0.5));
    }
    ASSERT_GE(softmax_weights(s, 1e-3)[std::size_t(top)], 0.999);

    for (auto& x : s) x = gen.uniform(-10.0, 10.0);
    const auto w = softmax_weights(s, 1e-3);  // |s / tau| up to 1e4
    for (double x : w) ASSERT_TRUE(std::isfinite(x));
    ASSERT_NEAR(sum(w), 1.0, 1e-6);
  }
}

TEST(UniformWeights, Basics) {
  const auto w = uniform_weights(4);
  for (double x : w) EXPECT_DOUBLE_EQ(x, 0.25);
  EXPECT_EQ(error_code_of([] { uniform_weights(0); }), ErrorCode::kEmptyScores);
}

TEST(WeightedCentroid, Examples) {
  const std::vector<float> a = {1, 0}, b = {0, 1};
  const std::vector<std::span<const float>> one = {a};
  const std::vector<double> w1 = {1.0};
  EXPECT_EQ(weighted_centroid(one, w1), a);
  const std::vector<std::span<const float>> two = {a, b};
  const std::vector<double> half = {0.5, 0.5};
  EXPECT_EQ(weighted_centroid(two, half), (std::vector<float>{0.5f, 0.5f}));
  EXPECT_EQ(error_code_of([&] { weighted_centroid(two, w1); }), ErrorCode::kLengthMismatch);
  const std::vector<double> unnormalized = {0.5, 0.6};
  EXPECT_EQ(error_code_of([&] { weighted_centroid(two, unnormalized); }),
            ErrorCode::kInvalidWeights);
  const std::vector<double> negative = {1.5, -0.5};
  EXPECT_EQ(error_code_of([&] { weighted_centroid(two, negative); }),
            ErrorCode::kInvalidWeights);
}

TEST(WeightedCentroid, MatchesExtendedPrecisionOracle) {
  rtest::Gen gen(4);
  for (int t = 0; t < 200; ++t) {
    const auto bank = gen.bank(10, 16, false, "x");
    std::vector<std::span<const float>> es;
    std::vector<double> s;
    for (std::size_t i = 0; i < 10; ++i) {
      es.push_back(bank.row(i));
      s.push_back(gen.uniform(-1, 1));
    }
    const auto w = softmax_weights(s, gen.uniform(0.01, 10.0));
    const auto c = weighted_centroid(es, w);
    for (std::size_t j = 0; j < 16; ++j) {
      long double acc = 0.0L;
      for (std::size_t i = 0; i < 10; ++i) acc += (long double)w[i] * es[i][j];
      ASSERT_NEAR(double(c[j]), double(acc), 1e-6);
    }
  }
}

TEST(EnrichPrototype, AlphaZeroIsIdentity) {
  rtest::Gen gen(5);
  const auto bank = gen.bank(20, 8, false, "vlm-text");
  EnrichmentConfig cfg;
  cfg.alpha = 0.0;
  for (bool renorm : {false, true}) {
    cfg.renormalize_output = renorm;
    const std::vector<float> w(bank.row(3).begin(), bank.row(3).end());
    const auto out = enrich_prototype(w, captions_for(bank, {{1, 0.9f}, {2, 0.5f}}), cfg);
    EXPECT_EQ(out.vector, w);
    EXPECT_FALSE(out.partial);
  }
}

TEST(EnrichPrototype, AlphaOneSingleCaption) {
  rtest::Gen gen(6);
  const auto bank = gen.bank(5, 8, false, "vlm-text");
  EnrichmentConfig cfg;
  cfg.alpha = 1.0;
  const std::vector<float> w(bank.row(0).begin(), bank.row(0).end());
  const auto out = enrich_prototype(w, captions_for(bank, {{4, 0.3f}}), cfg);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(out.vector[j], bank.row(4)[j], 1e-7);
}

TEST(EnrichPrototype, StepByStep) {
  rtest::Gen gen(7);
  const auto bank = gen.bank(12, 6, false, "vlm-text");
  EnrichmentConfig cfg;  // alpha 0.2, tau_tt 1
  const std::vector<float> w(bank.row(0).begin(), bank.row(0).end());
  const std::vector<RetrievalHit> hits = {{3, 0.8f}, {7, 0.6f}, {1, 0.1f}};
  const auto out = enrich_prototype(w, captions_for(bank, hits), cfg);

  // Independent scalar recomputation.
  double z = 0.0;
  double e[3];
  for (int i = 0; i < 3; ++i) z += e[i] = std::exp(double(hits[i].score) - 0.8f);
  std::vector<double> mixed(6);
  double n = 0.0;
  for (std::size_t j = 0; j < 6; ++j) {
    double c = 0.0;
    for (int i = 0; i < 3; ++i) c += e[i] / z * bank.row(std::size_t(hits[i].id))[j];
    mixed[j] = 0.2 * double(float(c)) + 0.8 * w[j];
    n += mixed[j] * mixed[j];
  }
  for (std::size_t j = 0; j < 6; ++j) {
    EXPECT_NEAR(out.vector[j], mixed[j] / std::sqrt(n), 1e-7);
  }
  EXPECT_NEAR(norm(out.vector), 1.0, 1e-6);
}

TEST(EnrichPrototype, TogglesOffEqualUniformAverage) {
  rtest::Gen gen(8);
  const auto bank = gen.bank(10, 5, false, "vlm-text");
  const std::vector<float> w(bank.row(0).begin(), bank.row(0).end());
  const std::vector<RetrievalHit> hits = {{2, 0.9f}, {5, 0.2f}, {9, -0.3f}};
  EnrichmentConfig off;
  off.use_temperature_tt = false;
  off.use_temperature_it = false;
  EnrichmentConfig huge = off;
  huge.use_temperature_tt = true;
  huge.tau_tt = 1e12;
  const auto a = enrich_prototype(w, captions_for(bank, hits), off);
  const auto b = enrich_prototype(w, captions_for(bank, hits), huge);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(a.vector[j], b.vector[j], 1e-7);
  const auto weighted = weigh_captions(captions_for(bank, hits), 1.0, false);
  for (double x : weighted.weights) EXPECT_DOUBLE_EQ(x, 1.0 / 3.0);
}

TEST(EnrichQuery, BetaZeroAndEmptyFallback) {
  rtest::Gen gen(9);
  const auto bank = gen.bank(10, 5, false, "vlm-text");
  const std::vector<float> u(bank.row(1).begin(), bank.row(1).end());
  EnrichmentConfig cfg;
  cfg.beta = 0.0;
  cfg.renormalize_output = false;
  EXPECT_EQ(enrich_query(u, captions_for(bank, {{3, 0.5f}}), cfg).vector, u);
  cfg.beta = 0.5;
  const auto empty = enrich_query(u, captions_for(bank, {}), cfg);
  EXPECT_EQ(empty.vector, u);
  EXPECT_TRUE(empty.partial);
}

TEST(GatherCaptions, MissingIdIsMisalignment) {
  rtest::Gen gen(10);
  const auto bank = gen.bank(3, 4, false, "vlm-text");
  EXPECT_EQ(error_code_of([&] { gather_captions({{3, 0.1f}}, bank); }),
            ErrorCode::kBankMisalignment);
}

TEST(EnrichAll, AlphaZeroEqualsZeroShot) {
  rtest::Gen gen(11);
  const auto t = toy(gen, 7, 60, 16);
  EnrichmentConfig cfg;
  cfg.alpha = 0.0;
  const auto set = enrich_all_prototypes(t.specs, Retriever(t.llm), t.vlm, cfg);
  EXPECT_EQ(set.matrix, zeroshot_prototypes(t.specs).matrix);
}

TEST(EnrichAll, SevenUnitRows) {
  rtest::Gen gen(12);
  const auto t = toy(gen, 7, 60, 16);
  const auto set = enrich_all_prototypes(t.specs, Retriever(t.llm), t.vlm, EnrichmentConfig{});
  ASSERT_EQ(set.size(), 7u);
  EXPECT_EQ(set.kind, PrototypeKind::kFinal);
  EXPECT_TRUE(set.partial_classes.empty());
  for (std::size_t n = 0; n < 7; ++n) EXPECT_NEAR(norm(set.row(n)), 1.0, 1e-4);
}

TEST(EnrichAll, EqualsPerClassComposition) {
  rtest::Gen gen(13);
  const auto t = toy(gen, 5, 40, 8);
  EnrichmentConfig cfg;
  cfg.k = 4;
  const auto set = enrich_all_prototypes(t.specs, Retriever(t.llm), t.vlm, cfg,
                                         {.threads = 3});
  for (std::size_t n = 0; n < 5; ++n) {
    const auto hits = exact_topk({t.specs[n].retrieval_query, "llm-text"}, t.llm, 4);
    const auto row = enrich_prototype(t.specs[n].prototype, gather_captions(hits, t.vlm), cfg);
    EXPECT_TRUE(std::equal(row.vector.begin(), row.vector.end(), set.row(n).begin()));
  }
}

TEST(EnrichAll, MisalignedBanks) {
  rtest::Gen gen(14);
  auto t = toy(gen, 3, 12, 8);
  const auto vlm10 = gen.bank(10, 8, false, "vlm-text");
  EXPECT_EQ(error_code_of([&] {
              enrich_all_prototypes(t.specs, Retriever(t.llm), vlm10, EnrichmentConfig{});
            }),
            ErrorCode::kBankMisalignment);
}

TEST(EnrichAll, AliasMergeModes) {
  rtest::Gen gen(15);
  ClassConfig cfg;
  cfg.classes = {{"a", {"a2"}}, {"b", {}}};
  const auto specs = build_class_specs(cfg, gen.bank(3, 6, false, "vlm-text"),
                                       gen.bank(3, 6, false, "llm-text"));
  const auto llm = gen.bank(30, 6, false, "llm-text");
  const auto vlm = gen.bank(30, 6, false, "vlm-text");
  const auto before = enrich_all_prototypes(specs, Retriever(llm), vlm, EnrichmentConfig{});
  const auto after = enrich_all_prototypes(specs, Retriever(llm), vlm, EnrichmentConfig{},
                                           {.alias_merge = AliasMerge::kAfterEnrichment});
  // Classes without aliases agree; both outputs are unit rows.
  EXPECT_TRUE(std::equal(before.row(1).begin(), before.row(1).end(), after.row(1).begin()));
  EXPECT_NEAR(norm(after.row(0)), 1.0, 1e-4);
}

TEST(EnrichmentConfig, JsonRoundTripAndValidation) {
  EnrichmentConfig c;
  c.k = 7;
  c.tau_it = 12.5;
  c.use_temperature_tt = false;
  EXPECT_EQ(parse_enrichment_config(to_json(c)), c);
  EXPECT_EQ(to_json(EnrichmentConfig{}),
            R"({"k":10,"tau_tt":1.0,"tau_it":100.0,"alpha":0.2,"beta":0.5,)"
            R"("use_temperature_tt":true,"use_temperature_it":true,"renormalize_output":true})");
  EXPECT_EQ(parse_enrichment_config("{}"), EnrichmentConfig{});
  for (const char* bad : {R"({"k":0})", R"({"tau_tt":0})", R"({"tau_it":-1})",
                          R"({"alpha":1.5})", R"({"beta":-0.1})", "[]", "{"}) {
    EXPECT_EQ(error_code_of([&] { parse_enrichment_config(bad); }), ErrorCode::kInvalidConfig)
        << bad;
  }
}
