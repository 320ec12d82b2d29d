#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "retroclass/error.hpp"
#include "retroclass/harness.hpp"
#include "testing.hpp"

using namespace retroclass;
using rtest::error_code_of;

namespace {

FixtureParams small_params(std::uint64_t seed) {
  FixtureParams p;
  p.seed = seed;
  p.n_classes = 8;
  p.dim = 24;
  p.queries_per_class = 15;
  p.captions_per_class = 12;
  return p;
}

Prediction ranked(std::int64_t id, std::vector<std::size_t> classes) {
  Prediction p;
  p.query_id = id;
  double logit = 1.0;
  for (auto c : classes) p.ranked.push_back({c, logit -= 0.1});
  return p;
}

EnrichmentConfig zeroshot_config() {
  EnrichmentConfig c;
  c.alpha = 0;
  c.beta = 0;
  return c;
}

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST(Accuracy, PerfectAndNull) {
  const std::vector<std::size_t> labels = {0, 1, 2, 1};
  std::vector<Prediction> perfect, wrong;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    perfect.push_back(ranked(i, {labels[i], (labels[i] + 1) % 3, (labels[i] + 2) % 3}));
    wrong.push_back(ranked(i, {(labels[i] + 1) % 3}));
  }
  const std::vector<int> ms = {1, 3};
  const auto r = accuracy(perfect, labels, 3, ms);
  EXPECT_EQ(r.acc_at.at(1), 1.0);
  EXPECT_EQ(r.acc_at.at(3), 1.0);
  EXPECT_EQ(r.per_class_count, (std::vector<std::size_t>{1, 2, 1}));
  EXPECT_EQ(r.n_queries, 4u);
  const auto z = accuracy(wrong, labels, 3, ms);
  EXPECT_EQ(z.acc_at.at(1), 0.0);
  EXPECT_EQ(z.per_class_acc, (std::vector<double>{0, 0, 0}));
}

TEST(Accuracy, CountingOracleAndMonotoneInM) {
  rtest::Gen gen(1);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n_classes = gen.size(1, 12), n = gen.size(1, 60);
    std::vector<std::size_t> labels(n);
    std::vector<Prediction> preds;
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = gen.size(0, n_classes - 1);
      std::vector<std::size_t> order(n_classes);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), gen.rng());
      preds.push_back(ranked(i, order));
    }
    const std::vector<int> ms = {1, 2, 5};
    const auto r = accuracy(preds, labels, n_classes, ms);
    for (int m : ms) {
      std::size_t hits = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (int j = 0; j < m && j < static_cast<int>(n_classes); ++j) {
          if (preds[i].ranked[j].cls == labels[i]) ++hits;
        }
      }
      ASSERT_DOUBLE_EQ(r.acc_at.at(m), double(hits) / double(n));
    }
    EXPECT_LE(r.acc_at.at(1), r.acc_at.at(2));
    EXPECT_LE(r.acc_at.at(2), r.acc_at.at(5));

    double weighted = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) weighted += r.per_class_acc[c] * r.per_class_count[c];
    EXPECT_NEAR(weighted / double(n), r.acc_at.at(1), 1e-12);
  }
}

TEST(Accuracy, Errors) {
  const std::vector<Prediction> preds = {ranked(0, {0, 1})};
  const std::vector<std::size_t> two = {0, 1}, out_of_range = {5}, ok = {0};
  EXPECT_EQ(error_code_of([&] { accuracy(preds, two, 2); }), ErrorCode::kLabelMismatch);
  EXPECT_EQ(error_code_of([&] { accuracy(preds, out_of_range, 2); }),
            ErrorCode::kLabelMismatch);
  const std::vector<int> bad_m = {0};
  EXPECT_EQ(error_code_of([&] { accuracy(preds, ok, 2, bad_m); }), ErrorCode::kInvalidM);
}

TEST(RunEval, DisabledEnrichmentEqualsZeroShot) {
  const auto fx = synth_fixture(small_params(3));
  const auto inputs = fx.eval_inputs();
  const auto report = run_eval(inputs, zeroshot_config());

  const auto zs = zeroshot_prototypes(inputs.classes);
  std::vector<Prediction> preds;
  for (std::size_t i = 0; i < inputs.queries.count(); ++i) {
    const auto row = inputs.queries.row(i);
    preds.push_back({static_cast<std::int64_t>(i), predict_topk(logits(row, zs), zs.size()), false});
  }
  const std::vector<int> ms = {1, 5};
  auto expected = accuracy(preds, inputs.labels, zs.size(), ms);
  EXPECT_EQ(report.acc_at, expected.acc_at);
  EXPECT_EQ(report.per_class_acc, expected.per_class_acc);
}

TEST(RunEval, ExhaustiveIvfMatchesExact) {
  const auto fx = synth_fixture(small_params(4));
  auto inputs = fx.eval_inputs();
  IvfBuildOptions opt{.n_clusters = 6, .seed = 9};
  inputs.llm_index = build_ivf(inputs.llm_bank, opt);
  inputs.vlm_index = build_ivf(inputs.vlm_text_bank, opt);
  const EnrichmentConfig config;
  EvalOptions ivf;
  ivf.index_mode = IndexMode::ivf(6);
  const auto exact = run_eval(inputs, config);
  const auto approx = run_eval(inputs, config, ivf);
  EXPECT_EQ(approx.index_mode, "ivf(nprobe=6)");
  EXPECT_EQ(exact.acc_at, approx.acc_at);
  EXPECT_EQ(exact.per_class_acc, approx.per_class_acc);
}

TEST(RunEval, ThreadCountDoesNotChangeResults) {
  const auto fx = synth_fixture(small_params(5));
  const auto inputs = fx.eval_inputs();
  EvalOptions one, many;
  many.threads = 4;
  const EnrichmentConfig config;
  const Evaluator a(inputs, config.k, one), b(inputs, config.k, many);
  EXPECT_EQ(a.predict(config), b.predict(config));
  EXPECT_TRUE(a.evaluate(config).same_results(b.evaluate(config)));
}

TEST(RunEval, InputErrors) {
  const auto fx = synth_fixture(small_params(6));
  auto inputs = fx.eval_inputs();
  inputs.labels.pop_back();
  EXPECT_EQ(error_code_of([&] { run_eval(inputs, {}); }), ErrorCode::kLabelMismatch);

  inputs = fx.eval_inputs();
  EvalOptions ivf;
  ivf.index_mode = IndexMode::ivf(2);
  EXPECT_EQ(error_code_of([&] { run_eval(inputs, {}, ivf); }), ErrorCode::kInvalidConfig);

  inputs.classes.clear();
  EXPECT_EQ(error_code_of([&] { run_eval(inputs, {}); }), ErrorCode::kInvalidConfig);

  const Evaluator ev(fx.eval_inputs(), 10, {});
  EnrichmentConfig other_k;
  other_k.k = 3;
  EXPECT_EQ(error_code_of([&] { ev.predict(other_k); }), ErrorCode::kInvalidConfig);
}

TEST(Sweep, TwoByTwoGridContainsZeroShot) {
  const auto fx = synth_fixture(small_params(7));
  const auto inputs = fx.eval_inputs();
  SweepGrid grid;
  grid.alphas = {0.0, 0.5};
  grid.betas = {0.0, 0.5};
  const EnrichmentConfig base;
  const auto reports = run_sweep(grid, base, inputs);
  ASSERT_EQ(reports.size(), 4u);
  EXPECT_EQ(reports[0].config.alpha, 0.0);
  EXPECT_EQ(reports[0].config.beta, 0.0);
  EXPECT_EQ(reports[1].config.beta, 0.5);
  EXPECT_TRUE(reports[0].same_results(run_eval(inputs, reports[0].config)));
  const auto zs = run_eval(inputs, zeroshot_config());
  EXPECT_EQ(reports[0].acc_at, zs.acc_at);
}

TEST(Sweep, FullGridCsvHasOneRowPerPoint) {
  const auto fx = synth_fixture(small_params(8));
  SweepGrid grid;
  for (int i = 0; i <= 10; ++i) {
    grid.alphas.push_back(i / 10.0);
    grid.betas.push_back(i / 10.0);
  }
  const auto inputs = fx.eval_inputs();
  const auto reports = run_sweep(grid, EnrichmentConfig{}, inputs);
  ASSERT_EQ(reports.size(), 121u);
  EXPECT_EQ(count_lines(reports_to_csv(reports)), 122u);
}

TEST(Sweep, ParallelMatchesSequential) {
  const auto fx = synth_fixture(small_params(9));
  const auto inputs = fx.eval_inputs();
  const auto configs = ablation_ladder(EnrichmentConfig{});
  EvalOptions par;
  par.threads = 3;
  const auto a = run_sweep(configs, inputs);
  const auto b = run_sweep(configs, inputs, par);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(a[i].same_results(b[i]));
}

TEST(Sweep, EmptyGridAndParsing) {
  const auto fx = synth_fixture(small_params(10));
  EXPECT_EQ(error_code_of([&] { run_sweep(SweepGrid{}, {}, fx.eval_inputs()); }),
            ErrorCode::kEmptyGrid);
  const auto g = parse_sweep_grid(
      R"({"alpha": [0, 0.3], "tau_tt": [0.5], "use_temperature": [[true, false]]})");
  EXPECT_EQ(g.alphas, (std::vector<double>{0, 0.3}));
  EXPECT_EQ(g.toggles, (std::vector<std::pair<bool, bool>>{{true, false}}));
  const auto points = g.expand({});
  ASSERT_EQ(points.size(), 2u);
  EXPECT_EQ(points[1].tau_tt, 0.5);
  EXPECT_FALSE(points[1].use_temperature_it);
  EXPECT_EQ(error_code_of([] { parse_sweep_grid("[1]"); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(error_code_of([] { parse_sweep_grid(R"({"alpha": [2]})").expand({}); }),
            ErrorCode::kInvalidConfig);
}

TEST(Sweep, AblationLadder) {
  EnrichmentConfig base;
  base.alpha = 0.3;
  base.beta = 0.6;
  const auto l = ablation_ladder(base);
  ASSERT_EQ(l.size(), 5u);
  EXPECT_EQ(l[0].alpha, 0.0);
  EXPECT_EQ(l[0].beta, 0.0);
  EXPECT_EQ(l[1].alpha, 0.3);
  EXPECT_FALSE(l[1].use_temperature_tt);
  EXPECT_TRUE(l[2].use_temperature_tt);
  EXPECT_EQ(l[2].beta, 0.0);
  EXPECT_EQ(l[3].beta, 0.6);
  EXPECT_FALSE(l[3].use_temperature_it);
  EXPECT_EQ(l[4], base);
}

TEST(Fixture, Deterministic) {
  const auto a = synth_fixture(small_params(11));
  const auto b = synth_fixture(small_params(11));
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_TRUE(std::equal(a.queries.matrix().begin(), a.queries.matrix().end(),
                         b.queries.matrix().begin(), b.queries.matrix().end()));
  EXPECT_TRUE(std::equal(a.llm_bank.matrix().begin(), a.llm_bank.matrix().end(),
                         b.llm_bank.matrix().begin(), b.llm_bank.matrix().end()));
  const auto c = synth_fixture(small_params(12));
  EXPECT_FALSE(std::equal(a.queries.matrix().begin(), a.queries.matrix().end(),
                          c.queries.matrix().begin(), c.queries.matrix().end()));
}

TEST(Fixture, ShapesAndTags) {
  const auto p = small_params(13);
  const auto fx = synth_fixture(p);
  EXPECT_EQ(fx.queries.count(), p.n_classes * p.queries_per_class);
  EXPECT_EQ(fx.llm_bank.count(), p.n_classes * p.captions_per_class);
  EXPECT_EQ(fx.vlm_text_bank.count(), fx.llm_bank.count());
  EXPECT_EQ(fx.prototypes.count(), p.n_classes);
  EXPECT_EQ(fx.queries.space_tag(), "vlm-image");
  EXPECT_EQ(fx.llm_bank.space_tag(), "llm-text");
  EXPECT_EQ(fx.vlm_text_bank.space_tag(), "vlm-text");
}

TEST(Fixture, CleanPrototypesLeaveLittleToGain) {
  auto p = small_params(14);
  p.prototype_noise = 0.0;
  p.caption_noise = 0.0;
  const auto inputs = synth_fixture(p).eval_inputs();
  EnrichmentConfig small = zeroshot_config();
  small.alpha = 0.1;
  const double zs = run_eval(inputs, zeroshot_config()).acc_at.at(1);
  const double enriched = run_eval(inputs, small).acc_at.at(1);
  EXPECT_LE(std::abs(enriched - zs), 0.01);
}

TEST(Fixture, CleanCaptionsGiveNearPerfectPrototypes) {
  auto p = small_params(15);
  p.caption_noise = 0.0;
  const auto fx = synth_fixture(p);
  const auto inputs = fx.eval_inputs();
  EnrichmentConfig full = zeroshot_config();
  full.alpha = 1.0;
  const Retriever llm(inputs.llm_bank);
  const auto enriched = enrich_all_prototypes(inputs.classes, llm, inputs.vlm_text_bank, full);
  for (std::size_t n = 0; n < p.n_classes; ++n) {
    EXPECT_GE(rtest::dot_oracle(enriched.row(n), fx.centers[n]), 0.999) << "class " << n;
  }
}

TEST(Fixture, InvalidParams) {
  auto p = small_params(1);
  p.n_classes = 0;
  EXPECT_EQ(error_code_of([&] { synth_fixture(p); }), ErrorCode::kInvalidFixture);
  p = small_params(1);
  p.caption_noise = 1.0;
  p.prototype_noise = 0.5;
  EXPECT_EQ(error_code_of([&] { synth_fixture(p); }), ErrorCode::kInvalidFixture);
  p = small_params(1);
  p.query_noise = -1;
  EXPECT_EQ(error_code_of([&] { synth_fixture(p); }), ErrorCode::kInvalidFixture);
}

TEST(Fixture, SaveLoadRoundTrip) {
  rtest::TempDir dir("fixture");
  const auto fx = synth_fixture(small_params(16));
  save_fixture(fx, dir.path());
  const auto loaded = load_eval_dir(dir.path());
  const auto direct = fx.eval_inputs();
  EXPECT_EQ(loaded.dataset, direct.dataset);
  EXPECT_EQ(loaded.labels, direct.labels);
  EXPECT_TRUE(run_eval(loaded, {}).same_results(run_eval(direct, {})));
}

TEST(Reports, JsonRoundTrip) {
  const auto fx = synth_fixture(small_params(17));
  const auto reports = run_sweep(ablation_ladder({}), fx.eval_inputs());
  const auto back = reports_from_json(reports_to_json(reports));
  ASSERT_EQ(back.size(), reports.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_TRUE(back[i].same_results(reports[i]));
    EXPECT_EQ(back[i].wall_time_ms, reports[i].wall_time_ms);
  }
  const auto no_timings = reports_from_json(reports_to_json(reports, false));
  EXPECT_TRUE(no_timings[0].wall_time_ms.empty());
  EXPECT_EQ(error_code_of([] { reports_from_json(R"({"schema": "other", "reports": []})"); }),
            ErrorCode::kInvalidConfig);
}

TEST(Reports, CsvLayout) {
  EvalReport r;
  r.dataset = "a,b";
  r.acc_at = {{1, 0.5}, {5, 0.75}};
  r.n_queries = 4;
  const std::vector<EvalReport> rs = {r, r};
  const auto csv = reports_to_csv(rs);
  EXPECT_EQ(count_lines(csv), 3u);
  std::istringstream in(csv);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header,
            "dataset,index_mode,k,tau_tt,tau_it,alpha,beta,use_temperature_tt,"
            "use_temperature_it,renormalize_output,n_queries,acc_at_1,acc_at_5");
  EXPECT_EQ(row, "\"a,b\",exact,10,1,100,0.2,0.5,true,true,true,4,0.5,0.75");
}

TEST(Reports, EmitErrors) {
  EvalReport r;
  const std::vector<EvalReport> rs = {r};
  EXPECT_EQ(error_code_of([&] { emit_report(rs, ReportFormat::kJson, "/nonexistent/dir/r.json"); }),
            ErrorCode::kIoError);
  EXPECT_EQ(error_code_of([] { emit_report({}, ReportFormat::kCsv, "x.csv"); }),
            ErrorCode::kInvalidConfig);
  EXPECT_EQ(error_code_of([] { parse_report_format("xml"); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(parse_report_format("csv"), ReportFormat::kCsv);
}
