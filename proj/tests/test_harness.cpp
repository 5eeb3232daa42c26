#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gtp/errors.hpp"
#include "gtp/harness.hpp"

using namespace gtp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("gtp_harness_" + name);
  fs::remove_all(p);
  return p;
}

RunConfig tiny_config(const fs::path& out) {
  RunConfig c;
  c.synth_n = 40;
  c.folds = 2;
  c.fold = 0;
  c.pretrain_epochs = 2;
  c.joint_epochs = 2;
  c.dim = 8;
  c.segments = 2;
  c.k = 5;
  c.max_len = 12;
  c.out_dir = out.string();
  return c;
}

}  // namespace

TEST_CASE("variant names") {
  for (int i = 0; i <= static_cast<int>(Variant::kEncoderDecoder); ++i) {
    const auto v = static_cast<Variant>(i);
    CHECK(parse_variant(to_string(v)) == v);
  }
  CHECK(parse_variant("pairwise") == Variant::kPairwise);
  CHECK_FALSE(parse_variant("unknown").has_value());
  CHECK(uses_gtp(Variant::kOurs));
  CHECK(uses_gtp(Variant::kOursNoSentiment));
  CHECK_FALSE(uses_gtp(Variant::kCoordinate));
  CHECK(uses_sentiment(Variant::kOurs));
  CHECK_FALSE(uses_sentiment(Variant::kOursNoSentiment));
}

TEST_CASE("config text and validation") {
  RunConfig c;
  apply_config_text(c, "# comment\nalpha = 50\n\nvariant = +pairwise  # trailing\nk=8\nsymmetric_bleu = true\n");
  CHECK(c.alpha == 50.0);
  CHECK(c.variant == Variant::kPairwise);
  CHECK(c.k == 8);
  CHECK(c.symmetric_bleu);
  CHECK(effective_run_id(c) == "coordinate_pairwise_seed0");
  c.run_id = "mine";
  CHECK(effective_run_id(c) == "mine");

  CHECK_THROWS_AS(apply_setting(c, "no_such_key", "1"), InvalidConfig);
  CHECK_THROWS_AS(apply_setting(c, "k", "eight"), InvalidConfig);
  CHECK_THROWS_AS(apply_setting(c, "variant", "bogus"), InvalidConfig);
  CHECK_THROWS_AS(apply_config_text(c, "just words\n"), InvalidConfig);

  RunConfig bad;
  bad.momentum = 1.5;
  CHECK_THROWS_AS(validate(bad), InvalidConfig);
  bad = RunConfig{};
  bad.folds = 1;
  CHECK_THROWS_AS(validate(bad), InvalidConfig);
  bad = RunConfig{};
  bad.fold = 5;
  CHECK_THROWS_AS(validate(bad), InvalidConfig);
  CHECK_NOTHROW(validate(RunConfig{}));
}

TEST_CASE("describe round-trips through the config text") {
  RunConfig c;
  c.seed = 7;
  c.lr = 3e-4;
  c.variant = Variant::kEncoderDecoder;
  c.dataset = "data.jsonl";
  std::string text;
  for (const auto& [k, v] : describe(c)) text += k + " = " + v + "\n";
  RunConfig d;
  apply_config_text(d, text);
  CHECK(describe(d) == describe(c));
  CHECK(model_config(c, 50).direct_generation);
}

TEST_CASE("pearson") {
  const std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8}, c{4, 3, 2, 1}, flat{1, 1, 1, 1};
  CHECK(pearson(a, b) == doctest::Approx(1.0));
  CHECK(pearson(a, c) == doctest::Approx(-1.0));
  CHECK(std::isnan(pearson(a, flat)));
}

TEST_CASE("metrics records round-trip") {
  MetricsRecord r;
  r.run_id = "ours_seed0";
  r.stage = "eval";
  r.fold = 2;
  r.seed = 1;
  r.epoch = 30;
  r.losses.m2m = 0.5;
  r.losses.gtp = 1e-4;
  r.bleu = 3.25;
  SpreadStats s;
  s.mean = 0.9;
  s.std = 0.05;
  s.histogram.assign(kHistogramBins, 1);
  r.spread = s;
  SentimentComparison sc;
  sc.reference[3] = 0.5;
  sc.generated[3] = 0.25;
  sc.pearson = std::nan("");
  r.sentiment = sc;
  const std::string line = to_json_line(r);
  CHECK(line.find('\n') == std::string::npos);
  const auto back = parse_metrics(line + "\n");
  REQUIRE(back.size() == 1);
  CHECK(back[0].run_id == r.run_id);
  CHECK(back[0].fold == 2);
  CHECK(*back[0].bleu == 3.25);
  CHECK(back[0].spread->histogram == s.histogram);
  CHECK(std::isnan(back[0].sentiment->pearson));
  CHECK(to_json_line(back[0]) == line);
  CHECK_THROWS_AS(parse_metrics("{not json\n"), ParseError);
}

TEST_CASE("folds never leak and the vocabulary comes from training texts") {
  const auto corpus = synth_generate(30, 4);
  std::vector<std::string> ids;
  for (const auto& s : corpus) ids.push_back(s.id);
  const auto splits = kfold_split(ids, 3, 0);
  for (const auto& split : splits) {
    const FoldData f = make_fold(corpus, split);
    CHECK(f.train.size() + f.test.size() == corpus.size());
    std::size_t unk = 0;
    for (const auto& t : f.train_tokens)
      for (std::size_t id : t.ids) unk += id == kUnkId;
    CHECK(unk == 0);
  }
  FoldSplit leaky = splits[0];
  leaky.test_ids.push_back(leaky.train_ids.front());
  CHECK_THROWS_AS(make_fold(corpus, leaky), Error);
  FoldSplit unknown = splits[0];
  unknown.test_ids.push_back("nope");
  CHECK_THROWS_AS(make_fold(corpus, unknown), InvalidInput);
}

TEST_CASE("baselines") {
  RunConfig c;
  c.synth_n = 50;
  const auto corpus = load_corpus(c);
  const auto b = run_baselines(c, corpus);
  CHECK(b.knn_bleu.size() == 5);
  CHECK(b.representative_bleu.size() == 5);
  for (double v : b.knn_bleu) CHECK((v >= 0.0 && v <= 100.0));
  c.fold = 1;
  CHECK(run_baselines(c, corpus).knn_bleu.size() == 1);
}

TEST_CASE("gradient suite covers every loss and catches a corrupted gradient") {
  GradSuiteOptions o;
  o.instances = 20;
  const auto checks = cmd_gradcheck(o);
  CHECK(checks.size() == gradcheck_losses().size());
  for (const auto& c : checks) CHECK_MESSAGE(c.passed, c.loss);
  o.corrupt = "gtp";
  for (const auto& c : cmd_gradcheck(o)) CHECK(c.passed == (c.loss != "gtp"));
  o.corrupt = "nonsense";
  CHECK_THROWS_AS(cmd_gradcheck(o), InvalidConfig);
}

TEST_CASE("plots") {
  for (const char* k : {"similarity_scatter", "similarity_histogram", "sentiment_bars", "sweep_curve"}) {
    const auto kind = parse_plot_kind(k);
    REQUIRE(kind.has_value());
    const std::string svg = render_plot(*kind, "");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("no data") != std::string::npos);
  }
  CHECK_FALSE(parse_plot_kind("pie").has_value());

  const std::string scatter = render_plot(PlotKind::kSimilarityScatter,
                                          "text_bleu,latent_cosine\n0.1,0.9\n0.4,0.2\n");
  CHECK(scatter.find("<circle") != std::string::npos);
  CHECK(scatter.find("no data") == std::string::npos);
  CHECK_THROWS_AS(render_plot(PlotKind::kSimilarityScatter, "text_bleu,latent_cosine\n0.1,abc\n"), ParseError);

  const std::string sweep = render_plot(PlotKind::kSweepCurve, "param,value,mean_bleu\nk,8,1.5\nk,32,2.5\n");
  CHECK(sweep.find("<polyline") != std::string::npos);

  MetricsRecord r;
  r.stage = "eval";
  SentimentComparison sc;
  sc.reference = {0.1, 0.1, 0.1, 0.4, 0.1, 0.1, 0.1};
  sc.generated = {0.0, 0.1, 0.1, 0.5, 0.1, 0.2, 0.0};
  sc.pearson = pearson(sc.reference, sc.generated);
  r.sentiment = sc;
  const std::string bars = render_plot(PlotKind::kSentimentBars, to_json_line(r) + "\n");
  CHECK(bars.find("Pearson r") != std::string::npos);
  CHECK(bars.find("joy") != std::string::npos);
}

TEST_CASE("synth command writes a loadable corpus") {
  const fs::path dir = scratch("synth");
  const auto s = cmd_synth(25, 3, dir / "c.jsonl");
  CHECK(s.samples == 25);
  const auto loaded = load_dataset(dir / "c.jsonl");
  CHECK(loaded.size() == 25);
  const auto fresh = synth_generate(25, 3);
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    CHECK(loaded[i].id == fresh[i].id);
    CHECK(loaded[i].text == fresh[i].text);
    CHECK(loaded[i].features == fresh[i].features);
  }
  fs::remove_all(dir);
}

TEST_CASE("a small train run writes deterministic artifacts") {
  const fs::path a = scratch("train_a"), b = scratch("train_b");
  RunConfig c = tiny_config(a);
  const auto s1 = cmd_train(c);
  c.out_dir = b.string();
  const auto s2 = cmd_train(c);
  REQUIRE(s1.folds.size() == 1);
  CHECK(s1.mean_bleu == s2.mean_bleu);
  for (const char* f : {"metrics.jsonl", "weights_fold0.bin", "pairs_fold0.csv", "generated_fold0.tsv"}) {
    const std::string x = slurp(a / s1.run_id / f);
    CHECK_MESSAGE(!x.empty(), f);
    CHECK_MESSAGE(x == slurp(b / s2.run_id / f), f);
  }
  const auto records = load_metrics(a / s1.run_id / "metrics.jsonl");
  std::size_t pre = 0, joint = 0, eval = 0;
  for (const auto& r : records) {
    pre += r.stage == "pretrain";
    joint += r.stage == "joint";
    eval += r.stage == "eval";
    CHECK(r.run_id == s1.run_id);
  }
  CHECK(pre == 2);
  CHECK(joint == 2);
  CHECK(eval == 1);
  const auto& ev = records.back();
  REQUIRE(ev.sentiment.has_value());
  REQUIRE(ev.bleu.has_value());
  CHECK((*ev.bleu >= 0.0 && *ev.bleu <= 100.0));

  // Plots render from the real artifacts.
  CHECK(render_plot(PlotKind::kSimilarityScatter, slurp(a / s1.run_id / "pairs_fold0.csv")).find("no data") ==
        std::string::npos);
  CHECK(render_plot(PlotKind::kSimilarityHistogram, slurp(a / s1.run_id / "metrics.jsonl")).find("no data") ==
        std::string::npos);

  // Different seed, different weights.
  c.seed = 1;
  c.out_dir = a.string();
  const auto s3 = cmd_train(c);
  CHECK(slurp(a / s3.run_id / "weights_fold0.bin") != slurp(b / s2.run_id / "weights_fold0.bin"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("every variant trains on a tiny fold") {
  const fs::path dir = scratch("variants");
  RunConfig c = tiny_config(dir);
  c.pretrain_epochs = 1;
  c.joint_epochs = 1;
  c.write_weights = false;
  for (int i = 0; i <= static_cast<int>(Variant::kEncoderDecoder); ++i) {
    c.variant = static_cast<Variant>(i);
    c.reference_sentiment_head = i % 2 == 0;
    const auto s = cmd_train(c);
    CHECK_MESSAGE(std::isfinite(s.mean_bleu), to_string(c.variant));
    CHECK_FALSE(fs::exists(dir / s.run_id / "weights_fold0.bin"));
  }
  fs::remove_all(dir);
}

TEST_CASE("pre-trained text autoencoder reconstructs the training texts") {
  RunConfig c;
  const auto corpus = load_corpus(c);
  std::vector<std::string> ids;
  for (const auto& s : corpus) ids.push_back(s.id);
  const FoldSplit split = kfold_split(ids, c.folds, c.data_seed)[0];
  const std::vector<PairedSample> seen = fold_corpus(c, corpus, split);
  const FoldData fold = make_fold(seen, split);
  const PretrainResult pre = pretrain(c, seen, fold, c.seed);
  MESSAGE("reconstruction BLEU " << pre.text_bleu);
  CHECK(pre.text_bleu >= 60.0);
}
