#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <set>

#include "gtp/data.hpp"
#include "gtp/errors.hpp"

using namespace gtp;

namespace {

PairedSample sample(std::string id, std::string text, TagSet tags) {
  PairedSample s;
  s.id = std::move(id);
  s.features = Matrix(2, 3, 1.0);
  s.text = std::move(text);
  s.tags = tags;
  s.sentiment = lexicon_sentiment(s.text);
  return s;
}

const char* kRecord =
    R"({"id":"a","features":[[1,2,3],[4,5,6]],"text":"bright melody","tags":{"mode":"major","instrument":"piano","tempo":"fast","ensemble":"trio"}})";

}  // namespace

TEST_CASE("synth_generate is deterministic and rejects tiny corpora") {
  auto a = synth_generate(30, 7);
  auto b = synth_generate(30, 7);
  CHECK(serialize_dataset(a) == serialize_dataset(b));
  CHECK(serialize_dataset(a) != serialize_dataset(synth_generate(30, 8)));
  CHECK_THROWS_AS(synth_generate(9, 1), InvalidInput);
  for (const auto& s : a) {
    CHECK_FALSE(s.features.empty());
    CHECK_FALSE(s.text.empty());
    CHECK(tempo_category(s.text) == s.tags.tempo);
  }
}

TEST_CASE("default corpus hits the similarity targets") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto corpus = synth_generate(200, seed);
    auto st = corpus_statistics(corpus);
    CHECK(st.feature_cosine_mean >= 0.95);
    CHECK(st.bleu_below_threshold_fraction >= 0.90);
    CHECK(st.pairs == 200u * 199u);
  }
}

TEST_CASE("synthetic sentiment skews towards joy") {
  auto corpus = synth_generate(200, 4);
  std::array<int, kSentimentCount> counts{};
  for (const auto& s : corpus) ++counts[static_cast<std::size_t>(argmax(s.sentiment))];
  const int joy = counts[static_cast<std::size_t>(Sentiment::kJoy)];
  for (std::size_t c = 0; c < kSentimentCount; ++c)
    if (c != static_cast<std::size_t>(Sentiment::kJoy)) CHECK(joy > counts[c]);
}

TEST_CASE("dataset parsing") {
  CHECK(parse_dataset("").empty());
  CHECK(parse_dataset("\n\n").empty());
  auto one = parse_dataset(kRecord);
  REQUIRE(one.size() == 1);
  CHECK(one[0].features.rows() == 2);
  CHECK(one[0].features.cols() == 3);
  CHECK(one[0].features(1, 0) == 4.0);
  CHECK(one[0].tags.ensemble == Ensemble::kTrio);
  CHECK(argmax(one[0].sentiment) == Sentiment::kJoy);

  std::string missing = R"({"id":"a","features":[[1]],"text":"x","tags":{"mode":"major","instrument":"piano","tempo":"fast"}})";
  CHECK_THROWS_AS(parse_dataset(missing), ParseError);
  try {
    parse_dataset(std::string(kRecord) + "\n" + "{not json");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  std::string ragged = R"({"id":"a","features":[[1,2],[3]],"text":"x","tags":{"mode":"major","instrument":"piano","tempo":"fast","ensemble":"trio"}})";
  CHECK_THROWS_AS(parse_dataset(ragged), ParseError);
  std::string blank_text = R"({"id":"a","features":[[1]],"text":"  ","tags":{"mode":"major","instrument":"piano","tempo":"fast","ensemble":"trio"}})";
  CHECK_THROWS_AS(parse_dataset(blank_text), ParseError);
  std::string bad_tag = R"({"id":"a","features":[[1]],"text":"x","tags":{"mode":"dorian","instrument":"piano","tempo":"fast","ensemble":"trio"}})";
  CHECK_THROWS_AS(parse_dataset(bad_tag), ParseError);
  CHECK_THROWS_AS(parse_dataset(std::string(kRecord) + "\n" + kRecord), DuplicateError);
}

TEST_CASE("save then load is the identity") {
  auto corpus = synth_generate(12, 3);
  corpus[0].sentiment = one_hot(Sentiment::kSurprise);
  const auto path = std::filesystem::temp_directory_path() / "gtp_test_roundtrip.jsonl";
  save_dataset(corpus, path);
  auto back = load_dataset(path);
  std::filesystem::remove(path);
  REQUIRE(back.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(back[i].id == corpus[i].id);
    CHECK(back[i].features == corpus[i].features);
    CHECK(back[i].text == corpus[i].text);
    CHECK(back[i].tags == corpus[i].tags);
    CHECK(back[i].sentiment == corpus[i].sentiment);
  }
  CHECK_THROWS_AS(load_dataset("/nonexistent/dir/none.jsonl"), IoError);
}

TEST_CASE("tempo_category") {
  CHECK(tempo_category("Adagio cantabile") == Tempo::kSlow);
  CHECK(tempo_category("Rondo: Allegro") == Tempo::kFast);
  CHECK_FALSE(tempo_category("Intermezzo").has_value());
  CHECK(tempo_category("Andante con moto") == Tempo::kMedium);
  CHECK(tempo_category("PRESTO") == Tempo::kSuperFast);
  CHECK(tempo_category("Largo - Allegro") == Tempo::kSlow);
  CHECK_FALSE(tempo_category("allegros").has_value());
}

TEST_CASE("tags_knn") {
  const TagSet q{Mode::kMinor, Instrument::kPiano, Tempo::kSlow, Ensemble::kTrio};
  std::vector<PairedSample> corpus{
      sample("b", "one overlap", {Mode::kMinor, Instrument::kWind, Tempo::kFast, Ensemble::kQuartet}),
      sample("c", "three overlap", {Mode::kMinor, Instrument::kPiano, Tempo::kSlow, Ensemble::kQuartet}),
  };
  CHECK(tags_knn(q, corpus) == "three overlap");
  corpus.push_back(sample("a", "also three", {Mode::kMajor, Instrument::kPiano, Tempo::kSlow, Ensemble::kTrio}));
  CHECK(tags_knn(q, corpus) == "also three");
  corpus.push_back(sample("z", "exact", q));
  CHECK(tags_knn(q, corpus) == "exact");
  CHECK_THROWS_AS(tags_knn(q, std::vector<PairedSample>{}), InvalidInput);
}

TEST_CASE("tags_representative") {
  const TagSet g{Mode::kMajor, Instrument::kString, Tempo::kFast, Ensemble::kQuartet};
  const TagSet solo{Mode::kMinor, Instrument::kWind, Tempo::kSlow, Ensemble::kSonate};
  std::vector<PairedSample> corpus{
      sample("3", "x y", g),
      sample("1", "a b c d", g),
      sample("2", "a b c d", g),
      sample("4", "lonely text", solo),
  };
  auto reps = tags_representative(corpus);
  CHECK(reps.size() == 2);
  CHECK(reps.at(g) == "a b c d");
  CHECK(reps.at(solo) == "lonely text");
}

TEST_CASE("kfold_split") {
  std::vector<std::string> ids;
  for (int i = 0; i < 1955; ++i) ids.push_back("id" + std::to_string(i));
  auto folds = kfold_split(ids, 5, 11);
  REQUIRE(folds.size() == 5);
  std::set<std::string> all_test;
  for (const auto& f : folds) {
    CHECK(f.test_ids.size() == 391);
    CHECK(f.train_ids.size() == 1955 - 391);
    std::set<std::string> train(f.train_ids.begin(), f.train_ids.end());
    for (const auto& id : f.test_ids) CHECK(train.count(id) == 0);
    all_test.insert(f.test_ids.begin(), f.test_ids.end());
  }
  CHECK(all_test.size() == 1955);

  std::vector<std::string> seven{"a", "b", "c", "d", "e", "f", "g"};
  auto small = kfold_split(seven, 5, 3);
  std::vector<std::size_t> sizes;
  for (const auto& f : small) sizes.push_back(f.test_ids.size());
  CHECK(sizes == std::vector<std::size_t>{2, 2, 1, 1, 1});

  auto again = kfold_split(seven, 5, 3);
  for (std::size_t f = 0; f < 5; ++f) CHECK(again[f].test_ids == small[f].test_ids);
  CHECK_THROWS_AS(kfold_split(std::vector<std::string>{"a", "b"}, 5, 1), InvalidInput);
}

TEST_CASE("kfold_split is disjoint and exhaustive for many seeds") {
  std::vector<std::string> ids;
  for (int i = 0; i < 23; ++i) ids.push_back(std::to_string(i));
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto folds = kfold_split(ids, 5, seed);
    std::multiset<std::string> seen;
    std::size_t lo = ids.size(), hi = 0;
    for (const auto& f : folds) {
      seen.insert(f.test_ids.begin(), f.test_ids.end());
      lo = std::min(lo, f.test_ids.size());
      hi = std::max(hi, f.test_ids.size());
      CHECK(f.train_ids.size() + f.test_ids.size() == ids.size());
    }
    CHECK(seen.size() == ids.size());
    CHECK(std::set<std::string>(seen.begin(), seen.end()).size() == ids.size());
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("lexicon_sentiment") {
  CHECK(argmax(lexicon_sentiment("peaceful and beautiful melody")) == Sentiment::kJoy);
  CHECK(argmax(lexicon_sentiment("sadness and loss pervade")) == Sentiment::kSadness);
  CHECK(argmax(lexicon_sentiment("the movement begins")) == Sentiment::kNeutral);
  CHECK(argmax(lexicon_sentiment("")) == Sentiment::kNeutral);
  // Distinct keywords first, then raw hits, then class order.
  CHECK(argmax(lexicon_sentiment("bright bright sadness loss")) == Sentiment::kSadness);
  CHECK(argmax(lexicon_sentiment("bright bright sadness")) == Sentiment::kJoy);
  CHECK(argmax(lexicon_sentiment("fierce dread")) == Sentiment::kAnger);
  auto d = lexicon_sentiment("Lively, JOYOUS!");
  double total = 0.0;
  for (double v : d) total += v;
  CHECK(total == 1.0);
  CHECK(d[static_cast<std::size_t>(Sentiment::kJoy)] == 1.0);
}

TEST_CASE("feature scaler") {
  PairedSample a, b;
  a.id = "a";
  b.id = "b";
  a.features = Matrix(2, 2, std::vector<double>{1, 3, 5, 5});
  b.features = Matrix(2, 1, std::vector<double>{2, 5});
  const PairedSample* both[] = {&a, &b};
  const FeatureScaler s = fit_feature_scaler(both);
  CHECK(s.mean[0] == doctest::Approx(2.0));
  CHECK(s.scale[0] == doctest::Approx(std::sqrt(2.0 / 3.0)));
  // constant bin
  CHECK(s.mean[1] == 5.0);
  CHECK(s.scale[1] == 1.0);
  const Matrix z = s.apply(a.features);
  CHECK(z(0, 0) == doctest::Approx(-1.0 / std::sqrt(2.0 / 3.0)));
  CHECK(z(1, 1) == 0.0);
  CHECK_THROWS_AS(s.apply(Matrix(3, 1)), ShapeError);
  const PairedSample* none[] = {nullptr};
  CHECK_THROWS_AS(fit_feature_scaler(std::span<const PairedSample* const>(none, 0)), InvalidInput);

  // standardized training frames have zero mean and unit deviation per bin
  const auto corpus = synth_generate(30, 3);
  std::vector<const PairedSample*> ptrs;
  for (const auto& p : corpus) ptrs.push_back(&p);
  const auto z2 = standardize_features(corpus, fit_feature_scaler(ptrs));
  for (std::size_t bin = 0; bin < z2.front().features.rows(); ++bin) {
    double sum = 0, sq = 0, n = 0;
    for (const auto& p : z2)
      for (std::size_t c = 0; c < p.features.cols(); ++c) {
        sum += p.features(bin, c);
        sq += p.features(bin, c) * p.features(bin, c);
        ++n;
      }
    CHECK(std::abs(sum / n) < 1e-9);
    CHECK(sq / n == doctest::Approx(1.0).epsilon(1e-9));
  }
}
