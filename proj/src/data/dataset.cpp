#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "gtp/data.hpp"
#include "gtp/errors.hpp"

namespace gtp {

namespace {

constexpr std::array<std::string_view, 2> kModeNames{"major", "minor"};
constexpr std::array<std::string_view, 3> kInstrumentNames{"string", "wind", "piano"};
constexpr std::array<std::string_view, 4> kTempoNames{"slow", "medium", "fast", "super_fast"};
constexpr std::array<std::string_view, 4> kEnsembleNames{"sonate", "trio", "quartet", "quintet_or_more"};
constexpr std::array<std::string_view, 7> kSentimentNames{"anger",   "disgust", "fear",    "joy",
                                                          "neutral", "sadness", "surprise"};

template <typename E, std::size_t N>
std::optional<E> parse_enum(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == s) return static_cast<E>(i);
  return std::nullopt;
}

}  // namespace

std::string_view to_string(Mode v) { return kModeNames.at(static_cast<std::size_t>(v)); }
std::string_view to_string(Instrument v) { return kInstrumentNames.at(static_cast<std::size_t>(v)); }
std::string_view to_string(Tempo v) { return kTempoNames.at(static_cast<std::size_t>(v)); }
std::string_view to_string(Ensemble v) { return kEnsembleNames.at(static_cast<std::size_t>(v)); }
std::string_view to_string(Sentiment v) { return kSentimentNames.at(static_cast<std::size_t>(v)); }
std::optional<Mode> parse_mode(std::string_view s) { return parse_enum<Mode>(kModeNames, s); }
std::optional<Instrument> parse_instrument(std::string_view s) { return parse_enum<Instrument>(kInstrumentNames, s); }
std::optional<Tempo> parse_tempo(std::string_view s) { return parse_enum<Tempo>(kTempoNames, s); }
std::optional<Ensemble> parse_ensemble(std::string_view s) { return parse_enum<Ensemble>(kEnsembleNames, s); }
std::optional<Sentiment> parse_sentiment(std::string_view s) { return parse_enum<Sentiment>(kSentimentNames, s); }

int TagSet::overlap(const TagSet& o) const {
  return int(mode == o.mode) + int(instrument == o.instrument) + int(tempo == o.tempo) + int(ensemble == o.ensemble);
}

std::string to_string(const TagSet& t) {
  std::string s;
  s.append(to_string(t.mode)).append("/").append(to_string(t.instrument)).append("/");
  s.append(to_string(t.tempo)).append("/").append(to_string(t.ensemble));
  return s;
}

SentimentDistribution one_hot(Sentiment s) {
  SentimentDistribution d{};
  d[static_cast<std::size_t>(s)] = 1.0;
  return d;
}

Sentiment argmax(const SentimentDistribution& d) {
  return static_cast<Sentiment>(std::max_element(d.begin(), d.end()) - d.begin());
}

// ---- dataset file -------------------------------------------------------

namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(std::string("missing field '") + key + "'", line);
  return *it;
}

std::string require_string(const json& obj, const char* key, std::size_t line) {
  const json& v = require(obj, key, line);
  if (!v.is_string()) throw ParseError(std::string("field '") + key + "' must be a string", line);
  return v.get<std::string>();
}

template <typename E>
E require_tag(const json& tags, const char* key, std::optional<E> (*parse)(std::string_view), std::size_t line) {
  const std::string s = require_string(tags, key, line);
  auto v = parse(s);
  if (!v) throw ParseError("unknown " + std::string(key) + " tag '" + s + "'", line);
  return *v;
}

Matrix parse_features(const json& v, std::size_t line) {
  if (!v.is_array() || v.empty()) throw ParseError("features must be a non-empty array of rows", line);
  const std::size_t rows = v.size();
  if (!v[0].is_array() || v[0].empty()) throw ParseError("feature rows must be non-empty arrays", line);
  const std::size_t cols = v[0].size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const json& row = v[r];
    if (!row.is_array() || row.size() != cols) throw ParseError("feature rows must all have the same length", line);
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row[c].is_number()) throw ParseError("features must be numbers", line);
      m(r, c) = row[c].get<double>();
    }
  }
  if (!all_finite(m)) throw ParseError("features must be finite", line);
  return m;
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

PairedSample parse_record(std::string_view text, std::size_t line) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed record: ") + e.what(), line);
  }
  if (!obj.is_object()) throw ParseError("record must be an object", line);
  PairedSample s;
  s.id = require_string(obj, "id", line);
  if (s.id.empty()) throw ParseError("id must be non-empty", line);
  s.features = parse_features(require(obj, "features", line), line);
  s.text = require_string(obj, "text", line);
  if (blank(s.text)) throw ParseError("text must not be blank", line);
  const json& tags = require(obj, "tags", line);
  if (!tags.is_object()) throw ParseError("tags must be an object", line);
  s.tags.mode = require_tag<Mode>(tags, "mode", parse_mode, line);
  s.tags.instrument = require_tag<Instrument>(tags, "instrument", parse_instrument, line);
  s.tags.tempo = require_tag<Tempo>(tags, "tempo", parse_tempo, line);
  s.tags.ensemble = require_tag<Ensemble>(tags, "ensemble", parse_ensemble, line);
  if (auto it = obj.find("sentiment"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError("sentiment must be a class name", line);
    auto cls = parse_sentiment(it->get<std::string>());
    if (!cls) throw ParseError("unknown sentiment '" + it->get<std::string>() + "'", line);
    s.sentiment = one_hot(*cls);
  } else {
    s.sentiment = lexicon_sentiment(s.text);
  }
  return s;
}

json to_json(const PairedSample& s) {
  json features = json::array();
  for (std::size_t r = 0; r < s.features.rows(); ++r) {
    auto row = s.features.row(r);
    features.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return json{{"id", s.id},
              {"features", std::move(features)},
              {"text", s.text},
              {"tags",
               {{"mode", to_string(s.tags.mode)},
                {"instrument", to_string(s.tags.instrument)},
                {"tempo", to_string(s.tags.tempo)},
                {"ensemble", to_string(s.tags.ensemble)}}},
              {"sentiment", to_string(argmax(s.sentiment))}};
}

}  // namespace

std::vector<PairedSample> parse_dataset(std::string_view contents) {
  std::vector<PairedSample> out;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    std::size_t end = contents.find('\n', pos);
    if (end == std::string_view::npos) end = contents.size();
    std::string_view line = contents.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (blank(line)) continue;
    PairedSample s = parse_record(line, line_no);
    if (!seen.insert(s.id).second) throw DuplicateError("duplicate sample id '" + s.id + "' on line " + std::to_string(line_no));
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<PairedSample> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

std::string serialize_dataset(std::span<const PairedSample> samples) {
  std::string out;
  for (const auto& s : samples) {
    out += to_json(s).dump();
    out += '\n';
  }
  return out;
}

void save_dataset(std::span<const PairedSample> samples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset " + path.string());
  out << serialize_dataset(samples);
  if (!out) throw IoError("failed writing dataset " + path.string());
}

// ---- tags and tempo -----------------------------------------------------

std::optional<Tempo> tempo_category(std::string_view title) {
  static const std::array<std::pair<std::string_view, Tempo>, 12> table{{
      {"grave", Tempo::kSlow},
      {"largo", Tempo::kSlow},
      {"lento", Tempo::kSlow},
      {"adagio", Tempo::kSlow},
      {"andante", Tempo::kMedium},
      {"moderato", Tempo::kMedium},
      {"andantino", Tempo::kMedium},
      {"allegro", Tempo::kFast},
      {"allegretto", Tempo::kFast},
      {"vivace", Tempo::kFast},
      {"presto", Tempo::kSuperFast},
      {"prestissimo", Tempo::kSuperFast},
  }};
  for (const auto& tok : split_tokens(title))
    for (const auto& [word, tempo] : table)
      if (tok == word) return tempo;
  return std::nullopt;
}

std::string tags_knn(const TagSet& query, std::span<const PairedSample> corpus) {
  if (corpus.empty()) throw InvalidInput("tags kNN needs a non-empty corpus");
  const PairedSample* best = nullptr;
  int best_overlap = -1;
  for (const auto& s : corpus) {
    const int ov = query.overlap(s.tags);
    if (ov > best_overlap || (ov == best_overlap && s.id < best->id)) {
      best = &s;
      best_overlap = ov;
    }
  }
  return best->text;
}

std::map<TagSet, std::string> tags_representative(std::span<const PairedSample> corpus, const BleuConfig& cfg) {
  std::map<TagSet, std::vector<const PairedSample*>> groups;
  for (const auto& s : corpus) groups[s.tags].push_back(&s);
  std::map<TagSet, std::string> out;
  for (auto& [tags, members] : groups) {
    std::sort(members.begin(), members.end(), [](auto* a, auto* b) { return a->id < b->id; });
    if (members.size() == 1) {
      out[tags] = members[0]->text;
      continue;
    }
    std::vector<std::vector<std::string>> words;
    words.reserve(members.size());
    for (auto* m : members) words.push_back(split_tokens(m->text));
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t i = 0; i < members.size(); ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < members.size(); ++j)
        if (i != j) total += bleu(words[i], words[j], cfg);
      const double mean = total / static_cast<double>(members.size() - 1);
      if (mean > best_score) {
        best_score = mean;
        best = i;
      }
    }
    out[tags] = members[best]->text;
  }
  return out;
}

// ---- folds --------------------------------------------------------------

std::vector<FoldSplit> kfold_split(std::span<const std::string> ids, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw InvalidConfig("need at least two folds");
  if (ids.size() < folds) throw InvalidInput("fewer ids than folds");
  std::vector<std::string> order(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }
  const std::size_t base = order.size() / folds;
  const std::size_t extra = order.size() % folds;
  std::vector<FoldSplit> out;
  std::size_t start = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    FoldSplit split;
    split.fold = f;
    for (std::size_t i = 0; i < order.size(); ++i)
      (i >= start && i < start + len ? split.test_ids : split.train_ids).push_back(order[i]);
    start += len;
    out.push_back(std::move(split));
  }
  return out;
}

// ---- sentiment proxy ----------------------------------------------------

namespace {

const std::array<std::vector<std::string_view>, kSentimentCount>& lexicon() {
  static const std::array<std::vector<std::string_view>, kSentimentCount> table{{
      {"anger", "angry", "furious", "fury", "fierce", "rage", "raging", "violent", "wrathful"},
      {"disgust", "bitter", "grotesque", "sour", "harsh", "sneering", "crude"},
      {"fear", "dread", "ominous", "eerie", "menacing", "anxious", "trembling", "fearful", "haunted"},
      {"bright", "lively", "sweetly", "joyous", "joy", "peaceful", "beautiful", "cheerful", "radiant", "playful",
       "graceful", "serene", "tender", "happy", "jubilant", "delight", "warm"},
      {},
      {"sadness", "sad", "loss", "lament", "mournful", "sorrowful", "grief", "melancholy", "weeping", "tears",
       "grieving", "longing"},
      {"sudden", "surprise", "surprising", "unexpected", "startling", "abrupt", "astonishing", "shocks"},
  }};
  return table;
}

}  // namespace

SentimentDistribution lexicon_sentiment(std::string_view text) {
  const auto& table = lexicon();
  std::array<std::set<std::string_view>, kSentimentCount> distinct;
  std::array<std::size_t, kSentimentCount> hits{};
  for (const auto& tok : split_tokens(text)) {
    for (std::size_t c = 0; c < kSentimentCount; ++c) {
      auto it = std::find(table[c].begin(), table[c].end(), tok);
      if (it != table[c].end()) {
        distinct[c].insert(*it);
        ++hits[c];
      }
    }
  }
  std::size_t best = static_cast<std::size_t>(Sentiment::kNeutral);
  for (std::size_t c = 0; c < kSentimentCount; ++c) {
    if (hits[c] == 0) continue;
    const auto& b = best;
    if (hits[b] == 0 || distinct[c].size() > distinct[b].size() ||
        (distinct[c].size() == distinct[b].size() && hits[c] > hits[b])) {
      best = c;
    }
  }
  return one_hot(static_cast<Sentiment>(best));
}

Matrix FeatureScaler::apply(const Matrix& features) const {
  if (features.rows() != mean.size())
    throw ShapeError("scaler fitted on " + std::to_string(mean.size()) + " bins, features have " +
                     std::to_string(features.rows()));
  Matrix out(features.rows(), features.cols());
  for (std::size_t b = 0; b < features.rows(); ++b)
    for (std::size_t c = 0; c < features.cols(); ++c) out(b, c) = (features(b, c) - mean[b]) / scale[b];
  return out;
}

FeatureScaler fit_feature_scaler(std::span<const PairedSample* const> samples) {
  if (samples.empty()) throw InvalidInput("cannot fit a feature scaler on no samples");
  const std::size_t bins = samples.front()->features.rows();
  FeatureScaler s;
  s.mean.assign(bins, 0.0);
  s.scale.assign(bins, 0.0);
  double frames = 0;
  for (const PairedSample* p : samples) {
    if (p->features.rows() != bins) throw ShapeError("sample " + p->id + " has a different bin count");
    for (std::size_t b = 0; b < bins; ++b)
      for (std::size_t c = 0; c < p->features.cols(); ++c) s.mean[b] += p->features(b, c);
    frames += static_cast<double>(p->features.cols());
  }
  for (double& m : s.mean) m /= frames;
  for (const PairedSample* p : samples)
    for (std::size_t b = 0; b < bins; ++b)
      for (std::size_t c = 0; c < p->features.cols(); ++c) {
        const double d = p->features(b, c) - s.mean[b];
        s.scale[b] += d * d;
      }
  // constant bins keep unit scale
  for (double& v : s.scale) v = v > 0 ? std::sqrt(v / frames) : 1.0;
  return s;
}

std::vector<PairedSample> standardize_features(std::span<const PairedSample> corpus, const FeatureScaler& scaler) {
  std::vector<PairedSample> out(corpus.begin(), corpus.end());
  for (auto& s : out) s.features = scaler.apply(s.features);
  return out;
}

}  // namespace gtp
