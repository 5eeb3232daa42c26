#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gtp/matrix.hpp"
#include "gtp/textmetric.hpp"

namespace gtp {

enum class Mode { kMajor, kMinor };
enum class Instrument { kString, kWind, kPiano };
enum class Tempo { kSlow, kMedium, kFast, kSuperFast };
enum class Ensemble { kSonate, kTrio, kQuartet, kQuintetOrMore };

// Order matches the 7-class distribution layout everywhere.
enum class Sentiment { kAnger, kDisgust, kFear, kJoy, kNeutral, kSadness, kSurprise };
inline constexpr std::size_t kSentimentCount = 7;
using SentimentDistribution = std::array<double, kSentimentCount>;

std::string_view to_string(Mode v);
std::string_view to_string(Instrument v);
std::string_view to_string(Tempo v);
std::string_view to_string(Ensemble v);
std::string_view to_string(Sentiment v);
std::optional<Mode> parse_mode(std::string_view s);
std::optional<Instrument> parse_instrument(std::string_view s);
std::optional<Tempo> parse_tempo(std::string_view s);
std::optional<Ensemble> parse_ensemble(std::string_view s);
std::optional<Sentiment> parse_sentiment(std::string_view s);

struct TagSet {
  Mode mode = Mode::kMajor;
  Instrument instrument = Instrument::kString;
  Tempo tempo = Tempo::kMedium;
  Ensemble ensemble = Ensemble::kSonate;

  auto operator<=>(const TagSet&) const = default;
  // Number of fields (0..4) equal to other's.
  int overlap(const TagSet& other) const;
};

std::string to_string(const TagSet& tags);

struct PairedSample {
  std::string id;
  Matrix features;  // frequency bins x time frames
  std::string text;
  TagSet tags;
  SentimentDistribution sentiment{};
};

SentimentDistribution one_hot(Sentiment s);
Sentiment argmax(const SentimentDistribution& d);

struct SynthConfig {
  std::size_t bins = 32;
  std::size_t min_frames = 24;
  std::size_t max_frames = 40;
  // Relative size of the attribute-driven part of the spectrum.
  double attribute_scale = 0.06;
  double noise_scale = 0.02;
  // Verify the corpus statistics (on at most 400 samples) and reseed on a miss.
  bool self_check = true;
  std::size_t max_attempts = 8;
};

inline constexpr double kTargetFeatureCosine = 0.95;
inline constexpr double kTargetBleuFraction = 0.90;

// Paired corpus whose spectra share one low-rank base (so raw spectra are
// nearly collinear) while texts, tags and sentiment all derive from the
// same per-sample latent attributes. Deterministic per seed.
std::vector<PairedSample> synth_generate(std::size_t n, std::uint64_t seed, const SynthConfig& cfg = {});

struct CorpusStats {
  double feature_cosine_mean = 0.0;
  double feature_cosine_min = 0.0;
  double bleu_below_threshold_fraction = 0.0;
  double bleu_threshold = 0.06;
  std::size_t pairs = 0;
};

// Feature cosine over segment-pooled spectra (variable lengths share the
// same pooled shape); BLEU over ordered off-diagonal pairs.
CorpusStats corpus_statistics(std::span<const PairedSample> corpus, const BleuConfig& bleu_cfg = {},
                              std::size_t segments = 4, double bleu_threshold = 0.06);
bool meets_corpus_targets(const CorpusStats& stats);
std::vector<double> pooled_features(const Matrix& features, std::size_t segments);

// One JSON object per line: {id, features, text, tags, sentiment?}.
std::vector<PairedSample> load_dataset(const std::filesystem::path& path);
std::vector<PairedSample> parse_dataset(std::string_view contents);
void save_dataset(std::span<const PairedSample> samples, const std::filesystem::path& path);
std::string serialize_dataset(std::span<const PairedSample> samples);

// First tempo marking in title order, or nullopt.
std::optional<Tempo> tempo_category(std::string_view title);

// Text of the sample sharing the most tag fields with the query; ties go to
// the lexicographically lowest id.
std::string tags_knn(const TagSet& query, std::span<const PairedSample> corpus);

// Per exact tag combination, the text with the highest mean BLEU against the
// rest of its group (self excluded); ties go to the lowest id.
std::map<TagSet, std::string> tags_representative(std::span<const PairedSample> corpus,
                                                  const BleuConfig& cfg = {});

struct FoldSplit {
  std::size_t fold = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

std::vector<FoldSplit> kfold_split(std::span<const std::string> ids, std::size_t folds, std::uint64_t seed);

// Per-bin mean and standard deviation over every frame of the given samples.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> scale;
  Matrix apply(const Matrix& features) const;
};

FeatureScaler fit_feature_scaler(std::span<const PairedSample* const> samples);
std::vector<PairedSample> standardize_features(std::span<const PairedSample> corpus, const FeatureScaler& scaler);

// Keyword vote over the 7 classes; no keyword gives neutral.
SentimentDistribution lexicon_sentiment(std::string_view text);

}  // namespace gtp
