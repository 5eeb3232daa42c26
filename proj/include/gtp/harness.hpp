#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gtp/data.hpp"
#include "gtp/gradcheck.hpp"
#include "gtp/losses.hpp"
#include "gtp/model.hpp"
#include "gtp/simkernel.hpp"

namespace gtp {

enum class Variant {
  kCoordinate,
  kPairwise,
  kTriplet,
  kContrastive,
  kSentiment,
  kGtp,
  kOurs,
  kOursNoSentiment,
  kEncoderDecoder,
};

std::string_view to_string(Variant v);
std::optional<Variant> parse_variant(std::string_view s);
bool uses_gtp(Variant v);
bool uses_sentiment(Variant v);

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t folds = 5;
  // Run only this fold; -1 runs all of them.
  int fold = -1;
  std::size_t pretrain_epochs = 30;
  std::size_t joint_epochs = 30;
  double lr = 1e-3;
  std::size_t batch = 8;
  double alpha = 500.0;
  double beta = 5.0;
  double gamma = 0.25;
  std::size_t k = 32;
  double momentum = 0.999;
  std::size_t segments = 4;
  std::size_t dim = 64;
  std::size_t bins = 32;
  Variant variant = Variant::kOurs;
  std::size_t max_len = 40;

  // Weight of the pairwise / triplet / contrastive term in those variants.
  double comparison_weight = 1.0;
  // Weight of the teacher-forced decoder loss on the music route g'(M_bwd(f(m))).
  double route_weight = 1.0;
  double pair_threshold = 0.1;
  double triplet_margin = 0.2;
  double contrastive_temperature = 0.1;
  double gtp_temperature = 1.0;
  std::size_t gtp_bleu_order = 2;
  bool symmetric_bleu = false;
  // Fit h on the reference texts' token distributions and hold it fixed on
  // the generated path; false trains h through the generated path only.
  bool reference_sentiment_head = false;
  bool direct_generation = false;
  // Standardize each frequency bin with training-fold mean and deviation.
  bool standardize_features = false;

  // Dataset file; empty means a synthetic corpus of synth_n samples.
  std::string dataset;
  std::size_t synth_n = 200;
  std::uint64_t data_seed = 0;
  std::string out_dir = "runs";
  std::string run_id;  // derived from variant and seed when empty
  bool write_weights = true;
};

// Throws InvalidConfig naming the first bad field.
void validate(const RunConfig& cfg);
std::string effective_run_id(const RunConfig& cfg);
ModelConfig model_config(const RunConfig& cfg, std::size_t vocab_size);
std::vector<PairedSample> load_corpus(const RunConfig& cfg);

// Flat "key = value" lines; '#' starts a comment. Keys use RunConfig field names.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);
void apply_config_text(RunConfig& cfg, std::string_view text);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);
std::map<std::string, std::string> describe(const RunConfig& cfg);

struct SentimentComparison {
  SentimentDistribution reference{};
  SentimentDistribution generated{};
  double pearson = 0.0;  // NaN when either side is constant
};

double pearson(std::span<const double> a, std::span<const double> b);

struct MetricsRecord {
  std::string run_id;
  std::string stage;  // "pretrain", "joint" or "eval"
  std::size_t fold = 0;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  LossBreakdown losses;
  std::optional<double> bleu;
  std::optional<SpreadStats> spread;
  std::optional<SentimentComparison> sentiment;
};

std::string to_json_line(const MetricsRecord& r);
std::vector<MetricsRecord> parse_metrics(std::string_view text);
std::vector<MetricsRecord> load_metrics(const std::filesystem::path& path);

using MetricsSink = std::function<void(const MetricsRecord&)>;

// One fold's data view: the vocabulary is built from training texts only.
struct FoldData {
  std::size_t fold = 0;
  std::vector<const PairedSample*> train;
  std::vector<const PairedSample*> test;
  Vocabulary vocab;
  std::vector<TokenSequence> train_tokens;
  std::vector<TokenSequence> test_tokens;
};

FoldData make_fold(std::span<const PairedSample> corpus, const FoldSplit& split);

// The corpus as the model sees it for one fold (see standardize_features).
std::vector<PairedSample> fold_corpus(const RunConfig& cfg, std::span<const PairedSample> corpus,
                                      const FoldSplit& split);

struct PretrainResult {
  ModelBundle model;
  SpreadStats spread;  // latent cosine spread of f over the whole corpus
  double text_bleu = 0.0;  // text autoencoder reconstruction on the training texts
};

struct FoldResult {
  std::size_t fold = 0;
  std::uint64_t seed = 0;
  double bleu = 0.0;
  SpreadStats spread;
  SpreadStats pretrain_spread;
  SentimentComparison sentiment;
  std::vector<std::string> generated;
  Matrix latent_cosine;  // pairwise f-latent cosine over the whole corpus
};

// Music and text autoencoders trained on reconstruction alone; test texts
// never enter.
PretrainResult pretrain(const RunConfig& cfg, std::span<const PairedSample> corpus, const FoldData& fold,
                        std::uint64_t seed, const MetricsSink& sink = {});
FoldResult joint_train(const RunConfig& cfg, std::span<const PairedSample> corpus, const FoldData& fold,
                       const PretrainResult& pre, std::uint64_t seed, const MetricsSink& sink = {},
                       ModelBundle* trained = nullptr);
std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold);

struct TrainSummary {
  std::string run_id;
  std::vector<FoldResult> folds;
  double mean_bleu = 0.0;
  std::filesystem::path metrics_path;
};

// Per fold: pre-train, joint-train, greedy-generate the test fold and score
// corpus BLEU. Writes metrics.jsonl (and weights) under out_dir/run_id.
TrainSummary cmd_train(const RunConfig& cfg, std::ostream* log = nullptr);

struct BaselineSummary {
  std::vector<double> knn_bleu;             // per fold
  std::vector<double> representative_bleu;  // per fold
  double knn_mean = 0.0;
  double representative_mean = 0.0;
};

// Tags heuristics, fold-wise, with representatives built on the training fold.
BaselineSummary cmd_baseline(const RunConfig& cfg, std::ostream* log = nullptr);
BaselineSummary run_baselines(const RunConfig& cfg, std::span<const PairedSample> corpus);

struct SweepPoint {
  double value = 0.0;
  TrainSummary summary;
};

// param is "k" or "alpha"; one full cmd_train per value.
std::vector<SweepPoint> cmd_sweep(const RunConfig& cfg, std::string_view param, std::span<const double> values,
                                  std::ostream* log = nullptr);

struct LossCheck {
  std::string loss;
  std::size_t instances = 0;
  std::size_t failures = 0;
  double worst_rel_error = 0.0;
  bool passed = false;
};

struct GradSuiteOptions {
  std::size_t instances = 100;
  std::uint64_t seed = 0;
  double tolerance = 1e-5;
  double step = 1e-6;
  // Loss whose analytic gradient gets perturbed (negative control).
  std::string corrupt;
};

// Finite-difference checks over every loss on random mini-instances.
const std::vector<std::string>& gradcheck_losses();
std::vector<LossCheck> cmd_gradcheck(const GradSuiteOptions& opts, std::ostream* log = nullptr);

enum class PlotKind { kSimilarityScatter, kSimilarityHistogram, kSentimentBars, kSweepCurve };
std::optional<PlotKind> parse_plot_kind(std::string_view s);

// Self-contained SVG. similarity_histogram and sentiment_bars read a metrics
// file, similarity_scatter a pairs CSV (text_bleu, latent_cosine and optional
// pretrain_cosine columns), sweep_curve the CSV written by cmd_sweep.
std::string render_plot(PlotKind kind, std::string_view input_text);
void cmd_plot(const std::filesystem::path& input, std::string_view kind, const std::filesystem::path& out);

struct SynthSummary {
  std::size_t samples = 0;
  CorpusStats stats;
};

SynthSummary cmd_synth(std::size_t n, std::uint64_t seed, const std::filesystem::path& out, std::ostream* log = nullptr);

}  // namespace gtp
