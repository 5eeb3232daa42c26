#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "gtp/errors.hpp"
#include "gtp/harness.hpp"

namespace gtp {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// text_bleu, latent_cosine and the pre-trained cosine for every unordered pair.
std::string pairs_csv(std::span<const PairedSample> corpus, const Matrix& joint_cos, ModelBundle& pre_model,
                      const BleuConfig& text_sim) {
  std::vector<LatentRep> latents;
  for (const auto& s : corpus) latents.push_back(pre_model.encode_source(s.features));
  const Matrix pre_cos = pairwise_cosine_matrix(latents);
  std::vector<std::vector<std::string>> tokens;
  for (const auto& s : corpus) tokens.push_back(split_tokens(s.text));
  std::ostringstream os;
  os << "id_a,id_b,text_bleu,latent_cosine,pretrain_cosine\n";
  for (std::size_t i = 0; i < corpus.size(); ++i)
    for (std::size_t j = i + 1; j < corpus.size(); ++j)
      os << corpus[i].id << ',' << corpus[j].id << ',' << fmt(bleu(tokens[i], tokens[j], text_sim)) << ','
         << fmt(joint_cos(i, j)) << ',' << fmt(pre_cos(i, j)) << '\n';
  return os.str();
}

}  // namespace

TrainSummary cmd_train(const RunConfig& cfg, std::ostream* log) {
  validate(cfg);
  const auto corpus = load_corpus(cfg);
  std::vector<std::string> ids;
  for (const auto& s : corpus) ids.push_back(s.id);
  const auto splits = kfold_split(ids, cfg.folds, cfg.data_seed);
  if (cfg.fold >= static_cast<int>(splits.size()))
    throw InvalidConfig("fold " + std::to_string(cfg.fold) + " out of range");

  TrainSummary out;
  out.run_id = effective_run_id(cfg);
  const std::filesystem::path dir = std::filesystem::path(cfg.out_dir) / out.run_id;
  std::filesystem::create_directories(dir);
  out.metrics_path = dir / "metrics.jsonl";
  std::ofstream metrics(out.metrics_path, std::ios::binary);
  if (!metrics) throw IoError("cannot write " + out.metrics_path.string());
  MetricsSink sink = [&](const MetricsRecord& r) {
    MetricsRecord rec = r;
    rec.run_id = out.run_id;
    metrics << to_json_line(rec) << '\n';
    metrics.flush();
  };

  write_text(dir / "config.txt", [&] {
    std::ostringstream os;
    for (const auto& [k, v] : describe(cfg)) os << k << " = " << v << '\n';
    return os.str();
  }());

  const BleuConfig text_sim{cfg.gtp_bleu_order, true, 0.1};
  for (const auto& split : splits) {
    if (cfg.fold >= 0 && split.fold != static_cast<std::size_t>(cfg.fold)) continue;
    const std::vector<PairedSample> seen = fold_corpus(cfg, corpus, split);
    FoldData fold = make_fold(seen, split);
    PretrainResult pre = pretrain(cfg, seen, fold, cfg.seed, sink);
    ModelBundle trained = pre.model;
    FoldResult res = joint_train(cfg, seen, fold, pre, cfg.seed, sink, &trained);
    const std::string tag = "fold" + std::to_string(split.fold);
    if (cfg.write_weights) trained.save(dir / ("weights_" + tag + ".bin"));
    write_text(dir / ("pairs_" + tag + ".csv"), pairs_csv(seen, res.latent_cosine, pre.model, text_sim));
    write_histogram_csv(res.spread, dir / ("spread_" + tag + ".csv"));
    {
      std::ostringstream os;
      os << "id\tgenerated\treference\n";
      for (std::size_t i = 0; i < fold.test.size(); ++i)
        os << fold.test[i]->id << '\t' << res.generated[i] << '\t' << fold.test[i]->text << '\n';
      write_text(dir / ("generated_" + tag + ".tsv"), os.str());
    }
    if (log) {
      *log << out.run_id << " fold " << split.fold << "  bleu " << res.bleu << "  spread std " << res.spread.std
           << " (pre-trained " << res.pretrain_spread.std << ")  sentiment r " << res.sentiment.pearson << '\n';
    }
    out.folds.push_back(std::move(res));
  }
  for (const auto& f : out.folds) out.mean_bleu += f.bleu / static_cast<double>(out.folds.size());
  if (log) *log << out.run_id << " mean bleu " << out.mean_bleu << '\n';
  return out;
}

std::vector<SweepPoint> cmd_sweep(const RunConfig& cfg, std::string_view param, std::span<const double> values,
                                  std::ostream* log) {
  if (param != "k" && param != "alpha") throw InvalidConfig("sweep parameter must be k or alpha");
  if (values.empty()) throw InvalidConfig("sweep needs at least one value");
  std::vector<SweepPoint> points;
  const std::string base = effective_run_id(cfg);
  for (double v : values) {
    RunConfig c = cfg;
    std::ostringstream value;
    value << v;
    apply_setting(c, std::string(param), value.str());
    c.run_id = base + "_" + std::string(param) + value.str();
    points.push_back({v, cmd_train(c, log)});
  }
  std::filesystem::create_directories(cfg.out_dir);
  std::ostringstream os;
  os << "param,value,mean_bleu\n";
  for (const auto& p : points) os << param << ',' << fmt(p.value) << ',' << fmt(p.summary.mean_bleu) << '\n';
  write_text(std::filesystem::path(cfg.out_dir) / (base + "_sweep_" + std::string(param) + ".csv"), os.str());
  return points;
}

SynthSummary cmd_synth(std::size_t n, std::uint64_t seed, const std::filesystem::path& out, std::ostream* log) {
  const auto corpus = synth_generate(n, seed);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  save_dataset(corpus, out);
  SynthSummary s;
  s.samples = corpus.size();
  s.stats = corpus_statistics(corpus, BleuConfig{});
  if (log) {
    *log << "wrote " << s.samples << " samples to " << out.string() << '\n'
         << "feature cosine mean " << s.stats.feature_cosine_mean << " (min " << s.stats.feature_cosine_min << ")\n"
         << "text BLEU below " << s.stats.bleu_threshold << ": " << 100.0 * s.stats.bleu_below_threshold_fraction
         << "% of " << s.stats.pairs << " pairs\n";
  }
  return s;
}

}  // namespace gtp
