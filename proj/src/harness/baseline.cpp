#include <ostream>

#include "gtp/errors.hpp"
#include "gtp/harness.hpp"

namespace gtp {

namespace {

double score(const std::vector<std::string>& hyps, const std::vector<const PairedSample*>& refs) {
  std::vector<std::pair<TokenSequence, TokenSequence>> pairs;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    pairs.emplace_back(TokenSequence{{}, split_tokens(hyps[i])}, TokenSequence{{}, split_tokens(refs[i]->text)});
  }
  return pairs.empty() ? 0.0 : corpus_bleu(pairs, 4);
}

// Exact tag match when the training fold has that combination, otherwise the
// group sharing the most fields (first in tag order on ties).
const std::string& representative_for(const TagSet& q, const std::map<TagSet, std::string>& reps) {
  if (auto it = reps.find(q); it != reps.end()) return it->second;
  const std::string* best = nullptr;
  int best_overlap = -1;
  for (const auto& [tags, text] : reps) {
    const int ov = q.overlap(tags);
    if (ov > best_overlap) {
      best_overlap = ov;
      best = &text;
    }
  }
  return *best;
}

}  // namespace

BaselineSummary run_baselines(const RunConfig& cfg, std::span<const PairedSample> corpus) {
  validate(cfg);
  if (corpus.empty()) throw InvalidInput("baselines need a non-empty corpus");
  std::vector<std::string> ids;
  for (const auto& s : corpus) ids.push_back(s.id);
  const auto splits = kfold_split(ids, cfg.folds, cfg.data_seed);
  BaselineSummary out;
  for (const auto& split : splits) {
    if (cfg.fold >= 0 && split.fold != static_cast<std::size_t>(cfg.fold)) continue;
    FoldData fold = make_fold(corpus, split);
    std::vector<PairedSample> train;
    for (const auto* s : fold.train) train.push_back(*s);
    const auto reps = tags_representative(train);
    std::vector<std::string> knn, rep;
    for (const auto* s : fold.test) {
      knn.push_back(tags_knn(s->tags, train));
      rep.push_back(representative_for(s->tags, reps));
    }
    out.knn_bleu.push_back(score(knn, fold.test));
    out.representative_bleu.push_back(score(rep, fold.test));
  }
  for (double v : out.knn_bleu) out.knn_mean += v / static_cast<double>(out.knn_bleu.size());
  for (double v : out.representative_bleu)
    out.representative_mean += v / static_cast<double>(out.representative_bleu.size());
  return out;
}

BaselineSummary cmd_baseline(const RunConfig& cfg, std::ostream* log) {
  const auto corpus = load_corpus(cfg);
  auto out = run_baselines(cfg, corpus);
  if (log) {
    for (std::size_t f = 0; f < out.knn_bleu.size(); ++f)
      *log << "fold " << f << "  tags_knn " << out.knn_bleu[f] << "  tags_representative " << out.representative_bleu[f]
           << '\n';
    *log << "mean  tags_knn " << out.knn_mean << "  tags_representative " << out.representative_mean << '\n';
  }
  return out;
}

}  // namespace gtp
