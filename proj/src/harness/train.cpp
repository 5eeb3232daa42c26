#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <unordered_map>

#include "gtp/errors.hpp"
#include "gtp/harness.hpp"
#include "gtp/optim.hpp"

namespace gtp {

std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold) {
  std::uint64_t x = seed * 0x9E3779B97F4A7C15ULL + fold * 0xBF58476D1CE4E5B9ULL + 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

FoldData make_fold(std::span<const PairedSample> corpus, const FoldSplit& split) {
  std::unordered_map<std::string_view, const PairedSample*> by_id;
  for (const auto& s : corpus) by_id.emplace(s.id, &s);
  auto resolve = [&](const std::vector<std::string>& ids, std::vector<const PairedSample*>& out) {
    for (const auto& id : ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw InvalidInput("fold references unknown id '" + id + "'");
      out.push_back(it->second);
    }
  };
  FoldData f;
  f.fold = split.fold;
  resolve(split.train_ids, f.train);
  resolve(split.test_ids, f.test);
  std::set<std::string_view> train_ids;
  for (const auto* s : f.train) train_ids.insert(s->id);
  for (const auto* s : f.test)
    if (train_ids.count(s->id)) throw Error("leakage: test id '" + s->id + "' is also in the training fold");
  std::vector<std::string> texts;
  for (const auto* s : f.train) texts.push_back(s->text);
  f.vocab = Vocabulary::build(texts);
  for (const auto* s : f.train) f.train_tokens.push_back(tokenize(s->text, f.vocab));
  for (const auto* s : f.test) f.test_tokens.push_back(tokenize(s->text, f.vocab));
  return f;
}

namespace {

void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(rng() % i)]);
}

std::vector<std::size_t> targets_of(const TokenSequence& seq) { return {seq.ids.begin() + 1, seq.ids.end()}; }

Var mean_of(std::vector<Var>& terms) {
  return ad::scale(ad::sum(ad::concat_cols(terms)), 1.0 / static_cast<double>(terms.size()));
}

SpreadStats latent_spread(ModelBundle& model, std::span<const PairedSample> corpus, Matrix* cosine_out) {
  std::vector<LatentRep> latents;
  latents.reserve(corpus.size());
  for (const auto& s : corpus) latents.push_back(model.encode_source(s.features));
  Matrix cos = pairwise_cosine_matrix(latents);
  SpreadStats st = similarity_spread_stats(cos);
  if (cosine_out) *cosine_out = std::move(cos);
  return st;
}

LossBreakdown scaled(LossBreakdown b, double n, const LossCoefficients& c, double reg) {
  if (n > 0) {
    b.m2m /= n;
    b.t2t /= n;
    b.m2t /= n;
    b.gtp /= n;
    b.sentiment /= n;
  }
  b.reg = reg;
  return loss_total(b, c);
}

}  // namespace

std::vector<PairedSample> fold_corpus(const RunConfig& cfg, std::span<const PairedSample> corpus,
                                      const FoldSplit& split) {
  if (!cfg.standardize_features) return {corpus.begin(), corpus.end()};
  const FoldData raw = make_fold(corpus, split);
  return standardize_features(corpus, fit_feature_scaler(raw.train));
}

PretrainResult pretrain(const RunConfig& cfg, std::span<const PairedSample> corpus, const FoldData& fold,
                        std::uint64_t seed, const MetricsSink& sink) {
  validate(cfg);
  const std::uint64_t fs = fold_seed(seed, fold.fold);
  PretrainResult out{ModelBundle(model_config(cfg, fold.vocab.size()), fs), {}, 0.0};
  ModelBundle& model = out.model;
  std::mt19937_64 rng(fs ^ 0x70726574ULL);
  std::vector<std::size_t> order(fold.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const LossCoefficients coeffs{cfg.alpha, cfg.beta, cfg.gamma};

  for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    shuffle(order, rng);
    LossBreakdown acc;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
      const std::size_t e = std::min(order.size(), b + cfg.batch);
      Tape t;
      std::vector<Var> terms;
      for (std::size_t i = b; i < e; ++i) {
        const PairedSample& s = *fold.train[order[i]];
        const TokenSequence& tok = fold.train_tokens[order[i]];
        Var zf = model.encode_source(t, s.features);
        Var m2m = loss_m2m(t.constant(transpose(s.features)), model.decode_source(t, zf, s.features.cols()));
        Var zg = model.encode_text(t, tok.ids);
        Var t2t = loss_t2t(targets_of(tok), model.decode_text_logits(t, zg, tok.ids));
        acc.m2m += m2m.scalar();
        acc.t2t += t2t.scalar();
        terms.push_back(ad::add(m2m, t2t));
      }
      Var loss = mean_of(terms);
      model.params().zero_grad();
      t.backward(loss);
      adam_step(model.params(), cfg.lr, 0.0);
    }
    if (sink) {
      MetricsRecord r;
      r.stage = "pretrain";
      r.fold = fold.fold;
      r.seed = seed;
      r.epoch = epoch + 1;
      r.losses = scaled(acc, static_cast<double>(order.size()), coeffs, model.params().regularizer());
      sink(r);
    }
  }
  model.params().zero_grad();
  out.spread = latent_spread(model, corpus, nullptr);
  std::vector<std::pair<TokenSequence, TokenSequence>> pairs;
  for (const auto& tok : fold.train_tokens) {
    auto ids = model.decode_greedy(model.encode_text(tok.ids), cfg.max_len);
    pairs.emplace_back(from_ids(ids, fold.vocab), tok);
  }
  out.text_bleu = corpus_bleu(pairs, 4);
  return out;
}

FoldResult joint_train(const RunConfig& cfg, std::span<const PairedSample> corpus, const FoldData& fold,
                       const PretrainResult& pre, std::uint64_t seed, const MetricsSink& sink,
                       ModelBundle* trained) {
  validate(cfg);
  const std::uint64_t fs = fold_seed(seed, fold.fold);
  ModelBundle model = pre.model;
  model.params().reset_optimizer();
  model.params().zero_grad();
  std::mt19937_64 rng(fs ^ 0x6a6f696eULL);
  const Variant variant = cfg.variant;
  const LossCoefficients coeffs{cfg.alpha, uses_sentiment(variant) ? cfg.beta : 0.0, cfg.gamma};
  const BleuConfig text_sim{cfg.gtp_bleu_order, true, 0.1};
  const bool needs_queue = uses_gtp(variant) || variant == Variant::kTriplet || variant == Variant::kContrastive;

  std::vector<std::size_t> order(fold.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  MomentumQueue queue(cfg.k - 1, model, cfg.momentum);
  if (needs_queue) {
    std::vector<std::size_t> fill = order;
    shuffle(fill, rng);
    for (std::size_t i = 0; i < std::min(fill.size(), queue.capacity()); ++i) {
      const std::size_t j = fill[i];
      queue.push(fold.train[j]->features, fold.train_tokens[j], fold.train[j]->id);
    }
  }

  for (std::size_t epoch = 0; epoch < cfg.joint_epochs; ++epoch) {
    shuffle(order, rng);
    LossBreakdown acc;
    double cmp_total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
      const std::size_t e = std::min(order.size(), b + cfg.batch);
      Tape t;
      std::vector<Var> terms;
      std::vector<Var> zfs;
      for (std::size_t i = b; i < e; ++i) zfs.push_back(model.encode_source(t, fold.train[order[i]]->features));

      for (std::size_t i = b; i < e; ++i) {
        const PairedSample& s = *fold.train[order[i]];
        const TokenSequence& tok = fold.train_tokens[order[i]];
        const auto targets = targets_of(tok);
        Var zf = zfs[i - b];
        if (variant == Variant::kEncoderDecoder) {
          Var t2t = loss_t2t(targets, model.decode_text_logits(t, zf, tok.ids));
          acc.t2t += t2t.scalar();
          terms.push_back(t2t);
          continue;
        }
        Var zg = model.encode_text(t, tok.ids);
        Var m2m = loss_m2m(t.constant(transpose(s.features)), model.decode_source(t, zf, s.features.cols()));
        Var t2t = loss_t2t(targets, model.decode_text_logits(t, zg, tok.ids));
        // The music route into the decoder is supervised as well; its logits
        // also feed the sentiment head.
        Var gen_logits = model.decode_text_logits(t, model.generation_latent(zf), tok.ids);
        Var m2t = ad::add(ad::add(loss_m2t(zf, model.map_latent(zg, MapDirection::kTextToSource)),
                                  loss_m2t(model.map_latent(zf, MapDirection::kSourceToText), zg)),
                          ad::scale(loss_t2t(targets, gen_logits), cfg.route_weight));
        acc.m2m += m2m.scalar();
        acc.t2t += t2t.scalar();
        acc.m2t += m2t.scalar();
        Var total = ad::add(ad::add(m2m, t2t), m2t);

        if (uses_gtp(variant) && queue.size() > 0) {
          std::vector<LatentRep> group;
          std::vector<TokenSequence> texts;
          for (const auto& q : queue.entries()) {
            group.push_back(q.latent);
            texts.push_back(q.text);
          }
          auto sims = gtp_text_similarities(tok, texts, text_sim, cfg.symmetric_bleu);
          Var gtp = loss_gtp(zf, group, sims, GtpOptions{cfg.gtp_temperature});
          acc.gtp += gtp.scalar();
          total = ad::add(total, ad::scale(gtp, cfg.alpha));
        }
        if (uses_sentiment(variant)) {
          Matrix target(1, kSentimentClasses);
          for (std::size_t c = 0; c < kSentimentClasses; ++c) target(0, c) = s.sentiment[c];
          Var ls = loss_sentiment(t.constant(target), model.sentiment(gen_logits, cfg.reference_sentiment_head));
          acc.sentiment += ls.scalar();
          total = ad::add(total, ad::scale(ls, cfg.beta));
          if (cfg.reference_sentiment_head) {
            Matrix bag(1, fold.vocab.size(), 0.0);
            for (std::size_t id : targets) bag(0, id) += 1.0 / static_cast<double>(targets.size());
            Var lh = loss_sentiment(t.constant(target), model.sentiment_of_tokens(t.constant(std::move(bag))));
            total = ad::add(total, ad::scale(lh, cfg.beta));
          }
        }
        if (variant == Variant::kPairwise) {
          for (std::size_t j = b; j < e; ++j) {
            if (j == i) continue;
            const double sim = bleu(tok.raw, fold.train_tokens[order[j]].raw, text_sim);
            if (sim < cfg.pair_threshold) continue;
            Var lp = loss_pairwise(zf, t.constant(zfs[j - b].value()), sim, cfg.pair_threshold);
            cmp_total += lp.scalar();
            total = ad::add(total, ad::scale(lp, cfg.comparison_weight));
          }
        }
        if (variant == Variant::kTriplet && queue.size() >= 2) {
          std::vector<double> sims{0.0};
          for (const auto& q : queue.entries()) sims.push_back(bleu(tok.raw, q.text.raw, text_sim));
          auto [pos, neg] = mine_triplet(0, sims);
          Var lt = loss_triplet(zf, t.constant(queue.entries()[pos - 1].latent.values),
                                t.constant(queue.entries()[neg - 1].latent.values), cfg.triplet_margin);
          cmp_total += lt.scalar();
          total = ad::add(total, ad::scale(lt, cfg.comparison_weight));
        }
        if (variant == Variant::kContrastive && queue.size() > 0) {
          Var zplus = model.encode_source(t, contrastive_augment(s.features, rng));
          std::vector<Var> negatives;
          for (const auto& q : queue.entries()) negatives.push_back(t.constant(q.latent.values));
          Var lc = loss_contrastive(zf, zplus, negatives, cfg.contrastive_temperature);
          cmp_total += lc.scalar();
          total = ad::add(total, ad::scale(lc, cfg.comparison_weight));
        }
        terms.push_back(total);
      }
      Var loss = mean_of(terms);
      model.params().zero_grad();
      t.backward(loss);
      adam_step(model.params(), cfg.lr, cfg.gamma);
      if (needs_queue) {
        queue.momentum_update(model.params());
        for (std::size_t i = b; i < e; ++i)
          queue.push(fold.train[order[i]]->features, fold.train_tokens[order[i]], fold.train[order[i]]->id);
      }
    }
    if (sink) {
      MetricsRecord r;
      r.stage = "joint";
      r.fold = fold.fold;
      r.seed = seed;
      r.epoch = epoch + 1;
      r.losses = scaled(acc, static_cast<double>(order.size()), coeffs, model.params().regularizer());
      r.losses.total += cfg.comparison_weight * cmp_total / static_cast<double>(order.size());
      sink(r);
    }
  }
  model.params().zero_grad();

  FoldResult res;
  res.fold = fold.fold;
  res.seed = seed;
  res.pretrain_spread = pre.spread;
  std::vector<std::pair<TokenSequence, TokenSequence>> pairs;
  SentimentDistribution ref{}, gen{};
  for (std::size_t i = 0; i < fold.test.size(); ++i) {
    const PairedSample& s = *fold.test[i];
    TokenSequence hyp = from_ids(model.generate(s.features, cfg.max_len), fold.vocab);
    const std::string text = detokenize(hyp);
    const auto gs = lexicon_sentiment(text);
    for (std::size_t c = 0; c < kSentimentCount; ++c) {
      ref[c] += s.sentiment[c] / static_cast<double>(fold.test.size());
      gen[c] += gs[c] / static_cast<double>(fold.test.size());
    }
    res.generated.push_back(text);
    pairs.emplace_back(std::move(hyp), TokenSequence{{}, split_tokens(s.text)});
  }
  res.bleu = pairs.empty() ? 0.0 : corpus_bleu(pairs, 4);
  res.spread = latent_spread(model, corpus, &res.latent_cosine);
  res.sentiment = SentimentComparison{ref, gen, pearson(ref, gen)};
  if (sink) {
    MetricsRecord r;
    r.stage = "eval";
    r.fold = fold.fold;
    r.seed = seed;
    r.epoch = cfg.joint_epochs;
    r.losses.coefficients = coeffs;
    r.losses.reg = model.params().regularizer();
    r.bleu = res.bleu;
    r.spread = res.spread;
    r.sentiment = res.sentiment;
    sink(r);
  }
  if (trained) *trained = std::move(model);
  return res;
}

}  // namespace gtp
