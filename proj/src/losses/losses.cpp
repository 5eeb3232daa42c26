#include "gtp/losses.hpp"

#include <algorithm>
#include <cmath>

#include "gtp/errors.hpp"

namespace gtp {

void validate(const LossCoefficients& c) {
  if (c.alpha < 0.0 || c.beta < 0.0 || c.gamma < 0.0) throw InvalidConfig("loss coefficients must be non-negative");
}

LossBreakdown loss_total(const LossBreakdown& parts, const LossCoefficients& coefficients) {
  validate(coefficients);
  LossBreakdown out = parts;
  out.coefficients = coefficients;
  out.total = parts.m2m + parts.t2t + parts.m2t + coefficients.alpha * parts.gtp + coefficients.beta * parts.sentiment +
              coefficients.gamma * parts.reg;
  return out;
}

namespace {

void require_same_size(const Var& a, const Var& b, const char* what) {
  if (!a.value().same_shape(b.value())) {
    throw ShapeError(std::string(what) + ": " + a.value().shape_string() + " vs " + b.value().shape_string());
  }
}

Var zero_scalar(Tape& t) { return t.constant(Matrix(1, 1)); }

}  // namespace

Var loss_m2m(Var features, Var reconstruction) {
  require_same_size(features, reconstruction, "loss_m2m");
  return ad::sum_squares(ad::sub(features, reconstruction));
}

Var loss_t2t(std::span<const std::size_t> targets, Var logits) {
  if (logits.rows() != targets.size()) {
    throw ShapeError("loss_t2t: " + std::to_string(logits.rows()) + " logit positions for " +
                     std::to_string(targets.size()) + " targets");
  }
  return ad::cross_entropy(logits, targets, kPadId);
}

Var loss_m2t(Var music_latent, Var mapped_text_latent) {
  require_same_size(music_latent, mapped_text_latent, "loss_m2t");
  return ad::sum_squares(ad::sub(music_latent, mapped_text_latent));
}

std::vector<double> gtp_text_similarities(const TokenSequence& anchor, std::span<const TokenSequence> group,
                                          const BleuConfig& cfg, bool symmetric) {
  std::vector<double> sims;
  sims.reserve(group.size());
  for (const auto& member : group) {
    double s = bleu(anchor.raw, member.raw, cfg);
    if (symmetric) s = 0.5 * (s + bleu(member.raw, anchor.raw, cfg));
    sims.push_back(s);
  }
  return sims;
}

Var loss_gtp(Var anchor_latent, std::span<const Var> group_latents, std::span<const double> text_sims,
             const GtpOptions& opts) {
  if (group_latents.empty()) throw InvalidInput("GTP loss needs a non-empty group reference");
  if (group_latents.size() != text_sims.size()) throw ShapeError("GTP loss: group and text similarity counts differ");
  Tape& tape = *anchor_latent.tape();
  std::vector<Var> cosines;
  cosines.reserve(group_latents.size());
  for (std::size_t j = 0; j < group_latents.size(); ++j) {
    Var detached = tape.constant(group_latents[j].value());
    try {
      cosines.push_back(ad::cosine(anchor_latent, detached));
    } catch (const ZeroNormError& e) {
      throw ZeroNormError(std::string("GTP loss: ") + e.what(), e.index() == 0 ? 0 : j + 1);
    }
  }
  Var source = ad::softmax_rows(ad::concat_cols(cosines), opts.temperature);
  Var target = tape.constant(Matrix::row_vector(softmax(text_sims, opts.temperature)));
  return ad::sum_squares(ad::sub(source, target));
}

Var loss_gtp(Var anchor_latent, std::span<const LatentRep> group_latents, std::span<const double> text_sims,
             const GtpOptions& opts) {
  Tape& tape = *anchor_latent.tape();
  std::vector<Var> group;
  group.reserve(group_latents.size());
  for (const auto& rep : group_latents) group.push_back(tape.constant(rep.values));
  return loss_gtp(anchor_latent, group, text_sims, opts);
}

Var loss_sentiment(Var target_distribution, Var predicted_distribution) {
  if (target_distribution.value().size() != kSentimentClasses ||
      predicted_distribution.value().size() != kSentimentClasses) {
    throw ShapeError("sentiment distributions must have 7 classes");
  }
  require_same_size(target_distribution, predicted_distribution, "loss_sentiment");
  return ad::sum_squares(ad::sub(target_distribution, predicted_distribution));
}

Var loss_triplet(Var anchor, Var positive, Var negative, double margin) {
  require_same_size(anchor, positive, "loss_triplet");
  require_same_size(anchor, negative, "loss_triplet");
  Var d_pos = ad::sum_squares(ad::sub(anchor, positive));
  Var d_neg = ad::sum_squares(ad::sub(anchor, negative));
  Tape& tape = *anchor.tape();
  return ad::relu(ad::add(ad::sub(d_pos, d_neg), tape.constant(Matrix(1, 1, margin))));
}

Var loss_pairwise(Var latent_i, Var latent_j, double text_sim, double threshold) {
  require_same_size(latent_i, latent_j, "loss_pairwise");
  if (text_sim < threshold) return zero_scalar(*latent_i.tape());
  return ad::sum_squares(ad::sub(latent_i, latent_j));
}

Var loss_contrastive(Var latent, Var augmented, std::span<const Var> negatives, double temperature) {
  if (negatives.empty()) throw InvalidInput("contrastive loss needs at least one negative");
  if (!(temperature > 0.0)) throw InvalidConfig("contrastive temperature must be positive");
  require_same_size(latent, augmented, "loss_contrastive");
  std::vector<Var> sims{ad::cosine(latent, augmented)};
  for (const Var& n : negatives) {
    require_same_size(latent, n, "loss_contrastive");
    sims.push_back(ad::cosine(latent, n));
  }
  Var logp = ad::log_softmax_rows(ad::scale(ad::concat_cols(sims), 1.0 / temperature));
  return ad::scale(ad::element(logp, 0, 0), -1.0);
}

Matrix contrastive_augment(const Matrix& features, std::mt19937_64& rng, const AugmentOptions& opts) {
  Matrix out = features;
  std::uniform_real_distribution<double> jitter(1.0 - opts.scale_jitter, 1.0 + opts.scale_jitter);
  out *= jitter(rng);
  const std::size_t frames = out.cols();
  const auto width = static_cast<std::size_t>(std::floor(opts.mask_fraction * static_cast<double>(frames)));
  if (width > 0 && width < frames) {
    std::uniform_int_distribution<std::size_t> start(0, frames - width);
    const std::size_t s = start(rng);
    for (std::size_t r = 0; r < out.rows(); ++r)
      for (std::size_t c = s; c < s + width; ++c) out(r, c) = 0.0;
  }
  std::normal_distribution<double> noise(0.0, opts.noise_sigma);
  for (auto& x : out.values()) x += noise(rng);
  return out;
}

std::pair<std::size_t, std::size_t> mine_triplet(std::size_t anchor, std::span<const double> text_sims) {
  if (text_sims.size() < 3 || anchor >= text_sims.size()) {
    throw InvalidInput("triplet mining needs the anchor plus at least two candidates");
  }
  std::size_t pos = text_sims.size(), neg = text_sims.size();
  for (std::size_t j = 0; j < text_sims.size(); ++j) {
    if (j == anchor) continue;
    if (pos == text_sims.size() || text_sims[j] > text_sims[pos]) pos = j;
    if (neg == text_sims.size() || text_sims[j] < text_sims[neg]) neg = j;
  }
  if (pos == neg) {
    // All candidates tie; pick two distinct members deterministically.
    for (std::size_t j = 0; j < text_sims.size(); ++j)
      if (j != anchor && j != pos) {
        neg = j;
        break;
      }
  }
  return {pos, neg};
}

}  // namespace gtp
