#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "gtp/autodiff.hpp"
#include "gtp/latent.hpp"
#include "gtp/textmetric.hpp"

namespace gtp {

inline constexpr std::size_t kSentimentClasses = 7;

struct LossCoefficients {
  double alpha = 500.0;  // group topology preservation
  double beta = 5.0;     // sentiment alignment
  double gamma = 0.25;   // parameter regularizer
};

// Per-sample (or batch-mean) loss terms plus the weights that combine them.
struct LossBreakdown {
  double m2m = 0.0;
  double t2t = 0.0;
  double m2t = 0.0;
  double gtp = 0.0;
  double sentiment = 0.0;
  double reg = 0.0;
  double total = 0.0;
  LossCoefficients coefficients;
};

// total = m2m + t2t + m2t + alpha*gtp + beta*sentiment + gamma*reg.
// Throws InvalidConfig on a negative coefficient.
LossBreakdown loss_total(const LossBreakdown& parts, const LossCoefficients& coefficients);
void validate(const LossCoefficients& coefficients);

// Squared Frobenius reconstruction error, summed.
Var loss_m2m(Var features, Var reconstruction);

// Mean teacher-forced cross-entropy; PAD targets are masked.
Var loss_t2t(std::span<const std::size_t> targets, Var logits);

// |music_latent - mapped_text_latent|^2
Var loss_m2t(Var music_latent, Var mapped_text_latent);

struct GtpOptions {
  double temperature = 1.0;
};

// Text-side similarities BLEU(anchor, member_j) for the target topology.
std::vector<double> gtp_text_similarities(const TokenSequence& anchor, std::span<const TokenSequence> group,
                                          const BleuConfig& cfg, bool symmetric = false);

// |softmax(cos(anchor, group_j)) - softmax(text_sims_j)|^2. Group latents are
// detached: their values are copied onto the tape as constants, so no
// gradient ever reaches them. Only the anchor is differentiated.
Var loss_gtp(Var anchor_latent, std::span<const Var> group_latents, std::span<const double> text_sims,
             const GtpOptions& opts = {});
Var loss_gtp(Var anchor_latent, std::span<const LatentRep> group_latents, std::span<const double> text_sims,
             const GtpOptions& opts = {});

// |s - predicted|^2 over the 7 sentiment classes.
Var loss_sentiment(Var target_distribution, Var predicted_distribution);

// max(0, |a - p|^2 - |a - n|^2 + margin)
Var loss_triplet(Var anchor, Var positive, Var negative, double margin);

// |latent_i - latent_j|^2 when text_sim >= threshold, else 0.
Var loss_pairwise(Var latent_i, Var latent_j, double text_sim, double threshold);

// NT-Xent: -log(exp(cos(z, z+)/T) / sum over {z+} U negatives of exp(cos(z, .)/T)).
Var loss_contrastive(Var latent, Var augmented, std::span<const Var> negatives, double temperature);

struct AugmentOptions {
  double noise_sigma = 0.01;
  double mask_fraction = 0.10;
  double scale_jitter = 0.05;
};

// Positive view for the contrastive variant: global scale jitter, a random
// contiguous time-axis mask, then additive Gaussian noise. Features are
// bins x frames.
Matrix contrastive_augment(const Matrix& features, std::mt19937_64& rng, const AugmentOptions& opts = {});

// Positive = highest text similarity, negative = lowest, among candidates
// other than the anchor. Ties resolve to the lowest index.
std::pair<std::size_t, std::size_t> mine_triplet(std::size_t anchor, std::span<const double> text_sims);

}  // namespace gtp
