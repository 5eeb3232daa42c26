#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gtp/latent.hpp"
#include "gtp/matrix.hpp"
#include "gtp/textmetric.hpp"

namespace gtp {

enum class Modality { kSource, kTarget };

struct TopologyVector {
  std::vector<double> probabilities;
  Modality modality = Modality::kSource;
  std::size_t size() const { return probabilities.size(); }
};

// u.v / (|u||v|) clamped to [-1, 1]. Throws ZeroNormError (index 0 or 1).
double cosine(std::span<const double> u, std::span<const double> v);

// Symmetric with an exact unit diagonal. ZeroNormError carries the index of
// the first zero representation.
Matrix pairwise_cosine_matrix(std::span<const LatentRep> reps);
Matrix pairwise_cosine_matrix(std::span<const std::vector<double>> vectors);

TopologyVector topology_from_similarities(std::span<const double> sims, Modality modality,
                                          double temperature = 1.0);
// Softmax over cosine similarities between the anchor and each member.
TopologyVector topology_vector(const LatentRep& anchor, std::span<const LatentRep> group,
                               double temperature = 1.0);
// Softmax over BLEU(anchor as hypothesis, member as reference). With
// symmetric set, each similarity is the mean of both argument orders.
TopologyVector topology_vector(const TokenSequence& anchor, std::span<const TokenSequence> group,
                               const BleuConfig& bleu_cfg, double temperature = 1.0, bool symmetric = false);

inline constexpr std::size_t kHistogramBins = 40;

struct SpreadStats {
  double mean = 0.0;
  double std = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;
  // kHistogramBins uniform bins over [-1, 1]; 1.0 falls in the last bin.
  std::vector<std::size_t> histogram;
};

// Statistics over strictly off-diagonal entries of a square matrix.
SpreadStats similarity_spread_stats(const Matrix& m);
double histogram_bin_left(std::size_t bin);
std::string histogram_csv(const SpreadStats& stats);
void write_histogram_csv(const SpreadStats& stats, const std::filesystem::path& path);

}  // namespace gtp
