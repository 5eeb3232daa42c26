#include "gtp/simkernel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gtp/errors.hpp"

namespace gtp {

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ShapeError("cosine of vectors with different lengths");
  const double nu = std::sqrt(squared_norm(u));
  const double nv = std::sqrt(squared_norm(v));
  if (nu == 0.0) throw ZeroNormError("cosine of zero vector", 0);
  if (nv == 0.0) throw ZeroNormError("cosine of zero vector", 1);
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

namespace {

template <typename GetSpan>
Matrix cosine_matrix(std::size_t n, GetSpan&& get) {
  if (n < 2) throw InvalidInput("pairwise cosine needs at least two representations");
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    norms[i] = std::sqrt(squared_norm(get(i)));
    if (norms[i] == 0.0) throw ZeroNormError("representation " + std::to_string(i) + " has zero norm", i);
    if (get(i).size() != get(0).size()) throw ShapeError("representations differ in length");
  }
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double c = std::clamp(dot(get(i), get(j)) / (norms[i] * norms[j]), -1.0, 1.0);
      m(i, j) = c;
      m(j, i) = c;
    }
  }
  return m;
}

}  // namespace

Matrix pairwise_cosine_matrix(std::span<const LatentRep> reps) {
  return cosine_matrix(reps.size(), [&](std::size_t i) { return reps[i].flatten(); });
}

Matrix pairwise_cosine_matrix(std::span<const std::vector<double>> vectors) {
  return cosine_matrix(vectors.size(), [&](std::size_t i) { return std::span<const double>(vectors[i]); });
}

TopologyVector topology_from_similarities(std::span<const double> sims, Modality modality, double temperature) {
  if (sims.empty()) throw InvalidInput("topology vector needs a non-empty group");
  return TopologyVector{softmax(sims, temperature), modality};
}

TopologyVector topology_vector(const LatentRep& anchor, std::span<const LatentRep> group, double temperature) {
  if (group.empty()) throw InvalidInput("topology vector needs a non-empty group");
  std::vector<double> sims;
  sims.reserve(group.size());
  for (std::size_t j = 0; j < group.size(); ++j) {
    try {
      sims.push_back(cosine(anchor.flatten(), group[j].flatten()));
    } catch (const ZeroNormError& e) {
      throw ZeroNormError(std::string("topology vector: ") + e.what(), e.index() == 0 ? 0 : j + 1);
    }
  }
  return topology_from_similarities(sims, Modality::kSource, temperature);
}

TopologyVector topology_vector(const TokenSequence& anchor, std::span<const TokenSequence> group,
                               const BleuConfig& bleu_cfg, double temperature, bool symmetric) {
  if (group.empty()) throw InvalidInput("topology vector needs a non-empty group");
  std::vector<double> sims;
  sims.reserve(group.size());
  for (const auto& member : group) {
    double s = bleu(anchor.raw, member.raw, bleu_cfg);
    if (symmetric) s = 0.5 * (s + bleu(member.raw, anchor.raw, bleu_cfg));
    sims.push_back(s);
  }
  return topology_from_similarities(sims, Modality::kTarget, temperature);
}

double histogram_bin_left(std::size_t bin) {
  return -1.0 + 2.0 * static_cast<double>(bin) / static_cast<double>(kHistogramBins);
}

SpreadStats similarity_spread_stats(const Matrix& m) {
  if (m.rows() != m.cols()) throw InvalidInput("spread statistics need a square matrix");
  if (m.rows() < 2) throw InvalidInput("spread statistics need at least a 2x2 matrix");
  SpreadStats s;
  s.histogram.assign(kHistogramBins, 0);
  s.min = m(0, 1);
  s.max = m(0, 1);
  double total = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (i == j) continue;
      const double v = m(i, j);
      total += v;
      s.min = std::min(s.min, v);
      s.max = std::max(s.max, v);
      const double pos = (std::clamp(v, -1.0, 1.0) + 1.0) / 2.0 * static_cast<double>(kHistogramBins);
      const auto bin = std::min(static_cast<std::size_t>(pos), kHistogramBins - 1);
      ++s.histogram[bin];
      ++s.count;
    }
  }
  s.mean = total / static_cast<double>(s.count);
  double var = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (i != j) var += (m(i, j) - s.mean) * (m(i, j) - s.mean);
  s.std = std::sqrt(var / static_cast<double>(s.count));
  return s;
}

std::string histogram_csv(const SpreadStats& stats) {
  std::ostringstream out;
  out.precision(17);
  out << "bin_left,bin_right,count\n";
  for (std::size_t b = 0; b < stats.histogram.size(); ++b)
    out << histogram_bin_left(b) << ',' << histogram_bin_left(b + 1) << ',' << stats.histogram[b] << '\n';
  return out.str();
}

void write_histogram_csv(const SpreadStats& stats, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << histogram_csv(stats);
}

}  // namespace gtp
