#pragma once

#include <cstddef>
#include <span>

#include "gtp/matrix.hpp"

namespace gtp {

// Fixed-size pooled representation: segments x dim. flatten() is the
// canonical vector form used for every similarity.
struct LatentRep {
  Matrix values;

  LatentRep() = default;
  explicit LatentRep(Matrix m) : values(std::move(m)) {}

  std::size_t segments() const { return values.rows(); }
  std::size_t dim() const { return values.cols(); }
  std::span<const double> flatten() const { return values.values(); }

  bool operator==(const LatentRep& other) const = default;
};

}  // namespace gtp
