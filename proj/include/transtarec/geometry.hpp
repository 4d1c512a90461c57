// Hyperplane projection primitives. Free functions over Eigen expressions so
// table rows, blocks and temporaries all work without copies.
#pragma once

#include "transtarec/types.hpp"

#include <cmath>

namespace transtarec {

inline constexpr Scalar kUnitNormTolerance = 1e-6;

// v - (w.v) w without the unit-norm check; w must already be unit.
template <typename DerivedV, typename DerivedW>
Vec project_unchecked(const Eigen::MatrixBase<DerivedV>& v,
                      const Eigen::MatrixBase<DerivedW>& w) {
  return v - (w.dot(v)) * w;
}

// Projection of v onto the hyperplane with unit normal w. Throws
// NonUnitNormal when |w| deviates from 1 by more than kUnitNormTolerance.
template <typename DerivedV, typename DerivedW>
Vec project_to_hyperplane(const Eigen::MatrixBase<DerivedV>& v,
                          const Eigen::MatrixBase<DerivedW>& w) {
  const Scalar norm = w.norm();
  if (std::abs(norm - Scalar{1}) > kUnitNormTolerance) {
    throw NonUnitNormalError("hyperplane normal has norm " + std::to_string(norm));
  }
  return project_unchecked(v, w);
}

}  // namespace transtarec
