#pragma once

#include <string>
#include <string_view>

#include "osf/linalg.hpp"

namespace osf {

/// Which index the damping rates are normalized over.
///  over_n: sum_n kappa(n,m) = 1 for every in-state m (outcome distribution).
///  over_m: sum_m kappa(n,m) = 1 for every out-state n.
enum class KappaNormalization { over_n, over_m, none };

inline std::string_view to_string(KappaNormalization c) {
  switch (c) {
    case KappaNormalization::over_n: return "over-n";
    case KappaNormalization::over_m: return "over-m";
    case KappaNormalization::none: return "none";
  }
  return "none";
}

inline KappaNormalization parse_normalization(std::string_view s) {
  if (s == "over-n") return KappaNormalization::over_n;
  if (s == "over-m") return KappaNormalization::over_m;
  if (s == "none") return KappaNormalization::none;
  throw DomainError("unknown kappa normalization '" + std::string(s) + "'");
}

/// Non-negative damping rates kappa(n, m) of the jumps |n><m|.
struct KappaMatrix {
  RealMatrix values;
  KappaNormalization normalization = KappaNormalization::over_n;

  Eigen::Index dim() const noexcept { return values.rows(); }

  void check(double tol = 1e-12) const {
    if (values.rows() != values.cols()) throw ShapeError("kappa matrix must be square");
    if (values.size() == 0) throw ShapeError("kappa matrix is empty");
    if (!values.allFinite()) throw DomainError("kappa matrix has non-finite entries");
    if (values.minCoeff() < 0.0) throw DomainError("kappa matrix has negative entries");
    if (normalization == KappaNormalization::over_n) {
      const RealVector sums = values.colwise().sum().transpose();
      for (Eigen::Index m = 0; m < sums.size(); ++m) {
        if (std::abs(sums(m) - 1.0) > tol) {
          throw DomainError("kappa column " + std::to_string(m) + " does not sum to 1");
        }
      }
    } else if (normalization == KappaNormalization::over_m) {
      const RealVector sums = values.rowwise().sum();
      for (Eigen::Index n = 0; n < sums.size(); ++n) {
        if (std::abs(sums(n) - 1.0) > tol) throw DomainError("kappa row " + std::to_string(n) + " does not sum to 1");
      }
    }
  }
};

}  // namespace osf
