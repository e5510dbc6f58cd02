#pragma once

// Two-time-scale benchmark: fast decay |3> -> |1>, |2> (rates a, b) plus a slow
// pump |1> -> |3> of strength epsilon. The retained subspace is span{|1>, |2>}.

#include <algorithm>
#include <vector>

#include "osf/lindblad.hpp"

namespace osf::test {

struct ThreeLevel {
  double a = 1.0;
  double b = 2.5;
  double horizon = 10.0;  // fast-time window
  int samples = 41;

  std::vector<Damper> fast() const { return {{a, matrix_unit(3, 0, 2)}, {b, matrix_unit(3, 1, 2)}}; }
  std::vector<Damper> slow() const { return {{1.0, matrix_unit(3, 2, 0)}}; }

  /// max_t trace distance between U0(rho_full(t)) on the retained block and
  /// the effective trajectory exp(eps t G) rho0.
  double error(double eps) const {
    const auto L0 = generator(std::nullopt, fast(), 3);
    const auto L1 = generator(std::nullopt, slow(), 3);
    const auto U0 = limit_channel(L0);
    const auto reduced = adiabatic_eliminate(kraus_from_map(U0), {0, 1}, slow());
    Superoperator full{L0.matrix + eps * L1.matrix, 3, SuperoperatorKind::generator};
    Matrix rho0 = Matrix::Zero(3, 3);
    rho0(0, 0) = 0.7;
    rho0(1, 1) = 0.3;
    rho0(0, 1) = rho0(1, 0) = 0.2;
    const Matrix rho0_eff = rho0.topLeftCorner(2, 2);
    double worst = 0.0;
    for (int i = 1; i < samples; ++i) {
      const double t = horizon * i / (samples - 1);
      const Matrix full_t = U0.apply(unvec(expm(t * full.matrix) * vec(rho0), 3));
      const Matrix eff_t = unvec(expm(eps * t * reduced.effective.matrix) * vec(rho0_eff), 2);
      worst = std::max(worst, trace_distance(full_t.topLeftCorner(2, 2), eff_t));
    }
    return worst;
  }
};

}  // namespace osf::test
