#pragma once

// Bad-cavity superradiance: N qubits coupled to one damped cavity mode.
// Ladder states |J = N/2, M> are indexed by M + J, so index 0 is the ground state.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "osf/lindblad.hpp"
#include "osf/observables.hpp"

namespace osf {

struct DickeConfig {
  int N = 2;
  double kappa_over_gamma = 40.0;
  std::vector<double> times;  // in units of 1/Gamma_eff, first entry 0

  /// Gamma_eff / gamma = 4 gamma / kappa
  double gamma_eff() const { return 4.0 / kappa_over_gamma; }

  void check() const {
    if (N < 1) throw DomainError("dicke: N must be at least 1");
    if (!(kappa_over_gamma > 0.0)) throw DomainError("dicke: kappa/gamma must be positive");
    if (times.empty() || times.front() != 0.0) throw DomainError("dicke: time grid must start at 0");
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (!(times[i] > times[i - 1])) throw DomainError("dicke: time grid must be strictly increasing");
    }
  }

  static std::vector<double> uniform_grid(double t_max, int points) {
    if (points < 2 || !(t_max > 0.0)) throw DomainError("dicke: bad grid");
    std::vector<double> t(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) t[static_cast<std::size_t>(i)] = t_max * i / (points - 1);
    return t;
  }
};

/// S_- on the symmetric ladder.
inline Matrix collective_lowering(int N) {
  const double J = 0.5 * N;
  Matrix S = Matrix::Zero(N + 1, N + 1);
  for (int i = 1; i <= N; ++i) {
    const double M = i - J;
    S(i - 1, i) = std::sqrt((J + M) * (J - M + 1.0));
  }
  return S;
}

inline Matrix collective_sz(int N) {
  Matrix S = Matrix::Zero(N + 1, N + 1);
  for (int i = 0; i <= N; ++i) S(i, i) = i - 0.5 * N;
  return S;
}

/// Columns are |J, M> written in the 2^N qubit basis (bit set = excited).
inline Matrix symmetric_isometry(int N) {
  if (N < 1 || N > 20) throw DomainError("symmetric_isometry: N out of range");
  const Eigen::Index full = Eigen::Index{1} << N;
  Matrix V = Matrix::Zero(full, N + 1);
  for (Eigen::Index b = 0; b < full; ++b) V(b, __builtin_popcountll(static_cast<unsigned long long>(b))) = 1.0;
  for (int k = 0; k <= N; ++k) V.col(k).normalize();
  return V;
}

/// Ladder state |J, M> as a density matrix; `twice_M` = 2M.
inline DensityMatrix dicke_state(int N, int twice_M) {
  if ((twice_M + N) % 2 != 0 || std::abs(twice_M) > N) {
    throw DomainError("dicke_state: 2M = " + std::to_string(twice_M) + " is not on the N = " + std::to_string(N) +
                      " ladder");
  }
  return DensityMatrix::basis_state(N + 1, (twice_M + N) / 2);
}

/// Restricts a qubit-register state to the ladder; throws if it has weight outside.
inline DensityMatrix ladder_state(int N, const Matrix& rho_qubits, double tol = 1e-10) {
  const Matrix V = symmetric_isometry(N);
  if (rho_qubits.rows() != V.rows() || rho_qubits.cols() != V.rows()) throw ShapeError("ladder_state: not an N-qubit state");
  const Matrix r = V.adjoint() * rho_qubits * V;
  const double leak = std::abs(rho_qubits.trace() - r.trace());
  if (leak > tol) throw DomainError("initial state lies outside the symmetric ladder (weight " + std::to_string(leak) + ")");
  return DensityMatrix(r);
}

struct DickeRun {
  Trajectory trajectory;
  ObservableSeries sz;
};

/// d rho / d tau = D_{S_-}[rho], tau = Gamma_eff t.
inline DickeRun dicke_cascade(const DickeConfig& cfg, const DensityMatrix& rho0) {
  cfg.check();
  if (rho0.dim() != cfg.N + 1) throw ShapeError("dicke_cascade: initial state is not on the ladder");
  const Superoperator L = generator(std::nullopt, {{1.0, collective_lowering(cfg.N)}}, cfg.N + 1);
  const Matrix Sz = collective_sz(cfg.N);
  DickeRun run{{}, {"sz", {}, {}, {}}};
  Matrix rho = rho0.matrix();
  for (std::size_t k = 0; k < cfg.times.size(); ++k) {
    if (k > 0) {
      rho = propagator(L, cfg.times[k] - cfg.times[k - 1]).apply(rho);
      settle_state(rho);
    }
    run.trajectory.push(cfg.times[k], rho);
    run.sz.push(static_cast<int>(k), cfg.times[k], expectation(rho, Sz));
  }
  return run;
}

inline DickeRun dicke_cascade(const DickeConfig& cfg, int twice_M) { return dicke_cascade(cfg, dicke_state(cfg.N, twice_M)); }

/// Ladder (x) cavity truncated at `photons` levels, H = gamma (a^dag S_- + a S_+),
/// cavity loss kappa D_a, starting from the vacuum. The trajectory holds the
/// reduced ladder state.
inline DickeRun tavis_cummings_cascade(const DickeConfig& cfg, const DensityMatrix& rho0, int photons = 3) {
  cfg.check();
  if (photons < 2) throw DomainError("tavis_cummings: need at least two photon levels");
  if (rho0.dim() != cfg.N + 1) throw ShapeError("tavis_cummings: initial state is not on the ladder");
  const Eigen::Index q = cfg.N + 1, c = photons;
  Matrix a = Matrix::Zero(c, c);
  for (Eigen::Index n = 1; n < c; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  const Matrix Iq = Matrix::Identity(q, q), Ic = Matrix::Identity(c, c);
  const Matrix Sm = kron(Ic, collective_lowering(cfg.N));
  const Matrix A = kron(a, Iq);
  const Matrix H = A.adjoint() * Sm + A * Sm.adjoint();  // gamma = 1
  const Superoperator L = generator(H, {{cfg.kappa_over_gamma, A}});
  const Matrix Sz = collective_sz(cfg.N);
  const double to_t = 1.0 / cfg.gamma_eff();

  Matrix rho = kron(matrix_unit(c, 0, 0), rho0.matrix());
  auto reduce = [&](const Matrix& full) {
    Matrix r = Matrix::Zero(q, q);
    for (Eigen::Index n = 0; n < c; ++n) r += full.block(n * q, n * q, q, q);
    return r;
  };
  DickeRun run{{}, {"sz", {}, {}, {}}};
  for (std::size_t k = 0; k < cfg.times.size(); ++k) {
    if (k > 0) {
      rho = propagator(L, (cfg.times[k] - cfg.times[k - 1]) * to_t).apply(rho);
      settle_state(rho);
    }
    const Matrix r = reduce(rho);
    run.trajectory.push(cfg.times[k], r);
    run.sz.push(static_cast<int>(k), cfg.times[k], expectation(r, Sz));
  }
  return run;
}

/// Energy handed to the field, -d<S_z>/dtau by forward differences.
inline ObservableSeries dicke_release(const ObservableSeries& sz) {
  if (sz.size() < 2) throw DomainError("dicke_release: need at least two points");
  ObservableSeries s{"release", {}, {}, {}};
  for (std::size_t k = 0; k + 1 < sz.size(); ++k) {
    s.push(sz.steps[k], sz.times[k], (sz.values[k] - sz.values[k + 1]) / (sz.times[k + 1] - sz.times[k]));
  }
  return s;
}

inline double sup_distance(const ObservableSeries& a, const ObservableSeries& b) {
  if (a.size() != b.size()) throw ShapeError("sup_distance: series lengths differ");
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a.values[k] - b.values[k]));
  return d;
}

namespace detail {

inline double trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) s += 0.5 * (y[i] + y[i - 1]) * (t[i] - t[i - 1]);
  return s;
}

inline double interpolate(const std::vector<double>& t, const std::vector<double>& y, double x) {
  auto it = std::upper_bound(t.begin(), t.end(), x);
  if (it == t.begin()) return y.front();
  if (it == t.end()) return y.back();
  const auto i = static_cast<std::size_t>(it - t.begin());
  const double w = (x - t[i - 1]) / (t[i] - t[i - 1]);
  return (1.0 - w) * y[i - 1] + w * y[i];
}

}  // namespace detail

/// L2 distance of the two curves after dividing each by its time integral,
/// on `points` uniform samples of the common time window. Values below zero by
/// no more than 1e-12 of the curve's peak are read as 0.
inline double compare_curves(const ObservableSeries& a_in, const ObservableSeries& b_in, int points = 200) {
  ObservableSeries a = a_in, b = b_in;
  for (auto* s : {&a, &b}) {
    if (s->size() < 2 || s->times.size() != s->values.size()) throw DomainError("compare_curves: series needs two timed points");
    for (std::size_t i = 1; i < s->times.size(); ++i)
      if (!(s->times[i] > s->times[i - 1])) throw DomainError("compare_curves: times must increase");
    double peak = 0.0;
    for (double v : s->values) peak = std::max(peak, std::abs(v));
    for (double& v : s->values) {
      if (v < -1e-12 * peak) throw DomainError("compare_curves: series '" + s->name + "' is negative");
      v = std::max(v, 0.0);
    }
  }
  if (points < 2) throw DomainError("compare_curves: need at least two samples");
  const double ia = detail::trapezoid(a.times, a.values), ib = detail::trapezoid(b.times, b.values);
  if (!(ia > 0.0) || !(ib > 0.0)) throw DomainError("compare_curves: zero integral");
  const double lo = std::max(a.times.front(), b.times.front());
  const double hi = std::min(a.times.back(), b.times.back());
  if (!(hi > lo)) throw DomainError("compare_curves: time windows do not overlap");
  std::vector<double> t(static_cast<std::size_t>(points)), d2(t.size());
  for (int i = 0; i < points; ++i) {
    const double x = lo + (hi - lo) * i / (points - 1);
    const double diff = detail::interpolate(a.times, a.values, x) / ia - detail::interpolate(b.times, b.values, x) / ib;
    t[static_cast<std::size_t>(i)] = x;
    d2[static_cast<std::size_t>(i)] = diff * diff;
  }
  return std::sqrt(detail::trapezoid(t, d2));
}

}  // namespace osf
