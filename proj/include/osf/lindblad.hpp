#pragma once

// Open-system engine on column-stacked density matrices: dissipators,
// Lindblad generators, channels and their Kraus form, steady states,
// adiabatic elimination, kicked and effective (reduced) evolution.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "osf/kappa.hpp"
#include "osf/linalg.hpp"

namespace osf {

/// Tolerances shared by every evolution routine.
struct Tolerances {
  double state_trace = 1e-12;  // constructing a DensityMatrix
  double trace = 1e-10;        // drift allowed during evolution
  double hermiticity = 1e-12;
  double positivity = 1e-10;  // eigenvalues in (-positivity, 0) get clamped
};

inline constexpr Tolerances default_tolerances{};

struct StateReport {
  double trace_error = 0.0;
  double hermiticity_error = 0.0;
  double min_eigenvalue = 0.0;

  bool ok(const Tolerances& tol = default_tolerances) const {
    return trace_error <= tol.state_trace && hermiticity_error <= tol.hermiticity && min_eigenvalue >= -tol.positivity;
  }
};

inline StateReport inspect_state(const Matrix& rho) {
  StateReport r;
  r.trace_error = std::abs(rho.trace() - Complex(1.0, 0.0));
  r.hermiticity_error = hermiticity_error(rho);
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(rho), Eigen::EigenvaluesOnly);
  r.min_eigenvalue = es.eigenvalues().minCoeff();
  return r;
}

/// Square, Hermitian, unit-trace, positive semidefinite matrix.
class DensityMatrix {
 public:
  DensityMatrix() = default;

  explicit DensityMatrix(Matrix rho, const Tolerances& tol = default_tolerances) : rho_(std::move(rho)) {
    if (rho_.rows() != rho_.cols() || rho_.rows() == 0) throw ShapeError("density matrix must be square, non-empty");
    const auto r = inspect_state(rho_);
    if (!r.ok(tol)) {
      throw InvariantError("not a density matrix: trace error " + std::to_string(r.trace_error) +
                           ", hermiticity error " + std::to_string(r.hermiticity_error) + ", min eigenvalue " +
                           std::to_string(r.min_eigenvalue));
    }
  }

  static DensityMatrix pure(const Vector& psi) {
    const double n = psi.norm();
    if (n == 0.0) throw DomainError("zero state vector");
    const Vector u = psi / n;
    return DensityMatrix(u * u.adjoint());
  }

  static DensityMatrix basis_state(Eigen::Index dim, Eigen::Index i) { return DensityMatrix(matrix_unit(dim, i, i)); }

  static DensityMatrix maximally_mixed(Eigen::Index dim) {
    return DensityMatrix(Matrix::Identity(dim, dim) / static_cast<double>(dim));
  }

  const Matrix& matrix() const noexcept { return rho_; }
  Eigen::Index dim() const noexcept { return rho_.rows(); }
  Complex operator()(Eigen::Index i, Eigen::Index j) const { return rho_(i, j); }
  RealVector populations() const { return rho_.diagonal().real(); }

 private:
  Matrix rho_;
};

/// Clamps eigenvalues in (-tol, 0) to zero and renormalizes the trace.
/// Returns the number of clamped eigenvalues; throws below -tol.
inline int clamp_positivity(Matrix& rho, double tol = default_tolerances.positivity) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(rho));
  RealVector ev = es.eigenvalues();
  if (ev.minCoeff() < -tol) {
    throw InvariantError("negative eigenvalue " + std::to_string(ev.minCoeff()) + " beyond tolerance");
  }
  int clamped = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < 0.0) {
      ev(i) = 0.0;
      ++clamped;
    }
  }
  if (clamped == 0) return 0;
  rho = es.eigenvectors() * ev.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
  rho /= rho.trace().real();
  return clamped;
}

/// D_R[rho] = R rho R^+ - 1/2 {R^+ R, rho}
inline Matrix dissipator(const Matrix& R, const Matrix& rho) {
  if (R.rows() != R.cols() || R.rows() != rho.rows() || rho.rows() != rho.cols()) {
    throw ShapeError("dissipator: operator and state shapes differ");
  }
  const Matrix RdR = R.adjoint() * R;
  return R * rho * R.adjoint() - 0.5 * (RdR * rho + rho * RdR);
}

enum class SuperoperatorKind { generator, channel };

/// Linear map on column-stacked D x D matrices.
struct Superoperator {
  Matrix matrix;
  Eigen::Index dim = 0;
  SuperoperatorKind kind = SuperoperatorKind::generator;

  Matrix apply(const Matrix& rho) const {
    if (rho.rows() != dim || rho.cols() != dim) throw ShapeError("superoperator applied to wrong shape");
    return unvec(matrix * vec(rho), dim);
  }

  /// Max |(vec I)^+ S - target|, target 0 for generators and vec(I)^+ for channels.
  double trace_preservation_error() const {
    const Vector id = vec(Matrix::Identity(dim, dim));
    Vector row = (id.adjoint() * matrix).transpose();
    if (kind == SuperoperatorKind::channel) row -= id;
    return row.cwiseAbs().maxCoeff();
  }
};

struct Damper {
  double rate = 1.0;
  Matrix op;
};

/// -i[H, .] + sum_k rate_k D_{R_k}, vectorized.
inline Superoperator generator(const std::optional<Matrix>& hamiltonian, const std::vector<Damper>& dampers,
                               std::optional<Eigen::Index> dim_hint = std::nullopt) {
  Eigen::Index dim = dim_hint.value_or(0);
  if (hamiltonian) dim = hamiltonian->rows();
  else if (!dampers.empty()) dim = dampers.front().op.rows();
  if (dim == 0) throw ShapeError("generator: cannot infer dimension");
  const Matrix id = Matrix::Identity(dim, dim);
  Matrix L = Matrix::Zero(dim * dim, dim * dim);
  if (hamiltonian) {
    const Matrix& H = *hamiltonian;
    if (H.rows() != dim || H.cols() != dim) throw ShapeError("generator: Hamiltonian shape");
    if (hermiticity_error(H) > 1e-12) throw DomainError("generator: Hamiltonian is not Hermitian");
    L += Complex(0.0, -1.0) * (kron(id, H) - kron(H.transpose(), id));
  }
  for (const auto& d : dampers) {
    if (d.op.rows() != dim || d.op.cols() != dim) throw ShapeError("generator: damper shape");
    if (d.rate < 0.0) throw DomainError("generator: negative damping rate");
    if (d.rate == 0.0) continue;
    const Matrix RdR = d.op.adjoint() * d.op;
    L += d.rate * (kron(d.op.conjugate(), d.op) - 0.5 * kron(id, RdR) - 0.5 * kron(RdR.transpose(), id));
  }
  return Superoperator{std::move(L), dim, SuperoperatorKind::generator};
}

/// Validates an evolved state, clamps roundoff negativity, restores exact
/// Hermiticity. Returns the clamp count.
inline int settle_state(Matrix& rho, const Tolerances& tol = default_tolerances) {
  const auto r = inspect_state(rho);
  if (r.trace_error > tol.trace) {
    throw InvariantError("trace drifted by " + std::to_string(r.trace_error));
  }
  if (r.hermiticity_error > tol.hermiticity) {
    throw InvariantError("hermiticity lost: " + std::to_string(r.hermiticity_error));
  }
  rho = hermitian_part(rho);
  rho /= rho.trace().real();
  return clamp_positivity(rho, tol.positivity);
}

/// exp(t L) rho0.
inline DensityMatrix evolve_continuous(const Superoperator& L, const DensityMatrix& rho0, double t) {
  if (L.kind != SuperoperatorKind::generator) throw DomainError("evolve_continuous needs a generator");
  if (L.dim != rho0.dim()) throw ShapeError("evolve_continuous: dimension mismatch");
  if (t == 0.0) return rho0;
  Matrix rho = unvec(expm(t * L.matrix) * vec(rho0.matrix()), L.dim);
  settle_state(rho);
  return DensityMatrix(std::move(rho));
}

/// exp(t L) as a channel.
inline Superoperator propagator(const Superoperator& L, double t) {
  if (L.kind != SuperoperatorKind::generator) throw DomainError("propagator needs a generator");
  return Superoperator{expm(t * L.matrix), L.dim, SuperoperatorKind::channel};
}

/// lim_{t->inf} exp(t L), taken at t = 50/|Re lambda| of the slowest decaying
/// mode and accepted only if ||U(2t) - U(t)|| <= 1e-10.
inline Superoperator limit_channel(const Superoperator& L, double zero_tol = 1e-9) {
  if (L.kind != SuperoperatorKind::generator) throw DomainError("limit_channel needs a generator");
  const Eigen::Index n = L.matrix.rows();
  Eigen::ComplexEigenSolver<Matrix> es(L.matrix, false);
  double slowest = std::numeric_limits<double>::infinity();
  bool undamped_oscillation = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Complex lam = es.eigenvalues()(i);
    if (std::abs(lam) <= zero_tol) continue;
    if (std::abs(lam.real()) <= zero_tol) {
      undamped_oscillation = true;
      continue;
    }
    slowest = std::min(slowest, std::abs(lam.real()));
  }
  if (undamped_oscillation) throw NumericalError("limit_channel: generator has undamped oscillating modes");
  if (!std::isfinite(slowest)) return Superoperator{Matrix::Identity(n, n), L.dim, SuperoperatorKind::channel};
  const double t = 50.0 / slowest;
  Matrix U = expm(t * L.matrix);
  const Matrix U2 = U * U;
  const double change = (U2 - U).cwiseAbs().maxCoeff();
  if (change > 1e-10) {
    throw NumericalError("limit_channel: not converged, ||U(2t)-U(t)|| = " + std::to_string(change));
  }
  return Superoperator{std::move(U), L.dim, SuperoperatorKind::channel};
}

struct SteadyStates {
  /// Density-matrix basis of the steady-state manifold.
  std::vector<DensityMatrix> basis;
  /// Image of the maximally mixed state under the projector onto the kernel.
  DensityMatrix representative;
  Eigen::Index kernel_dim = 0;
};

/// Kernel of L intersected with the density matrices.
inline SteadyStates steady_states(const Superoperator& L, double rel_tol = 1e-9) {
  if (L.kind != SuperoperatorKind::generator) throw DomainError("steady_states needs a generator");
  const Eigen::Index n = L.matrix.rows();
  const Eigen::Index d = L.dim;
  Eigen::JacobiSVD<Matrix> right(L.matrix, Eigen::ComputeFullV);
  Eigen::JacobiSVD<Matrix> left(L.matrix.adjoint().eval(), Eigen::ComputeFullV);
  const double scale = std::max(1.0, right.singularValues().size() ? right.singularValues()(0) : 0.0);
  const double cut = rel_tol * scale;
  auto null_space = [&](const Eigen::JacobiSVD<Matrix>& svd) {
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (svd.singularValues()(i) <= cut) ++k;
    return Matrix(svd.matrixV().rightCols(k));
  };
  const Matrix R = null_space(right);
  const Matrix Lf = null_space(left);
  if (R.cols() == 0) throw NumericalError("steady_states: kernel is numerically empty");
  if (Lf.cols() != R.cols()) throw NumericalError("steady_states: left and right kernels differ in dimension");
  const Matrix overlap = Lf.adjoint() * R;
  const Matrix P = R * overlap.fullPivLu().solve(Lf.adjoint());

  auto project = [&](const Matrix& rho) {
    Matrix out = unvec(P * vec(rho), d);
    out = hermitian_part(out);
    out /= out.trace().real();
    clamp_positivity(out, 1e-8);
    return out;
  };

  SteadyStates result{{}, DensityMatrix(project(Matrix::Identity(d, d) / static_cast<double>(d))), R.cols()};
  // Probe states whose images span the kernel.
  std::vector<Matrix> probes;
  for (Eigen::Index i = 0; i < d; ++i) probes.push_back(matrix_unit(d, i, i));
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j) {
      for (Complex phase : {Complex(1, 0), Complex(0, 1)}) {
        Vector psi = Vector::Zero(d);
        psi(i) = 1.0 / std::sqrt(2.0);
        psi(j) = phase / std::sqrt(2.0);
        probes.push_back(psi * psi.adjoint());
      }
    }
  }
  Matrix span(n, 0);
  for (const auto& probe : probes) {
    if (static_cast<Eigen::Index>(result.basis.size()) == result.kernel_dim) break;
    const Vector tr = vec(probe);
    if ((P * tr).norm() < 1e-12) continue;
    Matrix img = project(probe);
    Vector v = vec(img);
    Vector resid = v;
    if (span.cols() > 0) resid -= span * (span.adjoint() * v);
    if (resid.norm() < 1e-8 * v.norm()) continue;
    span.conservativeResize(n, span.cols() + 1);
    span.col(span.cols() - 1) = resid / resid.norm();
    result.basis.emplace_back(std::move(img));
  }
  return result;
}

/// Kraus operators {M_mu} with sum M^+ M = I.
struct KrausSet {
  std::vector<Matrix> ops;

  Eigen::Index dim() const { return ops.empty() ? 0 : ops.front().cols(); }

  double completeness_error() const {
    const Eigen::Index d = dim();
    Matrix acc = Matrix::Zero(d, d);
    for (const auto& m : ops) acc += m.adjoint() * m;
    return (acc - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
  }

  Matrix apply(const Matrix& rho) const {
    Matrix out = Matrix::Zero(ops.front().rows(), ops.front().rows());
    for (const auto& m : ops) out += m * rho * m.adjoint();
    return out;
  }

  Superoperator to_superoperator() const {
    const Eigen::Index d = dim();
    Matrix S = Matrix::Zero(d * d, d * d);
    for (const auto& m : ops) S += kron(m.conjugate(), m);
    return Superoperator{std::move(S), d, SuperoperatorKind::channel};
  }
};

/// Choi matrix sum_ij |i><j| (x) U(|i><j|); row index = i*D + a.
inline Matrix choi_matrix(const Superoperator& channel) {
  const Eigen::Index d = channel.dim;
  Matrix choi = Matrix::Zero(d * d, d * d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const Matrix img = unvec(channel.matrix.col(i + j * d), d);
      choi.block(i * d, j * d, d, d) = img;
    }
  }
  return choi;
}

/// Kraus decomposition from the eigen-decomposition of the Choi matrix.
inline KrausSet kraus_from_map(const Superoperator& channel, double drop_below = 1e-12, double cp_tol = 1e-8,
                               double tp_tol = 1e-10) {
  if (channel.kind != SuperoperatorKind::channel) throw DomainError("kraus_from_map needs a channel");
  const Eigen::Index d = channel.dim;
  const Matrix choi = choi_matrix(channel);
  if (hermiticity_error(choi) > 1e-9) throw DomainError("kraus_from_map: map is not Hermiticity preserving");
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(choi));
  KrausSet k;
  for (Eigen::Index e = es.eigenvalues().size() - 1; e >= 0; --e) {
    const double lam = es.eigenvalues()(e);
    if (lam < -cp_tol) throw DomainError("kraus_from_map: map is not completely positive (Choi eigenvalue " +
                                         std::to_string(lam) + ")");
    if (lam <= drop_below) continue;
    Matrix M(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index a = 0; a < d; ++a) M(a, i) = std::sqrt(lam) * es.eigenvectors()(i * d + a, e);
    k.ops.push_back(std::move(M));
  }
  if (k.ops.empty()) throw DomainError("kraus_from_map: zero map");
  if (k.completeness_error() > tp_tol) {
    throw DomainError("kraus_from_map: map is not trace preserving (completeness error " +
                      std::to_string(k.completeness_error()) + ")");
  }
  return k;
}

/// sum_{n,m} kappa(n,m) D_{|n><m|}
inline Superoperator kappa_generator(const KappaMatrix& kappa) {
  const Eigen::Index d = kappa.dim();
  std::vector<Damper> dampers;
  for (Eigen::Index n = 0; n < d; ++n)
    for (Eigen::Index m = 0; m < d; ++m)
      if (kappa.values(n, m) > 0.0) dampers.push_back({kappa.values(n, m), matrix_unit(d, n, m)});
  return generator(std::nullopt, dampers, d);
}

struct EliminationResult {
  KappaMatrix kappa;
  Superoperator effective;  // sum kappa(n,m) D_{|n><m|} on the retained subspace
};

/// First-order reduction onto the subspace `retained` (indices of the full
/// basis) given the Kraus form of the fast limit channel. With
/// `perturbation` empty, kappa(n,m) = sum_mu |M_mu(n,m)|^2. Jump operators
/// J_k (with rates) of a slow dissipative perturbation are composed with the
/// Kraus map: kappa(n,m) = sum_k rate_k sum_mu |(M_mu J_k)(n,m)|^2.
inline EliminationResult adiabatic_eliminate(const KrausSet& fast, const std::vector<Eigen::Index>& retained,
                                             const std::vector<Damper>& perturbation = {}, double tol = 1e-9) {
  const Eigen::Index d = fast.dim();
  const Eigen::Index r = static_cast<Eigen::Index>(retained.size());
  if (r == 0) throw DomainError("adiabatic_eliminate: empty retained subspace");
  std::vector<bool> inside(static_cast<std::size_t>(d), false);
  for (auto idx : retained) {
    if (idx < 0 || idx >= d) throw ShapeError("adiabatic_eliminate: retained index out of range");
    inside[static_cast<std::size_t>(idx)] = true;
  }
  // The fast channel must keep the retained subspace invariant.
  for (auto m : retained) {
    double leak = 0.0;
    for (const auto& M : fast.ops)
      for (Eigen::Index n = 0; n < d; ++n)
        if (!inside[static_cast<std::size_t>(n)]) leak += std::norm(M(n, m));
    if (leak > tol) {
      throw DomainError("adiabatic_eliminate: retained subspace is not invariant (leak " + std::to_string(leak) +
                        " from index " + std::to_string(m) + ")");
    }
  }
  std::vector<Damper> jumps = perturbation;
  if (jumps.empty()) jumps.push_back({1.0, Matrix::Identity(d, d)});
  KappaMatrix kappa{RealMatrix::Zero(r, r), KappaNormalization::none};
  for (const auto& J : jumps) {
    if (J.op.rows() != d || J.op.cols() != d) throw ShapeError("adiabatic_eliminate: perturbation shape");
    for (const auto& M : fast.ops) {
      const Matrix MJ = M * J.op;
      for (Eigen::Index a = 0; a < r; ++a)
        for (Eigen::Index b = 0; b < r; ++b) kappa.values(a, b) += J.rate * std::norm(MJ(retained[a], retained[b]));
    }
  }
  // Without a perturbation the columns are outcome distributions.
  if (perturbation.empty()) {
    const RealVector sums = kappa.values.colwise().sum().transpose();
    if ((sums.array() - 1.0).abs().maxCoeff() <= 1e-9) kappa.normalization = KappaNormalization::over_n;
  }
  Superoperator eff = kappa_generator(kappa);
  return {std::move(kappa), std::move(eff)};
}

/// Time-indexed states plus per-step clamp counts.
struct Trajectory {
  std::vector<double> times;
  std::vector<Matrix> states;
  std::vector<int> clamps;

  std::size_t size() const noexcept { return states.size(); }

  void push(double t, Matrix rho, int clamped = 0) {
    if (!times.empty() && !(t > times.back())) throw DomainError("trajectory times must increase");
    times.push_back(t);
    states.push_back(std::move(rho));
    clamps.push_back(clamped);
  }

  int total_clamps() const {
    int s = 0;
    for (int c : clamps) s += c;
    return s;
  }
};

struct EvolutionConfig {
  double g = 1.0;  // epsilon * (t_{k+1} - t_k)
  int steps = 100;
  std::optional<double> epsilon;
  std::vector<double> kick_times;

  void check() const {
    if (!(g > 0.0)) throw DomainError("evolution: g must be positive");
    if (steps < 0) throw DomainError("evolution: negative step count");
    for (std::size_t i = 1; i < kick_times.size(); ++i) {
      if (!(kick_times[i] > kick_times[i - 1])) throw DomainError("evolution: kick schedule must increase");
    }
  }
};

/// rho_{k+1} = exp(g sum kappa(n,m) D_{|n><m|}) rho_k, k = 0..steps-1.
inline Trajectory evolve_effective(const KappaMatrix& kappa, const EvolutionConfig& cfg, const DensityMatrix& rho0) {
  cfg.check();
  kappa.check();
  if (kappa.dim() != rho0.dim()) throw ShapeError("evolve_effective: kappa and state dimensions differ");
  const Superoperator step = propagator(kappa_generator(kappa), cfg.g);
  Trajectory traj;
  traj.push(0.0, rho0.matrix());
  Matrix rho = rho0.matrix();
  for (int k = 1; k <= cfg.steps; ++k) {
    rho = step.apply(rho);
    const int c = settle_state(rho);
    traj.push(cfg.g * k, rho, c);
  }
  return traj;
}

/// Coherent part between kicks: a Hamiltonian Omega (unitary W = exp(-i dt Omega))
/// or a fixed channel applied once per interval.
struct CoherentPart {
  std::optional<Matrix> hamiltonian;
  std::optional<Superoperator> channel;
};

enum class KickOrder { coherent_then_kick, kick_then_coherent };

/// Time-ordered product of coherent evolution and instantaneous kicks
/// exp(sum_n D_{R_n}) at the scheduled times. Records the initial state, the
/// state after every kick and, if `t_final` is later, the final state.
inline Trajectory evolve_kicked(const CoherentPart& coherent, const std::vector<Damper>& dampers,
                                const std::vector<double>& kick_times, const DensityMatrix& rho0,
                                std::optional<double> t_final = std::nullopt,
                                KickOrder order = KickOrder::coherent_then_kick) {
  const Eigen::Index d = rho0.dim();
  for (std::size_t i = 1; i < kick_times.size(); ++i) {
    if (!(kick_times[i] > kick_times[i - 1])) throw DomainError("evolve_kicked: schedule must be strictly increasing");
  }
  if (!kick_times.empty() && kick_times.front() <= 0.0) throw DomainError("evolve_kicked: kicks must follow t = 0");
  if (coherent.hamiltonian && coherent.channel) throw DomainError("evolve_kicked: give a Hamiltonian or a channel");
  if (coherent.channel) {
    if (coherent.channel->kind != SuperoperatorKind::channel || coherent.channel->dim != d) {
      throw ShapeError("evolve_kicked: coherent channel shape");
    }
    if (coherent.channel->trace_preservation_error() > 1e-10) {
      throw DomainError("evolve_kicked: coherent channel is not trace preserving");
    }
  }
  const Superoperator kick = propagator(generator(std::nullopt, dampers, d), 1.0);
  std::optional<Superoperator> hamiltonian_gen;
  if (coherent.hamiltonian) hamiltonian_gen = generator(*coherent.hamiltonian, {});

  auto coherent_step = [&](const Matrix& rho, double dt) -> Matrix {
    if (coherent.channel) return coherent.channel->apply(rho);
    if (hamiltonian_gen && dt > 0.0) {
      const Matrix W = expm(Complex(0.0, -dt) * *coherent.hamiltonian);
      return W * rho * W.adjoint();
    }
    return rho;
  };

  Trajectory traj;
  traj.push(0.0, rho0.matrix());
  Matrix rho = rho0.matrix();
  double t = 0.0;
  for (double tk : kick_times) {
    if (order == KickOrder::coherent_then_kick) {
      rho = kick.apply(coherent_step(rho, tk - t));
    } else {
      rho = coherent_step(kick.apply(rho), tk - t);
    }
    t = tk;
    const int c = settle_state(rho);
    traj.push(t, rho, c);
  }
  if (t_final && *t_final > t) {
    rho = coherent_step(rho, *t_final - t);
    const int c = settle_state(rho);
    traj.push(*t_final, rho, c);
  }
  return traj;
}

/// Relaxer onto span{|h_k>}: sum_k rate_k sum_{v outside} D_{|h_k><v|}.
/// Its limit channel maps every state into the retained subspace.
inline Superoperator subspace_relaxer(Eigen::Index dim, const std::vector<Eigen::Index>& retained,
                                      const std::vector<double>& rates) {
  if (retained.size() != rates.size()) throw ShapeError("subspace_relaxer: one rate per retained state");
  std::vector<bool> inside(static_cast<std::size_t>(dim), false);
  for (auto k : retained) {
    if (k < 0 || k >= dim) throw ShapeError("subspace_relaxer: index out of range");
    inside[static_cast<std::size_t>(k)] = true;
  }
  std::vector<Damper> dampers;
  for (std::size_t i = 0; i < retained.size(); ++i) {
    if (rates[i] < 0.0) throw DomainError("subspace_relaxer: negative rate");
    for (Eigen::Index v = 0; v < dim; ++v) {
      if (!inside[static_cast<std::size_t>(v)]) dampers.push_back({rates[i], matrix_unit(dim, retained[i], v)});
    }
  }
  // Empty complement: zero generator, identity limit channel.
  return generator(std::nullopt, dampers, dim);
}

}  // namespace osf
