#pragma once

// Geometric and thermodynamic observables on reduced trajectories.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "osf/kappa.hpp"
#include "osf/lindblad.hpp"
#include "osf/spin.hpp"

namespace osf {

/// Area of a link carrying spin j, Planck units.
inline double area(Spin j, double gamma_immirzi = 1.0) {
  return 8.0 * std::numbers::pi * gamma_immirzi * std::sqrt(j.casimir());
}

/// Energies of the reduced basis states, E_i = scale * sum_faces sqrt(j(j+1)).
class EnergySpectrum {
 public:
  EnergySpectrum() = default;

  EnergySpectrum(std::vector<double> energies, double scale = 1.0) : energies_(std::move(energies)), scale_(scale) {
    if (!(scale_ > 0.0)) throw DomainError("energy scale must be positive");
    std::vector<double> sorted = energies_;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      if (!(sorted[i] > sorted[i - 1])) throw DomainError("energy spectrum has degenerate levels");
    }
  }

  static EnergySpectrum from_spins(const std::vector<Spin>& spins, double scale = 1.0) {
    std::vector<double> e;
    for (const auto& j : spins) e.push_back(scale * std::sqrt(j.casimir()));
    return EnergySpectrum(std::move(e), scale);
  }

  static EnergySpectrum from_spin_tuples(const std::vector<std::vector<Spin>>& labels, double scale = 1.0) {
    std::vector<double> e;
    for (const auto& t : labels) {
      double s = 0.0;
      for (const auto& j : t) s += std::sqrt(j.casimir());
      e.push_back(scale * s);
    }
    return EnergySpectrum(std::move(e), scale);
  }

  const std::vector<double>& energies() const noexcept { return energies_; }
  double scale() const noexcept { return scale_; }
  std::size_t size() const noexcept { return energies_.size(); }

  /// Basis indices ordered by increasing energy.
  std::vector<std::size_t> order() const {
    std::vector<std::size_t> idx(energies_.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return energies_[a] < energies_[b]; });
    return idx;
  }

 private:
  std::vector<double> energies_;
  double scale_ = 1.0;
};

inline Matrix energy_operator(const EnergySpectrum& spec) {
  const auto n = static_cast<Eigen::Index>(spec.size());
  Matrix E = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) E(i, i) = spec.energies()[static_cast<std::size_t>(i)];
  return E;
}

inline double expectation(const Matrix& rho, const Matrix& op) { return (rho * op).trace().real(); }

struct ObservableSeries {
  std::string name;
  std::vector<int> steps;
  std::vector<double> times;
  std::vector<double> values;

  void push(int step, double t, double v) {
    if (!steps.empty() && step <= steps.back()) throw DomainError("observable steps must increase");
    steps.push_back(step);
    times.push_back(t);
    values.push_back(v);
  }
  std::size_t size() const noexcept { return values.size(); }
};

/// S_k = (<E>_k - <E>_{k+1}) / g
inline ObservableSeries energy_release(const Trajectory& traj, const EnergySpectrum& spec, double g) {
  if (traj.size() < 2) throw DomainError("energy_release needs at least two trajectory points");
  if (!(g > 0.0)) throw DomainError("energy_release: g must be positive");
  const Matrix E = energy_operator(spec);
  ObservableSeries s{"release", {}, {}, {}};
  double prev = expectation(traj.states.front(), E);
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    const double next = expectation(traj.states[k + 1], E);
    s.push(static_cast<int>(k), traj.times[k], (prev - next) / g);
    prev = next;
  }
  return s;
}

struct SpectralTemperature {
  double beta = 0.0;  // 1/(k_B T)
  double temperature() const { return beta == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / beta; }
};

struct SpectralTemperatureOptions {
  double diagonal_tol = 1e-8;
  bool floor_zero_populations = false;
  double floor = 1e-300;
};

/// Spectral temperature of a state diagonal in the energy basis:
///   1/kT = -(1 - (p_1 + p_N)/2)^-1 sum_{i=2}^N (p_i + p_{i-1})/2 ln(p_i/p_{i-1}) / (E_i - E_{i-1})
/// with levels ordered by energy.
inline SpectralTemperature spectral_temperature(const Matrix& rho, const EnergySpectrum& spec,
                                                const SpectralTemperatureOptions& opt = {}) {
  const auto n = static_cast<Eigen::Index>(spec.size());
  if (rho.rows() != n || rho.cols() != n) throw ShapeError("spectral_temperature: state and spectrum sizes differ");
  if (n < 2) throw DomainError("spectral_temperature: needs at least two levels");
  const Matrix off = rho - Matrix(rho.diagonal().asDiagonal());
  if (off.cwiseAbs().maxCoeff() > opt.diagonal_tol) {
    throw DomainError("spectral_temperature: state is not diagonal in the energy basis");
  }
  const auto ord = spec.order();
  std::vector<double> p, e;
  for (auto i : ord) {
    double v = rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
    if (v <= 0.0) {
      if (!opt.floor_zero_populations) {
        throw DomainError("spectral_temperature: undefined, level " + std::to_string(i) + " has zero population");
      }
      v = opt.floor;
    }
    p.push_back(v);
    e.push_back(spec.energies()[i]);
  }
  const std::size_t N = p.size();
  double sum = 0.0;
  for (std::size_t i = 1; i < N; ++i) sum += 0.5 * (p[i] + p[i - 1]) * std::log(p[i] / p[i - 1]) / (e[i] - e[i - 1]);
  const double norm = 1.0 - 0.5 * (p.front() + p.back());
  if (norm == 0.0) throw DomainError("spectral_temperature: undefined normalization");
  return {-sum / norm};
}

/// Least-squares Gibbs fit ln p_i = -beta E_i + c; reports the worst log residual.
struct GibbsFit {
  double beta = 0.0;
  double max_log_residual = 0.0;
};

inline GibbsFit gibbs_fit(const RealVector& populations, const EnergySpectrum& spec) {
  const auto n = populations.size();
  if (n != static_cast<Eigen::Index>(spec.size()) || n < 2) throw ShapeError("gibbs_fit: size mismatch");
  Eigen::MatrixXd A(n, 2);
  RealVector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (populations(i) <= 0.0) throw DomainError("gibbs_fit: zero population");
    A(i, 0) = -spec.energies()[static_cast<std::size_t>(i)];
    A(i, 1) = 1.0;
    y(i) = std::log(populations(i));
  }
  const RealVector x = A.colPivHouseholderQr().solve(y);
  return {x(0), (A * x - y).cwiseAbs().maxCoeff()};
}

struct ThermalFlowCheck {
  double flow_residual = 0.0;        // ||e^{isK} rho e^{-isK} - rho||
  double commutator = 0.0;           // ||[K, rho]||
  Eigen::Index support_rank = 0;
};

/// Thermal Hamiltonian K = -ln(rho) on the support of rho and its flow.
inline ThermalFlowCheck thermal_flow_check(const Matrix& rho, double s, double support_tol = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(rho));
  const Matrix& V = es.eigenvectors();
  const auto n = rho.rows();
  Vector logs = Vector::Zero(n), phases = Vector::Ones(n);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lam = es.eigenvalues()(i);
    if (lam > support_tol) {
      ++rank;
      logs(i) = -std::log(lam);
      phases(i) = std::exp(Complex(0.0, s * logs(i).real()));
    }
  }
  if (rank == 0) throw DomainError("thermal_flow_check: state has empty support");
  const Matrix K = V * logs.asDiagonal() * V.adjoint();
  const Matrix U = V * phases.asDiagonal() * V.adjoint();
  ThermalFlowCheck r;
  r.flow_residual = op_norm(U * rho * U.adjoint() - rho);
  r.commutator = op_norm(K * rho - rho * K);
  r.support_rank = rank;
  return r;
}

/// Thermal-time diagnostics along a trajectory.
struct ThermalDiagnostics {
  std::vector<double> flow_residual;
  std::vector<double> commutator;
  std::vector<double> step_change;  // ||rho_{k+1} - rho_k||, last entry 0
};

inline ThermalDiagnostics thermal_diagnostics(const Trajectory& traj, double s = 1.0) {
  ThermalDiagnostics d;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const auto c = thermal_flow_check(traj.states[k], s);
    d.flow_residual.push_back(c.flow_residual);
    d.commutator.push_back(c.commutator);
    d.step_change.push_back(k + 1 < traj.size() ? op_norm(traj.states[k + 1] - traj.states[k]) : 0.0);
  }
  return d;
}

/// Population cascade along a relaxation trajectory.
struct CascadeReport {
  std::vector<std::size_t> dominant;  // most populated level, one entry per change
  std::vector<double> switch_times;   // when dominant[i + 1] takes over
  int max_occupied = 0;               // most levels above threshold at one step
  double max_energy_rise = 0.0;       // largest step-to-step increase of <E>
  std::vector<double> beta;           // spectral 1/kT, NaN while a level is empty or rho is not diagonal
  bool downhill = true;               // each dominant level lies below the previous one
  bool beta_turns_positive = false;   // 1/kT < 0 seen, then 1/kT > 0

  bool energy_monotone(double tol = 1e-12) const { return max_energy_rise <= tol; }
};

inline CascadeReport cascade_report(const Trajectory& traj, const EnergySpectrum& spec, double threshold = 0.01) {
  if (traj.size() == 0) throw DomainError("cascade_report: empty trajectory");
  const Matrix E = energy_operator(spec);
  CascadeReport r;
  double prev_e = 0.0;
  bool seen_negative = false;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const Matrix& rho = traj.states[k];
    const RealVector p = rho.diagonal().real();
    Eigen::Index top = 0;
    p.maxCoeff(&top);
    const auto dom = static_cast<std::size_t>(top);
    if (r.dominant.empty() || r.dominant.back() != dom) {
      if (!r.dominant.empty()) {
        if (spec.energies()[dom] >= spec.energies()[r.dominant.back()]) r.downhill = false;
        r.switch_times.push_back(traj.times[k]);
      }
      r.dominant.push_back(dom);
    }
    r.max_occupied = std::max(r.max_occupied, static_cast<int>((p.array() > threshold).count()));
    const double e = expectation(rho, E);
    if (k > 0) r.max_energy_rise = std::max(r.max_energy_rise, e - prev_e);
    prev_e = e;
    double b = std::numeric_limits<double>::quiet_NaN();
    const double off = (rho - Matrix(rho.diagonal().asDiagonal())).cwiseAbs().maxCoeff();
    if (p.minCoeff() > 0.0 && off <= SpectralTemperatureOptions{}.diagonal_tol) b = spectral_temperature(rho, spec).beta;
    r.beta.push_back(b);
    if (b < 0.0) seen_negative = true;
    if (seen_negative && b > 0.0) r.beta_turns_positive = true;
  }
  return r;
}

/// Mean dwell time 1 / sum_{n != m} kappa(n, m) of each listed level m.
inline std::vector<double> lifetimes(const KappaMatrix& kappa, const std::vector<std::size_t>& levels) {
  std::vector<double> out;
  for (auto m : levels) {
    const auto c = static_cast<Eigen::Index>(m);
    if (c >= kappa.dim()) throw ShapeError("lifetimes: level out of range");
    const double rate = kappa.values.col(c).sum() - kappa.values(c, c);
    out.push_back(rate > 0.0 ? 1.0 / rate : std::numeric_limits<double>::infinity());
  }
  return out;
}

}  // namespace osf
