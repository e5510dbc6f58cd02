#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "osf/observables.hpp"

using namespace osf;
using namespace osf::literals;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Matrix diag_state(std::vector<double> p) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(p.size()), static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = p[i];
  return m;
}

}  // namespace

TEST_CASE("area", "[observables]") {
  CHECK(area(0_2j) == 0.0);
  CHECK_THAT(area(1_2j), WithinRel(4.0 * std::numbers::pi * std::sqrt(3.0), 1e-15));
  CHECK_THAT(area(2_2j, 0.2375), WithinRel(8.0 * std::numbers::pi * 0.2375 * std::sqrt(2.0), 1e-15));
  for (int tw = 0; tw < 40; ++tw) CHECK(area(Spin::from_twice(tw + 1)) > area(Spin::from_twice(tw)));
}

TEST_CASE("energy operator", "[observables]") {
  const auto one = energy_operator(EnergySpectrum::from_spins({2_2j}, 1.5));
  CHECK_THAT(one(0, 0).real(), WithinRel(1.5 * std::sqrt(2.0), 1e-15));
  const auto spec = EnergySpectrum::from_spins({1_2j, 2_2j, 3_2j, 4_2j});
  const auto E = energy_operator(spec);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j)
      if (i != j) CHECK(E(i, j) == Complex(0, 0));
  const double mean = (spec.energies()[0] + spec.energies()[1] + spec.energies()[2] + spec.energies()[3]) / 4.0;
  CHECK_THAT(expectation(Matrix::Identity(4, 4) / 4.0, E), WithinAbs(mean, 1e-14));
  CHECK_THROWS_AS(EnergySpectrum::from_spins({1_2j, 1_2j}), DomainError);
  CHECK_THROWS_AS(EnergySpectrum({1.0}, 0.0), DomainError);
  const auto tuples = EnergySpectrum::from_spin_tuples({{1_2j, 2_2j}, {0_2j, 2_2j}});
  CHECK_THAT(tuples.energies()[0], WithinAbs(std::sqrt(0.75) + std::sqrt(2.0), 1e-15));
}

TEST_CASE("energy release", "[observables]") {
  const auto spec = EnergySpectrum::from_spins({1_2j, 2_2j});
  EvolutionConfig cfg;
  cfg.g = 0.5;
  cfg.steps = 120;

  KappaMatrix still{RealMatrix::Identity(2, 2), KappaNormalization::over_n};
  const auto flat = energy_release(evolve_effective(still, cfg, DensityMatrix(diag_state({0.3, 0.7}))), spec, cfg.g);
  CHECK(flat.size() == 120);
  for (double v : flat.values) CHECK(std::abs(v) < 1e-15);

  KappaMatrix down{RealMatrix::Zero(2, 2), KappaNormalization::none};
  down.values(0, 1) = 1.0;
  const auto traj = evolve_effective(down, cfg, DensityMatrix::basis_state(2, 1));
  const auto s = energy_release(traj, spec, cfg.g);
  double total = 0.0;
  for (double v : s.values) {
    CHECK(v >= -1e-14);  // roundoff once fully relaxed
    total += v * cfg.g;
  }
  const double dE = spec.energies()[1] - spec.energies()[0];
  CHECK_THAT(total, WithinAbs(dE, 1e-8));

  KappaMatrix up{RealMatrix::Zero(2, 2), KappaNormalization::none};
  up.values(1, 0) = 0.4;
  for (double v : energy_release(evolve_effective(up, cfg, DensityMatrix::basis_state(2, 0)), spec, cfg.g).values)
    CHECK(v <= 1e-14);

  Trajectory single;
  single.push(0.0, diag_state({1.0, 0.0}));
  CHECK_THROWS_AS(energy_release(single, spec, 1.0), DomainError);
}

TEST_CASE("spectral temperature", "[observables]") {
  const auto spec = EnergySpectrum::from_spins({1_2j, 3_2j});
  const double dE = spec.energies()[1] - spec.energies()[0];
  for (double beta0 : {-2.0, -0.3, 0.1, 0.7, 3.0}) {
    const double z = std::exp(-beta0 * spec.energies()[0]) + std::exp(-beta0 * spec.energies()[1]);
    const auto rho = diag_state({std::exp(-beta0 * spec.energies()[0]) / z, std::exp(-beta0 * spec.energies()[1]) / z});
    CHECK_THAT(spectral_temperature(rho, spec).beta, WithinAbs(beta0, 1e-10));
  }
  CHECK(spectral_temperature(diag_state({0.5, 0.5}), spec).beta == 0.0);
  CHECK(spectral_temperature(diag_state({0.2, 0.8}), spec).beta < 0.0);
  CHECK_THAT(spectral_temperature(diag_state({0.2, 0.8}), spec).beta, WithinAbs(-std::log(4.0) / dE, 1e-12));

  // Basis order does not matter: levels are sorted by energy.
  const auto swapped = EnergySpectrum(std::vector<double>{spec.energies()[1], spec.energies()[0]});
  CHECK_THAT(spectral_temperature(diag_state({0.8, 0.2}), swapped).beta, WithinAbs(-std::log(4.0) / dE, 1e-12));

  CHECK_THROWS_AS(spectral_temperature(diag_state({1.0, 0.0}), spec), DomainError);
  SpectralTemperatureOptions floor;
  floor.floor_zero_populations = true;
  CHECK(spectral_temperature(diag_state({1.0, 0.0}), spec, floor).beta > 0.0);
  CHECK_THROWS_AS(spectral_temperature(diag_state({1.0}), EnergySpectrum({1.0})), DomainError);
  Matrix coh = diag_state({0.5, 0.5});
  coh(0, 1) = coh(1, 0) = 0.1;
  CHECK_THROWS_AS(spectral_temperature(coh, spec), DomainError);
}

TEST_CASE("steady-state temperature matches a Gibbs fit", "[observables]") {
  // Detailed balance makes the steady populations log-linear in E.
  const auto spec = EnergySpectrum({0.0, 1.0, 2.0, 3.0});
  const double beta = 0.8;
  KappaMatrix k{RealMatrix::Zero(4, 4), KappaNormalization::none};
  for (Eigen::Index i = 0; i + 1 < 4; ++i) {
    k.values(i, i + 1) = 1.0;
    k.values(i + 1, i) = std::exp(-beta);
  }
  EvolutionConfig cfg;
  cfg.g = 5.0;
  cfg.steps = 200;
  const auto traj = evolve_effective(k, cfg, DensityMatrix::maximally_mixed(4));
  const RealVector p = traj.states.back().diagonal().real();
  const auto fit = gibbs_fit(p, spec);
  CHECK(fit.max_log_residual < 1e-8);
  CHECK_THAT(fit.beta, WithinAbs(beta, 1e-8));
  CHECK_THAT(spectral_temperature(traj.states.back(), spec).beta, WithinAbs(fit.beta, 1e-6));
}

TEST_CASE("thermal flow", "[observables]") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a(4, 4);
    for (Eigen::Index i = 0; i < 4; ++i)
      for (Eigen::Index j = 0; j < 4; ++j) a(i, j) = Complex(n(rng), n(rng));
    Matrix rho = a * a.adjoint();
    rho /= rho.trace().real();
    const auto c = thermal_flow_check(rho, n(rng) * 5.0);
    CHECK(c.flow_residual <= 1e-10);
    CHECK(c.commutator <= 1e-10);
    CHECK(c.support_rank == 4);
  }
  const auto mixed = thermal_flow_check(Matrix::Identity(3, 3) / 3.0, 2.0);
  CHECK(mixed.flow_residual <= 1e-14);
  const auto pure = thermal_flow_check(diag_state({1.0, 0.0, 0.0}), 1.0);
  CHECK(pure.support_rank == 1);
  CHECK(pure.flow_residual <= 1e-14);
  CHECK_THROWS_AS(thermal_flow_check(Matrix::Zero(2, 2), 1.0), DomainError);

  KappaMatrix down{RealMatrix::Zero(2, 2), KappaNormalization::none};
  down.values(0, 1) = 1.0;
  down.values(1, 0) = 0.2;
  EvolutionConfig cfg;
  cfg.g = 0.1;
  cfg.steps = 30;
  const auto d = thermal_diagnostics(evolve_effective(down, cfg, DensityMatrix(diag_state({0.1, 0.9}))), 3.0);
  for (std::size_t k = 0; k + 1 < d.flow_residual.size(); ++k) {
    CHECK(d.flow_residual[k] <= 1e-10);
    CHECK(d.step_change[k] > 1e-4);
  }
}
