#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "osf/lindblad.hpp"
#include "three_level.hpp"

using namespace osf;
using Catch::Matchers::WithinAbs;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = Complex(n(rng), n(rng));
  return m;
}

Matrix random_state(std::mt19937_64& rng, Eigen::Index d) {
  const Matrix a = random_matrix(rng, d);
  Matrix rho = a * a.adjoint();
  return rho / rho.trace().real();
}

Matrix random_hermitian(std::mt19937_64& rng, Eigen::Index d) { return hermitian_part(random_matrix(rng, d)); }

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST_CASE("dissipator on matrix units", "[lindblad]") {
  const Matrix R = matrix_unit(2, 0, 1);
  CHECK(max_abs(dissipator(R, matrix_unit(2, 1, 1)) - (matrix_unit(2, 0, 0) - matrix_unit(2, 1, 1))) == 0.0);
  CHECK(max_abs(dissipator(R, matrix_unit(2, 0, 0))) == 0.0);
  CHECK(max_abs(dissipator(R, matrix_unit(2, 1, 0)) + 0.5 * matrix_unit(2, 1, 0)) == 0.0);
  CHECK_THROWS_AS(dissipator(R, Matrix::Identity(3, 3)), ShapeError);
}

TEST_CASE("generator matches the dissipator entrywise", "[lindblad]") {
  std::mt19937_64 rng(5);
  const Eigen::Index d = 3;
  const Matrix R1 = random_matrix(rng, d), R2 = random_matrix(rng, d);
  const Matrix H = random_hermitian(rng, d);
  const auto L = generator(H, {{0.7, R1}, {1.3, R2}});
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const Matrix e = matrix_unit(d, i, j);
      const Matrix expect =
          Complex(0, -1) * (H * e - e * H) + 0.7 * dissipator(R1, e) + 1.3 * dissipator(R2, e);
      CHECK(max_abs(L.apply(e) - expect) < 1e-13);
    }
  }
  CHECK(L.trace_preservation_error() < 1e-10);
}

TEST_CASE("generator trivial cases", "[lindblad]") {
  const auto Z = generator(Matrix::Zero(2, 2), {});
  CHECK(max_abs(Z.matrix) == 0.0);
  std::mt19937_64 rng(8);
  const auto U = generator(random_hermitian(rng, 3), {});
  Eigen::ComplexEigenSolver<Matrix> es(U.matrix);
  CHECK(es.eigenvalues().real().cwiseAbs().maxCoeff() < 1e-10);
  Matrix H = Matrix::Zero(2, 2);
  H(0, 1) = 1.0;
  CHECK_THROWS_AS(generator(H, {}), DomainError);
  CHECK_THROWS_AS(generator(std::nullopt, {}), ShapeError);
}

TEST_CASE("density matrix invariants", "[lindblad]") {
  CHECK_NOTHROW(DensityMatrix::maximally_mixed(4));
  CHECK_THROWS_AS(DensityMatrix(Matrix::Identity(2, 2)), InvariantError);
  Matrix neg = Matrix::Zero(2, 2);
  neg(0, 0) = 1.1;
  neg(1, 1) = -0.1;
  CHECK_THROWS_AS(DensityMatrix(neg), InvariantError);
  Matrix tiny = Matrix::Zero(2, 2);
  tiny(0, 0) = 1.0 + 1e-12;
  tiny(1, 1) = -1e-12;
  CHECK(clamp_positivity(tiny) == 1);
  CHECK(tiny(1, 1).real() == 0.0);
  CHECK_THAT(tiny.trace().real(), WithinAbs(1.0, 1e-15));
}

TEST_CASE("continuous evolution", "[lindblad]") {
  const double gamma = 0.8;
  const auto L = generator(std::nullopt, {{gamma, matrix_unit(2, 0, 1)}});
  const auto rho0 = DensityMatrix::basis_state(2, 1);
  CHECK(max_abs(evolve_continuous(L, rho0, 0.0).matrix() - rho0.matrix()) == 0.0);
  for (double t : {0.1, 1.0, 3.7}) {
    CHECK_THAT(evolve_continuous(L, rho0, t)(1, 1).real(), WithinAbs(std::exp(-gamma * t), 1e-12));
  }
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto G = generator(random_hermitian(rng, 4), {{0.5, random_matrix(rng, 4)}, {0.2, random_matrix(rng, 4)}});
    const auto out = evolve_continuous(G, DensityMatrix(random_state(rng, 4)), 2.0);
    CHECK(std::abs(out.matrix().trace() - Complex(1, 0)) < 1e-10);
    CHECK(inspect_state(out.matrix()).ok());
  }
}

TEST_CASE("two-level steady state", "[lindblad]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double k12 = u(rng), k21 = u(rng);
    const auto L = generator(std::nullopt, {{k12, matrix_unit(2, 0, 1)}, {k21, matrix_unit(2, 1, 0)}});
    const auto ss = steady_states(L);
    REQUIRE(ss.kernel_dim == 1);
    REQUIRE(ss.basis.size() == 1);
    CHECK_THAT(ss.basis[0](0, 0).real(), WithinAbs(k12 / (k12 + k21), 1e-10));
    CHECK(L.apply(ss.representative.matrix()).norm() < 1e-10);
  }
}

TEST_CASE("steady states of degenerate generators", "[lindblad]") {
  const Eigen::Index d = 3;
  std::vector<Damper> dephase;
  for (Eigen::Index i = 0; i < d; ++i) dephase.push_back({1.0, matrix_unit(d, i, i)});
  const auto ss = steady_states(generator(std::nullopt, dephase, d));
  CHECK(ss.kernel_dim == d);
  REQUIRE(ss.basis.size() == static_cast<std::size_t>(d));
  for (const auto& rho : ss.basis) CHECK(max_abs(rho.matrix() - Matrix(rho.matrix().diagonal().asDiagonal())) < 1e-10);

  const auto zero = steady_states(generator(std::nullopt, {}, d));
  CHECK(zero.kernel_dim == d * d);
  CHECK(zero.basis.size() == static_cast<std::size_t>(d * d));
  CHECK(max_abs(zero.representative.matrix() - Matrix::Identity(d, d) / 3.0) < 1e-12);
}

TEST_CASE("kraus decomposition", "[lindblad]") {
  const auto id = kraus_from_map(Superoperator{Matrix::Identity(4, 4), 2, SuperoperatorKind::channel});
  REQUIRE(id.ops.size() == 1);
  const Complex phase = id.ops[0](0, 0);
  CHECK_THAT(std::abs(phase), WithinAbs(1.0, 1e-12));
  CHECK(max_abs(id.ops[0] - phase * Matrix::Identity(2, 2)) < 1e-12);

  // Amplitude damping limit: everything relaxes to |1>.
  const auto L = generator(std::nullopt, {{1.0, matrix_unit(2, 0, 1)}});
  const auto U = limit_channel(L);
  const auto k = kraus_from_map(U);
  CHECK(k.completeness_error() < 1e-10);
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 2; ++j)
      CHECK(max_abs(k.apply(matrix_unit(2, i, j)) - U.apply(matrix_unit(2, i, j))) < 1e-10);
  CHECK(max_abs(k.to_superoperator().matrix - U.matrix) < 1e-9);

  std::mt19937_64 rng(23);
  const auto R = generator(random_hermitian(rng, 3), {{1.0, random_matrix(rng, 3)}, {0.4, random_matrix(rng, 3)}});
  const auto channel = propagator(R, 0.8);
  const auto kr = kraus_from_map(channel);
  CHECK(kr.completeness_error() < 1e-10);
  CHECK(max_abs(kr.to_superoperator().matrix - channel.matrix) < 1e-9);

  // Transpose is positive but not completely positive.
  Matrix T = Matrix::Zero(4, 4);
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) T(j + 2 * i, i + 2 * j) = 1.0;
  CHECK_THROWS_WITH(kraus_from_map(Superoperator{T, 2, SuperoperatorKind::channel}),
                    Catch::Matchers::ContainsSubstring("completely positive"));
}

TEST_CASE("limit channel", "[lindblad]") {
  const auto zero = limit_channel(generator(std::nullopt, {}, 2));
  CHECK(max_abs(zero.matrix - Matrix::Identity(4, 4)) == 0.0);
  Matrix H = Matrix::Zero(2, 2);
  H(0, 0) = 1.0;
  CHECK_THROWS_AS(limit_channel(generator(H, {})), NumericalError);
}

TEST_CASE("adiabatic elimination closed forms", "[lindblad]") {
  const auto trivial = adiabatic_eliminate(KrausSet{{Matrix::Identity(3, 3)}}, {0, 1, 2});
  CHECK(max_abs(Matrix(trivial.kappa.values.cast<Complex>()) - Matrix::Identity(3, 3)) == 0.0);
  CHECK(trivial.kappa.normalization == KappaNormalization::over_n);
  // Pure dephasing: populations fixed, coherences decay.
  Matrix probe = Matrix::Constant(3, 3, Complex(1.0 / 3.0, 0.0));
  const Matrix moved = trivial.effective.apply(probe);
  CHECK(moved.diagonal().cwiseAbs().maxCoeff() < 1e-15);
  CHECK(std::abs(moved(0, 1)) > 0.1);

  // Projective measurement in a rotated basis.
  std::mt19937_64 rng(31);
  const Eigen::Index d = 3;
  Eigen::HouseholderQR<Matrix> qr(random_matrix(rng, d));
  const Matrix Q = qr.householderQ();
  KrausSet meas;
  for (Eigen::Index k = 0; k < d; ++k) meas.ops.push_back(Q.col(k) * Q.col(k).adjoint());
  const auto r = adiabatic_eliminate(meas, {0, 1, 2});
  for (Eigen::Index n = 0; n < d; ++n) {
    for (Eigen::Index m = 0; m < d; ++m) {
      double expect = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) expect += std::norm(Q(n, k) * std::conj(Q(m, k)));
      CHECK_THAT(r.kappa.values(n, m), WithinAbs(expect, 1e-12));
    }
  }
  CHECK_NOTHROW(r.kappa.check(1e-10));

  // |1> leaks out of span{|1>} under the flip.
  Matrix X = Matrix::Zero(2, 2);
  X(0, 1) = X(1, 0) = 1.0;
  CHECK_THROWS_AS(adiabatic_eliminate(KrausSet{{X}}, {0}), DomainError);
}

TEST_CASE("adiabatic elimination error scales as epsilon squared", "[lindblad]") {
  const test::ThreeLevel bench;
  std::vector<double> le, lerr;
  for (double p : {1.0, 1.5, 2.0, 2.5, 3.0}) {
    const double eps = std::pow(10.0, -p);
    le.push_back(std::log(eps));
    lerr.push_back(std::log(bench.error(eps)));
  }
  const double n = static_cast<double>(le.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < le.size(); ++i) {
    sx += le[i];
    sy += lerr[i];
    sxx += le[i] * le[i];
    sxy += le[i] * lerr[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK_THAT(slope, WithinAbs(2.0, 0.3));
}

TEST_CASE("effective evolution", "[lindblad]") {
  EvolutionConfig cfg;
  cfg.g = 0.3;
  cfg.steps = 25;

  KappaMatrix ident{RealMatrix::Identity(3, 3), KappaNormalization::over_n};
  Matrix diag = Matrix::Zero(3, 3);
  diag(0, 0) = 0.2;
  diag(1, 1) = 0.5;
  diag(2, 2) = 0.3;
  const auto flat = evolve_effective(ident, cfg, DensityMatrix(diag));
  REQUIRE(flat.size() == 26);
  for (const auto& s : flat.states) CHECK(max_abs(s - diag) < 1e-14);

  // Only kappa_12 > 0: rho_22 decays as exp(-g kappa_12 k).
  KappaMatrix decay{RealMatrix::Zero(2, 2), KappaNormalization::none};
  decay.values(0, 1) = 0.9;
  Matrix rho0 = Matrix::Zero(2, 2);
  rho0(0, 0) = 0.4;
  rho0(1, 1) = 0.6;
  const auto traj = evolve_effective(decay, cfg, DensityMatrix(rho0));
  for (int k = 0; k <= cfg.steps; ++k) {
    CHECK_THAT(traj.states[static_cast<std::size_t>(k)](1, 1).real(), WithinAbs(0.6 * std::exp(-0.3 * 0.9 * k), 1e-12));
    CHECK_THAT(traj.times[static_cast<std::size_t>(k)], WithinAbs(0.3 * k, 1e-15));
  }

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    RealMatrix v(4, 4);
    for (Eigen::Index i = 0; i < 4; ++i)
      for (Eigen::Index j = 0; j < 4; ++j) v(i, j) = u(rng);
    for (Eigen::Index j = 0; j < 4; ++j) v.col(j) /= v.col(j).sum();
    KappaMatrix k{v, KappaNormalization::over_n};
    Matrix p = Matrix::Zero(4, 4);
    for (Eigen::Index i = 0; i < 4; ++i) p(i, i) = 0.25;
    p(0, 0) = 0.4;
    p(3, 3) = 0.1;
    const auto t = evolve_effective(k, cfg, DensityMatrix(p));
    for (const auto& s : t.states) {
      CHECK(max_abs(s - Matrix(s.diagonal().asDiagonal())) < 1e-14);
      CHECK_THAT(s.trace().real(), WithinAbs(1.0, 1e-12));
    }
  }

  EvolutionConfig bad;
  bad.g = 0.0;
  CHECK_THROWS_AS(evolve_effective(ident, bad, DensityMatrix(diag)), DomainError);
  bad.g = 1.0;
  bad.kick_times = {1.0, 1.0};
  CHECK_THROWS_AS(bad.check(), DomainError);
}

TEST_CASE("kicked evolution", "[lindblad]") {
  std::mt19937_64 rng(53);
  const Matrix H = random_hermitian(rng, 3);
  const DensityMatrix rho0(random_state(rng, 3));
  // No kicks: pure unitary evolution.
  const auto free = evolve_kicked({H, std::nullopt}, {}, {}, rho0, 1.5);
  const Matrix W = expm(Complex(0, -1.5) * H);
  CHECK(max_abs(free.states.back() - W * rho0.matrix() * W.adjoint()) < 1e-12);

  // Identity coherent part, one kick.
  const std::vector<Damper> damp{{0.6, matrix_unit(3, 0, 2)}};
  const auto one = evolve_kicked({}, damp, {1.0}, rho0);
  const Matrix once = unvec(expm(generator(std::nullopt, damp, 3).matrix) * vec(rho0.matrix()), 3);
  CHECK(max_abs(one.states.back() - once) < 1e-12);

  // Commuting parts: diagonal Hamiltonian and dephasing dampers.
  Matrix Hd = Matrix::Zero(3, 3);
  Hd(0, 0) = 0.3;
  Hd(1, 1) = -1.1;
  Hd(2, 2) = 0.7;
  const std::vector<Damper> deph{{0.4, matrix_unit(3, 0, 0)}, {0.9, matrix_unit(3, 2, 2)}};
  const std::vector<double> sched{0.5, 1.2, 2.0, 2.1};
  const auto a = evolve_kicked({Hd, std::nullopt}, deph, sched, rho0, 3.0, KickOrder::coherent_then_kick);
  const auto b = evolve_kicked({Hd, std::nullopt}, deph, sched, rho0, 3.0, KickOrder::kick_then_coherent);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(max_abs(a.states[i] - b.states[i]) < 1e-10);

  Superoperator lossy{0.5 * Matrix::Identity(9, 9), 3, SuperoperatorKind::channel};
  CHECK_THROWS_AS(evolve_kicked({std::nullopt, lossy}, {}, {1.0}, rho0), DomainError);
  CHECK_THROWS_AS(evolve_kicked({H, std::nullopt}, {}, {1.0, 0.5}, rho0), DomainError);

  const auto chan = propagator(generator(std::nullopt, damp, 3), 0.5);
  const auto c = evolve_kicked({std::nullopt, chan}, deph, {1.0, 2.0}, rho0);
  CHECK(c.size() == 3);
  for (const auto& s : c.states) CHECK(inspect_state(s).ok());
}

TEST_CASE("subspace relaxer", "[lindblad]") {
  const auto L = subspace_relaxer(2, {0}, {1.0});
  const auto U = limit_channel(L);
  const Matrix out = U.apply(matrix_unit(2, 1, 1));
  CHECK(max_abs(out - matrix_unit(2, 0, 0)) < 1e-10);
  CHECK(max_abs(U.apply(matrix_unit(2, 0, 0)) - matrix_unit(2, 0, 0)) < 1e-10);

  std::mt19937_64 rng(61);
  const auto L4 = subspace_relaxer(4, {1, 3}, {0.7, 1.9});
  const auto U4 = limit_channel(L4);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix o = U4.apply(random_state(rng, 4));
    CHECK_THAT(o.trace().real(), WithinAbs(1.0, 1e-10));
    for (Eigen::Index i : {0, 2})
      for (Eigen::Index j = 0; j < 4; ++j) {
        CHECK(std::abs(o(i, j)) < 1e-10);
        CHECK(std::abs(o(j, i)) < 1e-10);
      }
    // States already inside D0 are untouched.
    Matrix inside = Matrix::Zero(4, 4);
    const Matrix s = random_state(rng, 2);
    const Eigen::Index idx[2] = {1, 3};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) inside(idx[i], idx[j]) = s(i, j);
    CHECK(max_abs(U4.apply(inside) - inside) < 1e-10);
  }
  const auto full = subspace_relaxer(2, {0, 1}, {1.0, 1.0});
  CHECK(max_abs(limit_channel(full).matrix - Matrix::Identity(4, 4)) == 0.0);
}
