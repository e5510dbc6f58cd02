#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "osf/bathfit.hpp"

using namespace osf;
using Catch::Matchers::WithinAbs;

namespace {

Complex oracle_vertex(const std::array<int, 6>& tw) {
  int sum = 0;
  for (int t : tw) sum += t;
  return std::polar(1.0, std::numbers::pi * 0.5 * sum) * test::racah_6j(tw);
}

Vector random_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vector v(n);
  for (auto& x : v) x = Complex(g(rng), g(rng));
  return v;
}

}  // namespace

TEST_CASE("cost function", "[bathfit]") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector a = random_vector(9, rng), b = random_vector(9, rng);
    CHECK(cost(a, a) == 0.0);
    CHECK_THAT(cost(a, Vector(-a)), WithinAbs(2.0, 1e-15));
    const double c = cost(a, b);
    CHECK(c >= 0.0);
    CHECK(c <= 2.0);
    CHECK_THAT(cost(Vector(Complex(3.5, 0.0) * a), Vector(0.25 * b)), WithinAbs(c, 1e-14));
  }
  CHECK_THROWS_WITH(cost(Vector(Vector::Zero(3)), Vector(Vector::Ones(3))), Catch::Matchers::ContainsSubstring("zero-norm"));
  CHECK_THROWS_AS(cost(Vector(Vector::Ones(3)), Vector(Vector::Ones(4))), ShapeError);
}

TEST_CASE("random triads", "[bathfit]") {
  const auto t = random_triads(10, Spin::from_twice(2), 5);
  REQUIRE(t.size() == 10);
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(triangle_ok(t[i].spins[0], t[i].spins[1], t[i].spins[2]));
    if (i) CHECK(t[i - 1] < t[i]);
  }
  CHECK(random_triads(10, Spin::from_twice(2), 5) == t);
  CHECK_THROWS_AS(random_triads(1000, Spin::from_twice(2), 5), DomainError);
}

TEST_CASE("chain target against a direct product of 6j symbols", "[bathfit]") {
  ChainTarget spec;
  spec.V = 2;
  spec.j_max = Spin::from_twice(2);
  spec.basis = random_triads(4, spec.j_max, 3);
  spec.samples = 5;
  spec.seed = 9;
  const auto t = chain_target(spec);

  // Chain links: 0:(0,1) 1:(0,2) 2:(0,3) 3:(1,2) 4:(1,3) 5:(1,4) 6:(2,3) 7:(2,4) 8:(3,4).
  const Foam2Complex foam = Foam2Complex::chain(2);
  NetworkTemplate tmpl{foam.boundary_network(), {}};
  for (const auto& l : tmpl.topology.links()) tmpl.twice_range[l.id] = {0, spec.j_max.twice()};
  Matrix expect = Matrix::Zero(4, 4);
  for (int s = 0; s < spec.samples; ++s) {
    const auto net = random_network(tmpl, derive_seed(spec.seed, static_cast<std::uint64_t>(s)));
    std::array<int, 9> j{};
    for (const auto& l : net.links()) j[static_cast<std::size_t>(l.id)] = l.spin.twice();
    for (int n = 0; n < 4; ++n)
      for (int m = 0; m < 4; ++m) {
        const auto& in = spec.basis[static_cast<std::size_t>(m)].spins;
        const auto& out = spec.basis[static_cast<std::size_t>(n)].spins;
        j[0] = in[0].twice();   // p0p1
        j[3] = in[1].twice();   // p1p2
        j[1] = in[2].twice();   // p0p2
        j[6] = out[0].twice();  // p2p3
        j[8] = out[1].twice();  // p3p4
        j[7] = out[2].twice();  // p2p4
        // Tetrahedra ABCD = (p0 p1 p2 p3) and (p1 p2 p3 p4), slots AB BC CA CD AD BD.
        expect(n, m) += oracle_vertex({j[0], j[3], j[1], j[6], j[2], j[4]}) *
                        oracle_vertex({j[3], j[6], j[4], j[8], j[5], j[7]});
      }
  }
  CHECK((t.W - expect).cwiseAbs().maxCoeff() < 1e-12);

  ChainTarget threaded = spec;
  threaded.samples = 600;
  threaded.jobs = 3;
  ChainTarget serial = threaded;
  serial.jobs = 1;
  CHECK(chain_target(threaded).W == chain_target(serial).W);
}

TEST_CASE("simplified model is a product of vertex amplitudes", "[bathfit]") {
  const Spin jm = Spin::from_twice(2);
  const auto basis = random_triads(6, jm, 2);
  const auto model = SimplifiedModel::build(basis, 0, jm, 1);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  RealVector p(model.parameter_count());
  for (auto& x : p) x = g(rng);
  const Matrix W = model.W(p);
  for (int n = 0; n < 6; ++n)
    for (int m = 0; m < 6; ++m) {
      Complex a = 0.0, b = 0.0;
      for (Eigen::Index s = 0; s < model.in_count(); ++s) {
        const auto& bath = model.bath_in()[static_cast<std::size_t>(s)];
        const auto& l = basis[static_cast<std::size_t>(m)].spins;
        a += p(s) * oracle_vertex({l[0].twice(), l[1].twice(), l[2].twice(), bath[0].twice(), bath[1].twice(), bath[2].twice()});
      }
      for (Eigen::Index r = 0; r < model.out_count(); ++r) {
        const auto& bath = model.bath_out()[static_cast<std::size_t>(r)];
        const auto& l = basis[static_cast<std::size_t>(n)].spins;
        b += p(model.in_count() + r) *
             oracle_vertex({l[0].twice(), l[1].twice(), l[2].twice(), bath[0].twice(), bath[1].twice(), bath[2].twice()});
      }
      CHECK(std::abs(W(n, m) - a * b) < 1e-12);
    }
  CHECK_THROWS_AS(model.W(RealVector::Ones(3)), ShapeError);
  CHECK_THROWS_AS(SimplifiedModel::build(basis, 10000, jm, 1), DomainError);
}

TEST_CASE("realizable targets are recovered", "[bathfit]") {
  const Spin jm = Spin::from_twice(2);
  const auto basis = random_triads(10, jm, 7);
  const auto model = SimplifiedModel::build(basis, 4, jm, 8);
  FitProblem p{model.W(model.random_parameters(123)), model, {}, 42, 1};
  const auto r = fit_bath(p);
  CHECK(r.C <= 1e-6);
  CHECK(r.status == "converged");
  CHECK(r.C == *std::min_element(r.restart_costs.begin(), r.restart_costs.end()));
  CHECK_THAT(p.cost_at(r.params), WithinAbs(r.C, 0.0));

  // Same seed, same answer, whatever the thread count.
  FitProblem threaded = p;
  threaded.jobs = 3;
  const auto r2 = fit_bath(threaded);
  CHECK(r2.C == r.C);
  CHECK(r2.params == r.params);
  CHECK(r2.evals == r.evals);
}

TEST_CASE("fit reaches the rank-one bound on a chain target", "[bathfit]") {
  // With every coupling bath assignment the vertex tables span all triads, so
  // the best product model is the leading singular pair of the target.
  const Spin jm = Spin::from_twice(2);
  ChainTarget spec;
  spec.V = 3;
  spec.j_max = jm;
  spec.basis = random_triads(10, jm, 1);
  spec.samples = 800;
  spec.seed = 5;
  const auto t = chain_target(spec);
  const auto model = SimplifiedModel::build(spec.basis, 0, jm, 0);
  FitProblem p{t.W, model, {}, 3, 1};
  const auto r = fit_bath(p);

  Eigen::JacobiSVD<Matrix> svd(t.W);
  const double s1 = svd.singularValues()(0) / svd.singularValues().norm();
  const double bound = std::sqrt(2.0 - 2.0 * s1);
  CHECK(r.C >= bound - 1e-9);
  CHECK_THAT(r.C, WithinAbs(bound, 1e-6));
}

TEST_CASE("budget exhaustion is a status", "[bathfit]") {
  const Spin jm = Spin::from_twice(2);
  const auto basis = random_triads(10, jm, 7);
  const auto model = SimplifiedModel::build(basis, 4, jm, 8);
  FitProblem p{model.W(model.random_parameters(1)), model, {}, 42, 1};
  p.options.max_evals = 20;
  const auto r = fit_bath(p);
  CHECK(r.status == "budget-exhausted");
  CHECK(r.C <= 2.0);
}

TEST_CASE("cost histograms", "[bathfit]") {
  const auto one = histogram({0.73});
  REQUIRE(one.bin_left.size() == 1);
  CHECK_THAT(one.bin_left[0], WithinAbs(0.7, 1e-12));
  CHECK_THAT(one.density[0], WithinAbs(10.0, 1e-12));

  const auto edge = histogram({0.0, 2.0, 1.0});
  CHECK_THAT(edge.bin_left.back(), WithinAbs(1.9, 1e-12));
  CHECK(edge.counts.back() == 1);
  CHECK_THROWS_AS(histogram({2.5}), NumericalError);

  const Spin jm = Spin::from_twice(2);
  ChainTarget spec;
  spec.V = 4;
  spec.j_max = jm;
  spec.basis = random_triads(10, jm, 2);
  spec.samples = 1000;
  const auto t = chain_target(spec);
  FitProblem p{t.W, SimplifiedModel::build(spec.basis, 0, jm, 0), {}, 17, 1};
  const auto h = sample_cost_distribution(p, 10000);
  double mass = 0.0;
  for (std::size_t i = 0; i < h.density.size(); ++i) {
    mass += h.density[i] * h.bin_width;
    if (i) CHECK_THAT(h.bin_left[i] - h.bin_left[i - 1], WithinAbs(0.1, 1e-12));
  }
  CHECK_THAT(mass, WithinAbs(1.0, 1e-12));
  CHECK(h.min >= 0.0);
  CHECK(h.max <= 2.0);
  CHECK(h.min < h.mean - 0.2);
  CHECK_THAT(h.mean, WithinAbs(1.5, 0.3));

  std::ostringstream csv;
  write_csv(csv, h);
  CHECK(csv.str().rfind("bin_left,density\n", 0) == 0);
}
