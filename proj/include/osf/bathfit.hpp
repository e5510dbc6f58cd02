#pragma once

// Fitting a target transition table with a bath on two unconnected vertices.

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "osf/amplitudes.hpp"
#include "osf/spin_network.hpp"

namespace osf {

/// C = || a/|a| - b/|b| ||, entries compared position by position.
inline double cost(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("cost: vectors differ in length");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DomainError("cost: zero-norm amplitude vector");
  return std::min(2.0, (a / na - b / nb).norm());
}

inline double cost(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("cost: matrices differ in shape");
  return cost(Vector(a.reshaped()), Vector(b.reshaped()));
}

/// Independent stream seed for draw `index` of a run seeded with `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// Uniform point of the probability simplex.
inline RealVector dirichlet_one(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> e(1.0);
  RealVector x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = e(rng);
  return x / x.sum();
}

/// `count` distinct admissible triads with every spin <= j_max.
inline std::vector<BasisLabel> random_triads(int count, Spin j_max, std::uint64_t seed) {
  std::vector<BasisLabel> all;
  const int t = j_max.twice();
  for (int a = 0; a <= t; ++a)
    for (int b = 0; b <= t; ++b)
      for (int c = 0; c <= t; ++c) {
        const Spin x = Spin::from_twice(a), y = Spin::from_twice(b), z = Spin::from_twice(c);
        if (triangle_ok(x, y, z)) all.push_back({{x, y, z}});
      }
  if (count < 1 || static_cast<std::size_t>(count) > all.size()) {
    throw DomainError("random_triads: only " + std::to_string(all.size()) + " admissible triads up to j = " + j_max.str());
  }
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(count));
  std::sort(all.begin(), all.end());
  return all;
}

/// Links (p_i p_{i+1}, p_{i+1} p_{i+2}, p_i p_{i+2}) of a chain triangle.
inline std::array<LinkId, 3> chain_triangle(int V, int i) {
  return {Foam2Complex::chain_link(V, i, i + 1), Foam2Complex::chain_link(V, i + 1, i + 2),
          Foam2Complex::chain_link(V, i, i + 2)};
}

struct ChainTarget {
  int V = 2;
  std::vector<BasisLabel> basis;  // triads, used for both in and out
  int samples = 10000;            // random bath networks summed over
  Spin j_max = Spin::from_twice(3);
  std::uint64_t seed = 1;
  unsigned jobs = 1;
};

/// W(n, m) = sum_s W_chain(out triad n on the last triangle, in triad m on the
/// first one, bath network s on every other link).
inline TransitionMatrix chain_target(const ChainTarget& spec) {
  if (spec.V < 2) throw DomainError("chain_target: need at least two vertices");
  if (spec.samples < 1) throw DomainError("chain_target: need at least one bath sample");
  if (spec.basis.empty()) throw ShapeError("chain_target: empty basis");
  for (const auto& b : spec.basis)
    if (b.spins.size() != 3) throw ShapeError("chain_target: basis labels must be triads");
  const Foam2Complex foam = Foam2Complex::chain(spec.V);
  const auto in = chain_triangle(spec.V, 0), out = chain_triangle(spec.V, spec.V);

  NetworkTemplate tmpl{foam.boundary_network(), {}};
  for (const auto& l : tmpl.topology.links()) tmpl.twice_range[l.id] = {0, spec.j_max.twice()};

  const auto d = static_cast<Eigen::Index>(spec.basis.size());
  const int chunk = 250;
  const int chunks = (spec.samples + chunk - 1) / chunk;
  std::vector<Matrix> partial(static_cast<std::size_t>(chunks), Matrix::Zero(d, d));
  const std::size_t faces = foam.faces().size();

  auto run_chunk = [&](int c) {
    Matrix& acc = partial[static_cast<std::size_t>(c)];
    std::vector<Spin> spins(faces);
    for (int s = c * chunk; s < std::min(spec.samples, (c + 1) * chunk); ++s) {
      const SpinNetwork bath = random_network(tmpl, derive_seed(spec.seed, static_cast<std::uint64_t>(s)));
      for (const auto& l : bath.links()) spins[static_cast<std::size_t>(*foam.face_of_link(l.id))] = l.spin;
      for (Eigen::Index n = 0; n < d; ++n) {
        for (int k = 0; k < 3; ++k)
          spins[static_cast<std::size_t>(*foam.face_of_link(out[k]))] = spec.basis[static_cast<std::size_t>(n)].spins[k];
        for (Eigen::Index m = 0; m < d; ++m) {
          for (int k = 0; k < 3; ++k)
            spins[static_cast<std::size_t>(*foam.face_of_link(in[k]))] = spec.basis[static_cast<std::size_t>(m)].spins[k];
          acc(n, m) += pr_pinned(foam, spins);
        }
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(spec.jobs, static_cast<unsigned>(chunks)));
  if (jobs == 1) {
    for (int c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < jobs; ++w)
      pool.emplace_back([&, w] {
        for (int c = static_cast<int>(w); c < chunks; c += static_cast<int>(jobs)) run_chunk(c);
      });
    for (auto& th : pool) th.join();
  }
  TransitionMatrix t{spec.basis, Matrix::Zero(d, d)};
  for (const auto& p : partial) t.W += p;
  t.check();
  return t;
}

/// Two unconnected tetrahedra. Vertex 1 carries the in triad, vertex 2 the out
/// triad, each on slots (AB, BC, CA). Each vertex has its own bath, a
/// superposition over a fixed list of (CD, AD, BD) assignments:
///   W(n, m) = (sum_r v_r B(n, r)) (sum_s u_s A(m, s)),  params = (u, v).
class SimplifiedModel {
 public:
  SimplifiedModel(std::vector<BasisLabel> basis, std::vector<std::array<Spin, 3>> bath_in,
                  std::vector<std::array<Spin, 3>> bath_out)
      : basis_(std::move(basis)), bath_in_(std::move(bath_in)), bath_out_(std::move(bath_out)) {
    if (basis_.empty() || bath_in_.empty() || bath_out_.empty()) throw ShapeError("simplified model: empty basis or bath");
    A_ = vertex_table(bath_in_);
    B_ = vertex_table(bath_out_);
  }

  /// Bath assignments up to j_max that couple to at least one basis triad;
  /// `per_vertex` of them drawn per vertex, or all when per_vertex <= 0.
  static SimplifiedModel build(std::vector<BasisLabel> basis, int per_vertex, Spin j_max, std::uint64_t seed) {
    std::vector<std::array<Spin, 3>> useful;
    const int t = j_max.twice();
    for (int a = 0; a <= t; ++a)
      for (int b = 0; b <= t; ++b)
        for (int c = 0; c <= t; ++c) {
          const std::array<Spin, 3> s{Spin::from_twice(a), Spin::from_twice(b), Spin::from_twice(c)};
          for (const auto& l : basis) {
            if (vertex(l, s) != Complex(0.0, 0.0)) {
              useful.push_back(s);
              break;
            }
          }
        }
    if (useful.empty()) throw DomainError("simplified model: no bath assignment couples to the basis");
    if (per_vertex <= 0) return SimplifiedModel(std::move(basis), useful, useful);
    if (useful.size() < static_cast<std::size_t>(per_vertex)) {
      throw DomainError("simplified model: only " + std::to_string(useful.size()) + " bath assignments couple to the basis");
    }
    std::mt19937_64 rng(seed);
    auto pick = [&] {
      auto u = useful;
      std::shuffle(u.begin(), u.end(), rng);
      u.resize(static_cast<std::size_t>(per_vertex));
      return u;
    };
    auto in = pick();
    auto out = pick();
    return SimplifiedModel(std::move(basis), std::move(in), std::move(out));
  }

  static Complex vertex(const BasisLabel& triad, const std::array<Spin, 3>& bath) {
    return pr_vertex({triad.spins[0], triad.spins[1], triad.spins[2], bath[0], bath[1], bath[2]});
  }

  Eigen::Index parameter_count() const { return A_.cols() + B_.cols(); }
  Eigen::Index in_count() const { return A_.cols(); }
  Eigen::Index out_count() const { return B_.cols(); }
  const std::vector<BasisLabel>& basis() const noexcept { return basis_; }
  const std::vector<std::array<Spin, 3>>& bath_in() const noexcept { return bath_in_; }
  const std::vector<std::array<Spin, 3>>& bath_out() const noexcept { return bath_out_; }

  Matrix W(const RealVector& params) const {
    if (params.size() != parameter_count()) throw ShapeError("simplified model: wrong parameter count");
    const Vector a = A_ * params.head(A_.cols()).cast<Complex>();
    const Vector b = B_ * params.tail(B_.cols()).cast<Complex>();
    return b * a.transpose();
  }

  /// Independent uniform simplex points for u and v.
  RealVector random_parameters(std::uint64_t seed) const {
    RealVector p(parameter_count());
    p << dirichlet_one(A_.cols(), derive_seed(seed, 0)), dirichlet_one(B_.cols(), derive_seed(seed, 1));
    return p;
  }

 private:
  Matrix vertex_table(const std::vector<std::array<Spin, 3>>& bath) const {
    for (const auto& l : basis_)
      if (l.spins.size() != 3) throw ShapeError("simplified model: basis labels must be triads");
    Matrix T(static_cast<Eigen::Index>(basis_.size()), static_cast<Eigen::Index>(bath.size()));
    for (std::size_t n = 0; n < basis_.size(); ++n)
      for (std::size_t s = 0; s < bath.size(); ++s)
        T(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s)) = vertex(basis_[n], bath[s]);
    return T;
  }

  std::vector<BasisLabel> basis_;
  std::vector<std::array<Spin, 3>> bath_in_, bath_out_;
  Matrix A_, B_;
};

struct FitOptions {
  int restarts = 5;
  double simplex_tol = 1e-8;   // simplex size at which a descent stops
  long max_evals = 200000;     // per restart
  int polish_rounds = 20;      // re-seeded simplices around the best point
};

struct FitProblem {
  Matrix target;
  SimplifiedModel model;
  FitOptions options{};
  std::uint64_t seed = 1;
  unsigned jobs = 1;

  void check() const {
    if (model.parameter_count() < 1) throw DomainError("fit: no parameters");
    const auto d = static_cast<Eigen::Index>(model.basis().size());
    if (target.rows() != d || target.cols() != d) throw ShapeError("fit: target and model dimensions differ");
    if (target.norm() == 0.0) throw DomainError("fit: target amplitudes vanish");
    if (options.restarts < 1 || !(options.simplex_tol > 0.0) || options.max_evals < 1) throw DomainError("fit: bad options");
  }

  double cost_at(const RealVector& params) const {
    const Matrix w = model.W(params);
    if (w.norm() == 0.0) return 2.0;
    return cost(target, w);
  }
};

struct FitResult {
  RealVector params;
  double C = 2.0;
  long evals = 0;
  std::string status;  // "converged" or "budget-exhausted"
  std::vector<double> restart_costs;
};

namespace detail {

struct Descent {
  const FitProblem* problem = nullptr;
  long evals = 0;
  double best = std::numeric_limits<double>::infinity();
  RealVector best_x;

  double operator()(const RealVector& x) {
    ++evals;
    const double c = problem->cost_at(x);
    if (c < best) {
      best = c;
      best_x = x;
    }
    return c * c;
  }
};

inline double descent_trampoline(const gsl_vector* v, void* params) {
  auto* d = static_cast<Descent*>(params);
  RealVector x(static_cast<Eigen::Index>(v->size));
  for (std::size_t i = 0; i < v->size; ++i) x(static_cast<Eigen::Index>(i)) = gsl_vector_get(v, i);
  return (*d)(x);
}

/// One restart: Nelder-Mead from x0, re-seeded around the best point while it improves.
inline bool run_descent(Descent& d, const RealVector& x0, const FitOptions& opt) {
  const auto n = static_cast<std::size_t>(x0.size());
  gsl_multimin_function f{&descent_trampoline, n, &d};
  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* step = gsl_vector_alloc(n);
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  RealVector start = x0;
  bool converged = false;
  double last = std::numeric_limits<double>::infinity();
  for (int round = 0; round <= opt.polish_rounds && d.evals < opt.max_evals; ++round) {
    const double scale = std::max(start.cwiseAbs().maxCoeff(), 1e-300);
    for (std::size_t i = 0; i < n; ++i) {
      gsl_vector_set(x, i, start(static_cast<Eigen::Index>(i)));
      gsl_vector_set(step, i, 0.25 * scale);
    }
    gsl_multimin_fminimizer_set(s, &f, x, step);
    int status = GSL_CONTINUE;
    while (status == GSL_CONTINUE && d.evals < opt.max_evals) {
      if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
      status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), opt.simplex_tol * scale);
    }
    converged = status == GSL_SUCCESS;
    start = d.best_x;
    if (!(d.best < last * (1.0 - 1e-6))) break;
    last = d.best;
  }
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(step);
  gsl_vector_free(x);
  return converged;
}

}  // namespace detail

/// Nelder-Mead with restarts from uniform simplex points; restart r is seeded
/// from (seed, r) so results do not depend on `jobs`.
inline FitResult fit_bath(const FitProblem& p) {
  p.check();
  gsl_set_error_handler_off();
  const int R = p.options.restarts;
  std::vector<detail::Descent> runs(static_cast<std::size_t>(R));
  for (auto& d : runs) d.problem = &p;
  std::vector<char> converged(static_cast<std::size_t>(R), 0);
  auto run = [&](int r) {
    const RealVector x0 = p.model.random_parameters(derive_seed(p.seed, static_cast<std::uint64_t>(r)));
    converged[static_cast<std::size_t>(r)] = detail::run_descent(runs[static_cast<std::size_t>(r)], x0, p.options);
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(p.jobs, static_cast<unsigned>(R)));
  if (jobs == 1) {
    for (int r = 0; r < R; ++r) run(r);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < jobs; ++w)
      pool.emplace_back([&, w] {
        for (int r = static_cast<int>(w); r < R; r += static_cast<int>(jobs)) run(r);
      });
    for (auto& th : pool) th.join();
  }
  FitResult out;
  bool any_converged = false;
  for (int r = 0; r < R; ++r) {
    const auto& d = runs[static_cast<std::size_t>(r)];
    out.evals += d.evals;
    out.restart_costs.push_back(d.best);
    any_converged = any_converged || converged[static_cast<std::size_t>(r)];
    if (d.best < out.C || out.params.size() == 0) {
      out.C = d.best;
      out.params = d.best_x;
    }
  }
  out.status = any_converged ? "converged" : "budget-exhausted";
  return out;
}

/// Density histogram with fixed 0.1 bins on [0, 2]; only bins from the one
/// holding the minimum to the one holding the maximum are listed.
struct CostHistogram {
  double bin_width = 0.1;
  std::vector<double> bin_left;
  std::vector<double> density;
  std::vector<long> counts;
  double min = 0.0, max = 0.0, mean = 0.0;
  long n = 0;
};

inline CostHistogram histogram(const std::vector<double>& costs, double bin_width = 0.1) {
  if (costs.empty()) throw DomainError("histogram: no samples");
  const int bins = static_cast<int>(std::lround(2.0 / bin_width));
  auto bin_of = [&](double c) { return std::clamp(static_cast<int>(std::floor(c / bin_width)), 0, bins - 1); };
  std::vector<long> counts(static_cast<std::size_t>(bins), 0);
  CostHistogram h;
  h.bin_width = bin_width;
  h.min = *std::min_element(costs.begin(), costs.end());
  h.max = *std::max_element(costs.begin(), costs.end());
  h.n = static_cast<long>(costs.size());
  h.mean = std::accumulate(costs.begin(), costs.end(), 0.0) / static_cast<double>(h.n);
  for (double c : costs) {
    if (!(c >= 0.0 && c <= 2.0)) throw NumericalError("histogram: cost " + std::to_string(c) + " outside [0, 2]");
    ++counts[static_cast<std::size_t>(bin_of(c))];
  }
  for (int b = bin_of(h.min); b <= bin_of(h.max); ++b) {
    h.bin_left.push_back(b * bin_width);
    h.counts.push_back(counts[static_cast<std::size_t>(b)]);
    h.density.push_back(static_cast<double>(counts[static_cast<std::size_t>(b)]) / (static_cast<double>(h.n) * bin_width));
  }
  return h;
}

/// Cost at n uniform simplex draws of the model parameters.
inline std::vector<double> sample_costs(const FitProblem& p, long n, unsigned jobs = 1) {
  p.check();
  if (n < 1) throw DomainError("sample_costs: n must be at least 1");
  std::vector<double> c(static_cast<std::size_t>(n));
  const std::uint64_t stream = derive_seed(p.seed, 0x5eedULL);
  auto draw = [&](long i) {
    c[static_cast<std::size_t>(i)] = p.cost_at(p.model.random_parameters(derive_seed(stream, static_cast<std::uint64_t>(i))));
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::min<long>(n, 1024))));
  if (jobs == 1) {
    for (long i = 0; i < n; ++i) draw(i);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < jobs; ++w)
      pool.emplace_back([&, w] {
        for (long i = w; i < n; i += jobs) draw(i);
      });
    for (auto& th : pool) th.join();
  }
  return c;
}

inline CostHistogram sample_cost_distribution(const FitProblem& p, long n, unsigned jobs = 1) {
  return histogram(sample_costs(p, n, jobs));
}

inline void write_csv(std::ostream& os, const CostHistogram& h) {
  os.precision(17);
  os << "bin_left,density\n";
  for (std::size_t i = 0; i < h.bin_left.size(); ++i) os << h.bin_left[i] << ',' << h.density[i] << '\n';
}

}  // namespace osf
