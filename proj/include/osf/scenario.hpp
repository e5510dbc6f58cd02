#pragma once

// Scenario files and the amplitudes -> kappa -> evolution -> observables pipeline.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <gsl/gsl_version.h>
#include <json.hpp>

#include "osf/amplitudes.hpp"
#include "osf/bathfit.hpp"
#include "osf/kappa.hpp"
#include "osf/lindblad.hpp"
#include "osf/observables.hpp"
#include "osf/qed_reference.hpp"

namespace osf {

using Json = nlohmann::ordered_json;

inline constexpr const char* version = "0.1.0";

/// Reads keys from a config object and records every value used, defaults
/// included, so the effective configuration can be echoed back.
class ConfigReader {
 public:
  ConfigReader(const Json& src, Json& echo, std::string path) : src_(src), echo_(echo), path_(std::move(path)) {
    if (!src_.is_object()) throw DomainError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return src_.contains(key); }

  template <class T>
  T get(const std::string& key, const T& fallback) {
    T v = fallback;
    if (src_.contains(key)) v = convert<T>(src_.at(key), key);
    echo_[key] = v;
    return v;
  }

  template <class T>
  T require(const std::string& key) {
    if (!src_.contains(key)) throw DomainError(path_ + "." + key + " is required");
    T v = convert<T>(src_.at(key), key);
    echo_[key] = v;
    return v;
  }

  const Json& raw(const std::string& key) const {
    if (!src_.contains(key)) throw DomainError(path_ + "." + key + " is required");
    return src_.at(key);
  }

  /// Reader for a nested object; a missing key reads as an empty object.
  ConfigReader child(const std::string& key) {
    static const Json empty = Json::object();
    echo_[key] = Json::object();
    return ConfigReader(src_.contains(key) ? src_.at(key) : empty, echo_[key], path_ + "." + key);
  }

  void echo(const std::string& key, Json v) { echo_[key] = std::move(v); }
  const std::string& path() const noexcept { return path_; }

 private:
  template <class T>
  T convert(const Json& j, const std::string& key) const {
    try {
      return j.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw DomainError(path_ + "." + key + " has the wrong type");
    }
  }

  const Json& src_;
  Json& echo_;
  std::string path_;
};

inline BasisLabel parse_label(const std::string& s) {
  BasisLabel b;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) b.spins.push_back(Spin::parse(tok));
  if (b.spins.empty()) throw DomainError("empty basis label");
  return b;
}

inline Complex parse_complex(const Json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2) return {j[0].get<double>(), j[1].get<double>()};
  throw DomainError("complex numbers are written as x or [re, im]");
}

inline Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

// ---------------------------------------------------------------------------
// Scenario

enum class Backend { pr3d, asymptotic, kappa };

inline Backend parse_backend(const std::string& s) {
  if (s == "pr3d") return Backend::pr3d;
  if (s == "asymptotic") return Backend::asymptotic;
  if (s == "kappa") return Backend::kappa;
  throw DomainError("unknown backend '" + s + "' (pr3d, asymptotic, kappa)");
}

struct FoamSpec {
  std::string type = "chain";  // chain | disjoint | explicit
  int vertices = 2;
  std::vector<LinkId> boundary_links;  // explicit
  int internal_faces = 0;              // explicit
  std::vector<std::array<FaceIndex, 6>> vertex_slots;

  Foam2Complex build() const {
    if (type == "chain") return Foam2Complex::chain(vertices);
    if (type == "disjoint") return Foam2Complex::disjoint(vertices);
    if (type == "explicit") {
      Foam2Complex f;
      for (auto l : boundary_links) f.add_boundary_face(l);
      for (int i = 0; i < internal_faces; ++i) f.add_internal_face();
      for (const auto& v : vertex_slots) f.add_vertex(v);
      f.check();
      return f;
    }
    throw DomainError("unknown foam type '" + type + "' (chain, disjoint, explicit)");
  }
};

struct InitialState {
  std::string kind = "label";  // label | superposition | matrix | mixed
  std::vector<std::pair<std::size_t, Complex>> amplitudes;
  Matrix matrix;
};

struct ScenarioConfig {
  std::string name = "scenario";
  Backend backend = Backend::kappa;
  std::uint64_t seed = 1;
  std::vector<std::string> labels;
  std::vector<double> energies;
  KappaNormalization normalization = KappaNormalization::over_n;

  FoamSpec foam;
  std::vector<LinkId> in_links, out_links;
  BathSpec bath;
  Spin j_max = Spin::from_twice(4);
  std::vector<BasisLabel> basis;

  AsymptoticParams asymptotic;
  std::vector<double> lambdas;
  TwoLevelWeights weights = TwoLevelWeights::lambda4_over_f;

  RealMatrix kappa_table;

  EvolutionConfig evolution;
  InitialState initial;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> coherences;
  bool thermal = true;

  Json effective;  // every setting used, defaults filled in

  static ScenarioConfig from_json(const Json& src, std::optional<std::uint64_t> seed = std::nullopt,
                                  std::optional<Spin> j_max = std::nullopt);
  static ScenarioConfig from_file(const std::filesystem::path& p, std::optional<std::uint64_t> seed = std::nullopt,
                                  std::optional<Spin> j_max = std::nullopt) {
    std::ifstream in(p);
    if (!in) throw DomainError("cannot open config " + p.string());
    Json j;
    try {
      j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DomainError("config " + p.string() + ": " + e.what());
    }
    return from_json(j, seed, j_max);
  }

  Eigen::Index dim() const { return static_cast<Eigen::Index>(labels.size()); }

  DensityMatrix initial_state() const {
    const Eigen::Index d = dim();
    if (initial.kind == "matrix") {
      if (initial.matrix.rows() != d || initial.matrix.cols() != d) throw ShapeError("initial matrix has the wrong size");
      return DensityMatrix(initial.matrix);
    }
    if (initial.kind == "mixed") {
      Matrix rho = Matrix::Zero(d, d);
      for (const auto& [i, w] : initial.amplitudes) rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += w;
      return DensityMatrix(rho);
    }
    Vector psi = Vector::Zero(d);
    for (const auto& [i, a] : initial.amplitudes) psi(static_cast<Eigen::Index>(i)) += a;
    if (psi.norm() == 0.0) throw DomainError("initial superposition vanishes");
    return DensityMatrix::pure(psi / psi.norm());
  }
};

namespace detail {

inline std::size_t label_index(const std::vector<std::string>& labels, const std::string& s) {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == s) return i;
  // Accept equivalent spellings of spin labels ("1.5" for "3/2").
  try {
    const BasisLabel want = parse_label(s);
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (parse_label(labels[i]) == want) return i;
  } catch (const DomainError&) {
  }
  throw DomainError("initial state names unknown basis label '" + s + "'");
}

inline std::string lambda_label(double l) {
  std::ostringstream os;
  os << "lambda=" << l;
  return os.str();
}

}  // namespace detail

inline ScenarioConfig ScenarioConfig::from_json(const Json& src, std::optional<std::uint64_t> seed_override,
                                                std::optional<Spin> jmax_override) {
  ScenarioConfig c;
  ConfigReader r(src, c.effective, "config");
  c.name = r.get<std::string>("name", c.name);
  c.backend = parse_backend(r.require<std::string>("backend"));
  c.seed = r.get<std::uint64_t>("seed", c.seed);
  if (seed_override) {
    c.seed = *seed_override;
    r.echo("seed", c.seed);
  }
  c.normalization = parse_normalization(r.get<std::string>("normalization", "over-n"));
  const double energy_scale = r.get<double>("energy_scale", 1.0);

  switch (c.backend) {
    case Backend::pr3d: {
      auto p = r.child("pr3d");
      auto f = p.child("foam");
      c.foam.type = f.get<std::string>("type", c.foam.type);
      if (c.foam.type == "explicit") {
        c.foam.boundary_links = f.require<std::vector<LinkId>>("boundary_links");
        c.foam.internal_faces = f.get<int>("internal_faces", 0);
        c.foam.vertex_slots = f.require<std::vector<std::array<FaceIndex, 6>>>("vertices");
      } else {
        c.foam.vertices = f.get<int>("vertices", c.foam.vertices);
      }
      c.in_links = p.require<std::vector<LinkId>>("in_links");
      c.out_links = p.require<std::vector<LinkId>>("out_links");
      auto b = p.child("bath");
      c.bath.center = BathSpec::parse_center(b.get<std::string>("center", "split"));
      c.bath.j0 = b.get<double>("j0", c.bath.j0);
      for (const auto& [k, v] : b.get<std::map<std::string, std::string>>("pinned", {})) {
        c.bath.pinned[std::stoi(k)] = Spin::parse(v);
      }
      c.j_max = Spin::parse(p.get<std::string>("jmax", c.j_max.str()));
      if (jmax_override) {
        c.j_max = *jmax_override;
        p.echo("jmax", c.j_max.str());
      }
      c.labels = r.require<std::vector<std::string>>("basis");
      for (const auto& l : c.labels) c.basis.push_back(parse_label(l));
      for (const auto& b2 : c.basis) {
        double e = 0.0;
        for (const auto& j : b2.spins) e += std::sqrt(j.casimir());
        c.energies.push_back(energy_scale * e);
      }
      break;
    }
    case Backend::asymptotic: {
      auto a = r.child("asymptotic");
      c.asymptotic.gamma_I = a.get<double>("gamma_I", c.asymptotic.gamma_I);
      c.asymptotic.S_R = a.get<double>("S_R", c.asymptotic.S_R);
      c.asymptotic.alpha = parse_complex(a.has("alpha") ? a.raw("alpha") : Json(0.0));
      a.echo("alpha", complex_json(c.asymptotic.alpha));
      c.asymptotic.N_plus_abs = a.get<double>("N_plus_abs", c.asymptotic.N_plus_abs);
      c.asymptotic.Phi_c = a.get<double>("Phi_c", c.asymptotic.Phi_c);
      c.asymptotic.chi_plus_M = a.get<double>("chi_plus_M", c.asymptotic.chi_plus_M);
      c.asymptotic.check();
      c.lambdas = a.require<std::vector<double>>("lambdas");
      const auto w = a.get<std::string>("weights", "lambda4-over-f");
      if (w == "lambda4-over-f") c.weights = TwoLevelWeights::lambda4_over_f;
      else if (w == "f-over-lambda4") c.weights = TwoLevelWeights::f_over_lambda4;
      else throw DomainError("asymptotic.weights must be lambda4-over-f or f-over-lambda4");
      for (double l : c.lambdas) {
        if (!(l > 0.0)) throw DomainError("asymptotic lambdas must be positive");
        c.labels.push_back(detail::lambda_label(l));
        c.basis.push_back(BasisLabel{});
        c.energies.push_back(energy_scale * std::sqrt(l * (l + 1.0)));
      }
      r.echo("basis", c.labels);
      break;
    }
    case Backend::kappa: {
      const auto rows = r.require<std::vector<std::vector<double>>>("kappa");
      const auto d = static_cast<Eigen::Index>(rows.size());
      c.kappa_table = RealMatrix::Zero(d, d);
      for (Eigen::Index n = 0; n < d; ++n) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(n)].size()) != d) throw ShapeError("kappa table must be square");
        for (Eigen::Index m = 0; m < d; ++m) c.kappa_table(n, m) = rows[static_cast<std::size_t>(n)][static_cast<std::size_t>(m)];
      }
      c.labels = r.require<std::vector<std::string>>("basis");
      if (static_cast<Eigen::Index>(c.labels.size()) != d) throw ShapeError("kappa table and basis differ in size");
      if (r.has("energies")) {
        c.energies = r.require<std::vector<double>>("energies");
        for (double& e : c.energies) e *= energy_scale;
      } else {
        for (const auto& l : c.labels) {
          double e = 0.0;
          for (const auto& j : parse_label(l).spins) e += std::sqrt(j.casimir());
          c.energies.push_back(energy_scale * e);
        }
        r.echo("energies", c.energies);
      }
      break;
    }
  }
  if (c.energies.size() != c.labels.size()) throw ShapeError("one energy per basis state is required");

  auto ev = r.child("evolution");
  c.evolution.g = ev.get<double>("g", 0.1);
  c.evolution.steps = ev.get<int>("steps", 100);
  c.evolution.check();
  const Json& init = ev.raw("initial");
  Json& init_echo = c.effective["evolution"]["initial"];
  if (init.is_string()) {
    c.initial.kind = "label";
    c.initial.amplitudes = {{detail::label_index(c.labels, init.get<std::string>()), Complex(1.0, 0.0)}};
    init_echo = init;
  } else if (init.is_object() && init.contains("superposition")) {
    c.initial.kind = "superposition";
    for (const auto& term : init.at("superposition")) {
      c.initial.amplitudes.push_back({detail::label_index(c.labels, term.at("label").get<std::string>()),
                                      parse_complex(term.contains("amplitude") ? term.at("amplitude") : Json(1.0))});
    }
    init_echo = init;
  } else if (init.is_object() && init.contains("mixed")) {
    c.initial.kind = "mixed";
    for (const auto& term : init.at("mixed")) {
      c.initial.amplitudes.push_back(
          {detail::label_index(c.labels, term.at("label").get<std::string>()), Complex(term.at("weight").get<double>(), 0.0)});
    }
    init_echo = init;
  } else if (init.is_object() && init.contains("matrix")) {
    c.initial.kind = "matrix";
    const auto& rows = init.at("matrix");
    const auto d = static_cast<Eigen::Index>(rows.size());
    c.initial.matrix = Matrix::Zero(d, d);
    for (Eigen::Index n = 0; n < d; ++n)
      for (Eigen::Index m = 0; m < d; ++m) c.initial.matrix(n, m) = parse_complex(rows.at(static_cast<std::size_t>(n)).at(static_cast<std::size_t>(m)));
    init_echo = init;
  } else {
    throw DomainError("evolution.initial must be a label, {superposition}, {mixed} or {matrix}");
  }

  auto obs = r.child("observables");
  for (const auto& p : obs.get<std::vector<std::array<Eigen::Index, 2>>>("coherences", {})) {
    if (p[0] < 0 || p[1] < 0 || p[0] >= c.dim() || p[1] >= c.dim()) throw DomainError("coherence index out of range");
    c.coherences.push_back({p[0], p[1]});
  }
  c.thermal = obs.get<bool>("thermal", c.thermal);
  return c;
}

// ---------------------------------------------------------------------------
// Pipeline

struct StepInvariants {
  double trace_error = 0.0;
  double hermiticity_error = 0.0;
  double min_eigenvalue = 0.0;
};

struct PipelineResult {
  std::optional<TransitionMatrix> W;
  KappaMatrix kappa;
  EnergySpectrum spectrum;
  Trajectory trajectory;
  std::vector<StepInvariants> invariants;
  std::vector<double> energy;
  ObservableSeries release;
  std::vector<double> beta;  // NaN where undefined
  std::optional<ThermalDiagnostics> thermal;
  Matrix steady;             // limit of the initial state
  double energy_infinity = 0.0;
  double telescoping_residual = 0.0;  // |sum S_k g - (<E>_0 - <E>_inf)|
};

inline TransitionMatrix scenario_W(const ScenarioConfig& c, unsigned jobs = 1) {
  switch (c.backend) {
    case Backend::pr3d: {
      Pr3dProvider provider(c.foam.build(), c.in_links, c.out_links, c.bath, c.j_max);
      return transition_matrix(std::cref(provider), c.basis, jobs);
    }
    case Backend::asymptotic: {
      const auto d = static_cast<Eigen::Index>(c.lambdas.size());
      Vector w(d);
      for (Eigen::Index i = 0; i < d; ++i) w(i) = std::sqrt(two_level_weight(c.lambdas[static_cast<std::size_t>(i)], c.asymptotic, c.weights));
      TransitionMatrix t{c.basis, w.conjugate() * w.transpose()};
      t.check();
      return t;
    }
    case Backend::kappa: break;
  }
  throw DomainError("the kappa backend has no amplitudes");
}

inline PipelineResult run_pipeline(const ScenarioConfig& c, unsigned jobs = 1) {
  PipelineResult r;
  if (c.backend == Backend::kappa) {
    r.kappa = KappaMatrix{c.kappa_table, c.normalization};
    r.kappa.check(1e-10);
  } else {
    r.W = scenario_W(c, jobs);
    r.kappa = kappa_from_W(*r.W, c.normalization);
  }
  r.spectrum = EnergySpectrum(c.energies);
  const DensityMatrix rho0 = c.initial_state();
  r.trajectory = evolve_effective(r.kappa, c.evolution, rho0);

  const Matrix E = energy_operator(r.spectrum);
  for (const auto& rho : r.trajectory.states) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(rho), Eigen::EigenvaluesOnly);
    r.invariants.push_back({std::abs(rho.trace() - 1.0), hermiticity_error(rho), es.eigenvalues().minCoeff()});
    r.energy.push_back(expectation(rho, E));
  }
  r.beta = cascade_report(r.trajectory, r.spectrum).beta;
  r.release = r.trajectory.size() > 1 ? energy_release(r.trajectory, r.spectrum, c.evolution.g)
                                      : ObservableSeries{"release", {}, {}, {}};
  if (c.thermal) r.thermal = thermal_diagnostics(r.trajectory);

  r.steady = limit_channel(kappa_generator(r.kappa)).apply(rho0.matrix());
  r.energy_infinity = expectation(r.steady, E);
  double released = 0.0;
  for (double s : r.release.values) released += s * c.evolution.g;
  r.telescoping_residual = std::abs(released - (r.energy.front() - r.energy_infinity));
  return r;
}

// ---------------------------------------------------------------------------
// Output

namespace detail {

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw DomainError("cannot write " + p.string());
  return f;
}

}  // namespace detail

inline void write_trajectory_csv(std::ostream& os, const ScenarioConfig& c, const PipelineResult& r) {
  os << "step,gk";
  for (const auto& l : c.labels) os << ",p[" << l << "]";
  for (const auto& [n, m] : c.coherences) os << ",re_rho[" << n << "," << m << "],im_rho[" << n << "," << m << "]";
  os << ",trace,min_eig\n";
  for (std::size_t k = 0; k < r.trajectory.size(); ++k) {
    const Matrix& rho = r.trajectory.states[k];
    os << k << ',' << detail::num(r.trajectory.times[k]);
    for (Eigen::Index i = 0; i < rho.rows(); ++i) os << ',' << detail::num(rho(i, i).real());
    for (const auto& [n, m] : c.coherences) os << ',' << detail::num(rho(n, m).real()) << ',' << detail::num(rho(n, m).imag());
    os << ',' << detail::num(rho.trace().real()) << ',' << detail::num(r.invariants[k].min_eigenvalue) << '\n';
  }
}

inline void write_observables_csv(std::ostream& os, const PipelineResult& r) {
  os << "step,gk,energy,release";
  if (r.thermal) os << ",flow_residual,commutator,step_change";
  os << '\n';
  for (std::size_t k = 0; k < r.trajectory.size(); ++k) {
    os << k << ',' << detail::num(r.trajectory.times[k]) << ',' << detail::num(r.energy[k]) << ',';
    if (k < r.release.size()) os << detail::num(r.release.values[k]);
    if (r.thermal) {
      os << ',' << detail::num(r.thermal->flow_residual[k]) << ',' << detail::num(r.thermal->commutator[k]) << ','
         << detail::num(r.thermal->step_change[k]);
    }
    os << '\n';
  }
}

inline void write_temperature_csv(std::ostream& os, const PipelineResult& r) {
  os << "step,beta,T\n";
  for (std::size_t k = 0; k < r.beta.size(); ++k) {
    const double b = r.beta[k];
    os << k << ',' << detail::num(b) << ',' << detail::num(std::isnan(b) ? b : SpectralTemperature{b}.temperature()) << '\n';
  }
}

inline Json pipeline_summary(const ScenarioConfig& c, const PipelineResult& r) {
  Json s;
  StepInvariants worst{0.0, 0.0, std::numeric_limits<double>::infinity()};
  for (const auto& v : r.invariants) {
    worst.trace_error = std::max(worst.trace_error, v.trace_error);
    worst.hermiticity_error = std::max(worst.hermiticity_error, v.hermiticity_error);
    worst.min_eigenvalue = std::min(worst.min_eigenvalue, v.min_eigenvalue);
  }
  s["steps"] = r.trajectory.size() - 1;
  s["clamped_steps"] = r.trajectory.total_clamps();
  s["max_trace_error"] = worst.trace_error;
  s["max_hermiticity_error"] = worst.hermiticity_error;
  s["min_eigenvalue"] = worst.min_eigenvalue;
  Json final_p = Json::object(), steady_p = Json::object();
  for (Eigen::Index i = 0; i < c.dim(); ++i) {
    final_p[c.labels[static_cast<std::size_t>(i)]] = r.trajectory.states.back()(i, i).real();
    steady_p[c.labels[static_cast<std::size_t>(i)]] = r.steady(i, i).real();
  }
  s["final_populations"] = final_p;
  s["steady_populations"] = steady_p;
  s["energy_initial"] = r.energy.front();
  s["energy_final"] = r.energy.back();
  s["energy_infinity"] = r.energy_infinity;
  s["telescoping_residual"] = r.telescoping_residual;
  if (r.thermal) {
    double flow = 0.0, change = 0.0;
    for (std::size_t k = 0; k < r.thermal->flow_residual.size(); ++k) {
      flow = std::max(flow, r.thermal->flow_residual[k]);
      change = std::max(change, r.thermal->step_change[k]);
    }
    s["max_thermal_flow_residual"] = flow;
    s["max_step_change"] = change;
  }
  const auto cascade = cascade_report(r.trajectory, r.spectrum);
  Json dom = Json::array();
  for (auto i : cascade.dominant) dom.push_back(c.labels[i]);
  s["dominant_sequence"] = dom;
  s["switch_times"] = cascade.switch_times;
  s["max_levels_above_1pct"] = cascade.max_occupied;
  s["energy_monotone"] = cascade.energy_monotone();
  s["temperature_turns_positive"] = cascade.beta_turns_positive;
  return s;
}

struct RunOptions {
  std::filesystem::path out = "out";
  bool deterministic = false;
  unsigned jobs = 1;
};

inline Json report_header(const std::string& command, const RunOptions& o) {
  Json j;
  j["tool"] = "osf";
  j["version"] = version;
  j["command"] = command;
  Json v;
  v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  v["gsl"] = GSL_VERSION;
  v["compiler"] = __VERSION__;
  j["versions"] = v;
  j["deterministic"] = o.deterministic;
  j["jobs"] = o.jobs;
  Json tol;
  tol["state_trace"] = default_tolerances.state_trace;
  tol["trace"] = default_tolerances.trace;
  tol["hermiticity"] = default_tolerances.hermiticity;
  tol["positivity"] = default_tolerances.positivity;
  tol["kappa_normalization"] = 1e-12;
  tol["gaussian_tail_cut"] = gaussian_tail_cut;
  j["tolerances"] = tol;
  return j;
}

/// Writes report.json; wall time is left out in deterministic mode.
inline void write_report(const std::filesystem::path& dir, Json report, double seconds, const RunOptions& o) {
  report["wall_time_s"] = o.deterministic ? Json(nullptr) : Json(seconds);
  std::filesystem::create_directories(dir);
  auto f = detail::open_out(dir / "report.json");
  f << report.dump(2) << '\n';
}

/// evolve: W.csv, kappa.csv, trajectory.csv, observables.csv, temperature.csv.
inline Json run_evolve(const ScenarioConfig& c, const RunOptions& o, const std::filesystem::path& dir) {
  const PipelineResult r = run_pipeline(c, o.jobs);
  std::filesystem::create_directories(dir);
  Json files = Json::array();
  if (r.W) {
    auto f = detail::open_out(dir / "W.csv");
    write_labeled_matrix(f, c.labels, r.W->W.rows(), [&](auto n, auto m) { return format_complex(r.W->W(n, m)); });
    files.push_back("W.csv");
  }
  {
    auto f = detail::open_out(dir / "kappa.csv");
    write_csv(f, r.kappa, c.labels);
    files.push_back("kappa.csv");
  }
  {
    auto f = detail::open_out(dir / "trajectory.csv");
    write_trajectory_csv(f, c, r);
    files.push_back("trajectory.csv");
  }
  {
    auto f = detail::open_out(dir / "observables.csv");
    write_observables_csv(f, r);
    files.push_back("observables.csv");
  }
  {
    auto f = detail::open_out(dir / "temperature.csv");
    write_temperature_csv(f, r);
    files.push_back("temperature.csv");
  }
  Json out;
  out["outputs"] = files;
  out["summary"] = pipeline_summary(c, r);
  return out;
}

inline Json run_steady_state(const ScenarioConfig& c, const RunOptions& o, const std::filesystem::path& dir) {
  KappaMatrix k;
  if (c.backend == Backend::kappa) {
    k = KappaMatrix{c.kappa_table, c.normalization};
    k.check(1e-10);
  } else {
    k = kappa_from_W(scenario_W(c, o.jobs), c.normalization);
  }
  const auto ss = steady_states(kappa_generator(k));
  const Matrix limit = limit_channel(kappa_generator(k)).apply(c.initial_state().matrix());
  std::filesystem::create_directories(dir);
  auto f = detail::open_out(dir / "steady_state.csv");
  f << "label,representative,limit_of_initial\n";
  for (Eigen::Index i = 0; i < c.dim(); ++i) {
    f << '"' << c.labels[static_cast<std::size_t>(i)] << "\"," << detail::num(ss.representative(i, i).real()) << ','
      << detail::num(limit(i, i).real()) << '\n';
  }
  Json out;
  out["outputs"] = Json::array({"steady_state.csv"});
  out["kernel_dimension"] = ss.kernel_dim;
  return out;
}

inline Json run_spectral_temperature(const ScenarioConfig& c, const RunOptions& o, const std::filesystem::path& dir) {
  const PipelineResult r = run_pipeline(c, o.jobs);
  std::filesystem::create_directories(dir);
  auto f = detail::open_out(dir / "temperature.csv");
  write_temperature_csv(f, r);
  const auto cascade = cascade_report(r.trajectory, r.spectrum);
  Json out;
  out["outputs"] = Json::array({"temperature.csv"});
  out["temperature_turns_positive"] = cascade.beta_turns_positive;
  return out;
}

// ---------------------------------------------------------------------------
// Two-level sweep

struct TwoLevelSweep {
  AsymptoticParams params;
  std::vector<double> alphas{0.0, 1.0, 2.0};
  double lambda_min = 0.5, lambda_max = 5.0;
  int points = 100;
  Json effective;

  static TwoLevelSweep from_json(const Json& src) {
    TwoLevelSweep s;
    ConfigReader r(src, s.effective, "config");
    auto a = r.child("two_level");
    s.params.gamma_I = a.get<double>("gamma_I", s.params.gamma_I);
    s.params.S_R = a.get<double>("S_R", s.params.S_R);
    s.params.N_plus_abs = a.get<double>("N_plus_abs", s.params.N_plus_abs);
    s.alphas = a.get<std::vector<double>>("alphas", s.alphas);
    s.lambda_min = a.get<double>("lambda_min", s.lambda_min);
    s.lambda_max = a.get<double>("lambda_max", s.lambda_max);
    s.points = a.get<int>("points", s.points);
    if (!(s.lambda_min > 0.0) || !(s.lambda_max > s.lambda_min) || s.points < 2) throw DomainError("two_level: bad grid");
    return s;
  }

  double lambda(int i) const { return lambda_min + (lambda_max - lambda_min) * i / (points - 1); }
};

inline Json run_two_level(const TwoLevelSweep& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto f = detail::open_out(dir / "two_level.csv");
  f << "alpha,lambda1,lambda2,rho11\n";
  long degenerate = 0;
  for (double a : s.alphas) {
    AsymptoticParams p = s.params;
    p.alpha = a;
    for (int i = 0; i < s.points; ++i)
      for (int k = 0; k < s.points; ++k) {
        double v = std::numeric_limits<double>::quiet_NaN();
        try {
          v = two_level_rho11(s.lambda(i), s.lambda(k), p);
        } catch (const DomainError&) {
          ++degenerate;
        }
        f << detail::num(a) << ',' << detail::num(s.lambda(i)) << ',' << detail::num(s.lambda(k)) << ',' << detail::num(v) << '\n';
      }
  }
  Json out;
  out["outputs"] = Json::array({"two_level.csv"});
  out["degenerate_points"] = degenerate;
  return out;
}

// ---------------------------------------------------------------------------
// Bath fit

struct FitConfig {
  std::string target = "chain";  // chain | realizable
  int vertices = 2;
  int basis_size = 10;
  Spin j_max = Spin::from_twice(2);
  int target_samples = 10000;
  int bath_per_vertex = 0;  // 0: every assignment that couples to the basis
  std::uint64_t seed = 1;
  FitOptions options;
  long cost_samples = 10000;
  Json effective;

  static FitConfig from_json(const Json& src, std::optional<std::uint64_t> seed = std::nullopt,
                             std::optional<Spin> j_max = std::nullopt) {
    FitConfig c;
    ConfigReader r(src, c.effective, "config");
    r.get<std::string>("name", "fit");
    c.seed = r.get<std::uint64_t>("seed", c.seed);
    if (seed) {
      c.seed = *seed;
      r.echo("seed", c.seed);
    }
    auto f = r.child("fit");
    c.target = f.get<std::string>("target", c.target);
    if (c.target != "chain" && c.target != "realizable") throw DomainError("fit.target must be chain or realizable");
    c.vertices = f.get<int>("vertices", c.vertices);
    c.basis_size = f.get<int>("basis_size", c.basis_size);
    c.j_max = Spin::parse(f.get<std::string>("jmax", c.j_max.str()));
    if (j_max) {
      c.j_max = *j_max;
      f.echo("jmax", c.j_max.str());
    }
    c.target_samples = f.get<int>("target_samples", c.target_samples);
    c.bath_per_vertex = f.get<int>("bath_per_vertex", c.bath_per_vertex);
    c.options.restarts = f.get<int>("restarts", c.options.restarts);
    c.options.simplex_tol = f.get<double>("simplex_tol", c.options.simplex_tol);
    c.options.max_evals = f.get<long>("max_evals", c.options.max_evals);
    c.options.polish_rounds = f.get<int>("polish_rounds", c.options.polish_rounds);
    c.cost_samples = f.get<long>("cost_samples", c.cost_samples);
    return c;
  }

  FitProblem problem(unsigned jobs = 1) const {
    const auto basis = random_triads(basis_size, j_max, seed);
    const auto model = SimplifiedModel::build(basis, bath_per_vertex, j_max, derive_seed(seed, 1));
    Matrix target;
    if (this->target == "realizable") {
      target = model.W(model.random_parameters(derive_seed(seed, 2)));
    } else {
      ChainTarget t;
      t.V = vertices;
      t.basis = basis;
      t.samples = target_samples;
      t.j_max = j_max;
      t.seed = derive_seed(seed, 3);
      t.jobs = jobs;
      target = chain_target(t).W;
    }
    return FitProblem{target, model, options, seed, jobs};
  }
};

inline Json run_fit(const FitConfig& c, const RunOptions& o, const std::filesystem::path& dir) {
  const FitProblem p = c.problem(o.jobs);
  const FitResult r = fit_bath(p);
  Json rep;
  rep["params"] = std::vector<double>(r.params.data(), r.params.data() + r.params.size());
  rep["C"] = r.C;
  rep["evals"] = r.evals;
  rep["seed"] = c.seed;
  rep["status"] = r.status;
  rep["restart_costs"] = r.restart_costs;
  rep["target_samples"] = c.target == "chain" ? c.target_samples : 0;
  Json basis = Json::array();
  for (const auto& b : p.model.basis()) basis.push_back(b.str());
  rep["basis"] = basis;
  std::filesystem::create_directories(dir);
  auto f = detail::open_out(dir / "fit_report.json");
  f << rep.dump(2) << '\n';
  Json out;
  out["outputs"] = Json::array({"fit_report.json"});
  out["C"] = r.C;
  out["status"] = r.status;
  return out;
}

inline Json run_sample(const FitConfig& c, const RunOptions& o, const std::filesystem::path& dir) {
  const FitProblem p = c.problem(o.jobs);
  const CostHistogram h = sample_cost_distribution(p, c.cost_samples, o.jobs);
  std::filesystem::create_directories(dir);
  auto f = detail::open_out(dir / "histogram.csv");
  write_csv(f, h);
  Json out;
  out["outputs"] = Json::array({"histogram.csv"});
  out["n"] = h.n;
  out["min"] = h.min;
  out["max"] = h.max;
  out["mean"] = h.mean;
  out["bin_width"] = h.bin_width;
  return out;
}

// ---------------------------------------------------------------------------
// Curve comparison from CSV

/// Reads two numeric columns of a CSV with a header row; rows with an empty
/// value are skipped.
inline ObservableSeries read_series(const std::filesystem::path& p, const std::string& time_col, const std::string& value_col) {
  std::ifstream in(p);
  if (!in) throw DomainError("cannot open " + p.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream s(line);
    while (std::getline(s, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  };
  std::string line;
  if (!std::getline(in, line)) throw DomainError(p.string() + " is empty");
  const auto header = split(line);
  auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw DomainError(p.string() + " has no column '" + name + "'");
  };
  const std::size_t ti = col(time_col), vi = col(value_col);
  ObservableSeries s{value_col, {}, {}, {}};
  int row = 0;
  while (std::getline(in, line)) {
    const auto cells = split(line);
    if (cells.size() <= std::max(ti, vi) || cells[vi].empty()) continue;
    s.push(row++, std::stod(cells[ti]), std::stod(cells[vi]));
  }
  return s;
}

}  // namespace osf
