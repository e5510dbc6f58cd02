#pragma once

// Transition amplitudes: the 3D Ponzano-Regge state sum on small 2-complexes,
// the large-spin vertex asymptotics, and their assembly into W and kappa.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "osf/kappa.hpp"
#include "osf/linalg.hpp"
#include "osf/recoupling.hpp"
#include "osf/spin_network.hpp"

namespace osf {

/// e^{i pi x}, exact on the quarter turns.
inline Complex half_turn_phase(int twice_x) {
  switch (((twice_x % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

/// (-1)^{sum j} {j1 j2 j3; j4 j5 j6}; the sign is a complex unit when the
/// sum is half-integer.
inline Complex pr_vertex(const std::array<Spin, 6>& j, const SixJTable& table = default_sixj_table()) {
  const double v = table(j);
  if (v == 0.0) return {0.0, 0.0};
  int twice_sum = 0;
  for (const auto& s : j) twice_sum += s.twice();
  return half_turn_phase(twice_sum) * v;
}

/// Face slots of a tetrahedral vertex ABCD: [AB, BC, CA, CD, AD, BD]. The
/// 6j triads are the four triangles ABC, ABD, BCD, ACD.
inline constexpr std::array<std::array<int, 3>, 4> vertex_triads{{{0, 1, 2}, {0, 4, 5}, {3, 1, 5}, {3, 4, 2}}};

using FaceIndex = int;

struct FoamFace {
  bool internal = false;
  LinkId link = -1;  // boundary faces only
};

/// Tetrahedral vertices glued along shared triangles. Faces are the edges of
/// the triangulation: boundary faces carry a link of the boundary spin
/// network, internal faces are summed.
class Foam2Complex {
 public:
  FaceIndex add_boundary_face(LinkId link) {
    for (const auto& f : faces_)
      if (!f.internal && f.link == link) throw GraphError("duplicate boundary link " + std::to_string(link));
    faces_.push_back({false, link});
    return static_cast<FaceIndex>(faces_.size() - 1);
  }

  FaceIndex add_internal_face() {
    faces_.push_back({true, -1});
    return static_cast<FaceIndex>(faces_.size() - 1);
  }

  int add_vertex(const std::array<FaceIndex, 6>& slots) {
    std::set<FaceIndex> seen;
    for (auto f : slots) {
      if (f < 0 || f >= static_cast<FaceIndex>(faces_.size())) throw GraphError("vertex references unknown face");
      if (!seen.insert(f).second) throw GraphError("vertex uses a face twice");
    }
    vertices_.push_back(slots);
    return static_cast<int>(vertices_.size() - 1);
  }

  const std::vector<FoamFace>& faces() const noexcept { return faces_; }
  const std::vector<std::array<FaceIndex, 6>>& vertices() const noexcept { return vertices_; }
  std::size_t vertex_count() const noexcept { return vertices_.size(); }

  std::optional<FaceIndex> face_of_link(LinkId link) const {
    for (std::size_t i = 0; i < faces_.size(); ++i)
      if (!faces_[i].internal && faces_[i].link == link) return static_cast<FaceIndex>(i);
    return std::nullopt;
  }

  std::vector<LinkId> boundary_links() const {
    std::vector<LinkId> out;
    for (const auto& f : faces_)
      if (!f.internal) out.push_back(f.link);
    return out;
  }

  /// Triangles as sorted face triples with the vertices containing them.
  std::map<std::array<FaceIndex, 3>, std::vector<int>> triangles() const {
    std::map<std::array<FaceIndex, 3>, std::vector<int>> out;
    for (std::size_t v = 0; v < vertices_.size(); ++v) {
      for (const auto& t : vertex_triads) {
        std::array<FaceIndex, 3> key{vertices_[v][t[0]], vertices_[v][t[1]], vertices_[v][t[2]]};
        std::sort(key.begin(), key.end());
        out[key].push_back(static_cast<int>(v));
      }
    }
    return out;
  }

  /// Each triangle glues at most two vertices, every internal face is used,
  /// and every boundary face sits on exactly two boundary triangles.
  void check() const {
    if (vertices_.empty()) throw GraphError("foam has no vertices");
    std::vector<int> uses(faces_.size(), 0);
    for (const auto& v : vertices_)
      for (auto f : v) ++uses[static_cast<std::size_t>(f)];
    for (std::size_t i = 0; i < faces_.size(); ++i) {
      if (uses[i] == 0) throw GraphError("face " + std::to_string(i) + " belongs to no vertex");
    }
    std::vector<int> boundary_triangles(faces_.size(), 0);
    for (const auto& [tri, vs] : triangles()) {
      if (vs.size() > 2) throw GraphError("a triangle is shared by more than two vertices");
      if (vs.size() == 1)
        for (auto f : tri) ++boundary_triangles[static_cast<std::size_t>(f)];
    }
    for (std::size_t i = 0; i < faces_.size(); ++i) {
      if (faces_[i].internal && boundary_triangles[i] != 0) {
        throw GraphError("internal face " + std::to_string(i) + " touches the boundary");
      }
      if (!faces_[i].internal && boundary_triangles[i] != 2) {
        throw GraphError("boundary face for link " + std::to_string(faces_[i].link) +
                         " is not on exactly two boundary triangles");
      }
    }
  }

  /// Boundary spin network: one node per free triangle, one link per
  /// boundary face. Spins are left at 0.
  SpinNetwork boundary_network() const {
    SpinNetwork net;
    std::map<FaceIndex, std::vector<NodeId>> ends;
    NodeId next = 0;
    for (const auto& [tri, vs] : triangles()) {
      if (vs.size() != 1) continue;
      net.add_node(next);
      for (auto f : tri) ends[f].push_back(next);
      ++next;
    }
    for (std::size_t i = 0; i < faces_.size(); ++i) {
      if (faces_[i].internal) continue;
      const auto& e = ends[static_cast<FaceIndex>(i)];
      if (e.size() != 2) throw GraphError("boundary face is not on two boundary triangles");
      net.add_link(faces_[i].link, e[0], e[1], Spin{});
    }
    return net;
  }

  /// Vertices grouped by shared faces.
  std::vector<std::vector<int>> components() const {
    const int n = static_cast<int>(vertices_.size());
    std::vector<int> parent(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = i;
    std::function<int(int)> find = [&](int x) {
      while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
      return x;
    };
    std::map<FaceIndex, int> owner;
    for (int v = 0; v < n; ++v) {
      for (auto f : vertices_[static_cast<std::size_t>(v)]) {
        auto [it, fresh] = owner.emplace(f, v);
        if (!fresh) parent[static_cast<std::size_t>(find(v))] = find(it->second);
      }
    }
    std::map<int, std::vector<int>> groups;
    for (int v = 0; v < n; ++v) groups[find(v)].push_back(v);
    std::vector<std::vector<int>> out;
    for (auto& [root, vs] : groups) out.push_back(std::move(vs));
    return out;
  }

  /// V tetrahedra (p_v, p_{v+1}, p_{v+2}, p_{v+3}) on points p_0..p_{V+2},
  /// consecutive ones sharing a triangle. Link ids number the edges (p_i, p_k),
  /// i < k <= i + 3, lexicographically.
  static Foam2Complex chain(int V) {
    if (V < 1) throw DomainError("chain foam needs at least one vertex");
    Foam2Complex foam;
    std::map<std::pair<int, int>, FaceIndex> edge;
    LinkId next = 0;
    for (int i = 0; i <= V + 2; ++i)
      for (int k = i + 1; k <= std::min(i + 3, V + 2); ++k) edge[{i, k}] = foam.add_boundary_face(next++);
    for (int v = 0; v < V; ++v) {
      const int A = v, B = v + 1, C = v + 2, D = v + 3;
      foam.add_vertex({edge[{A, B}], edge[{B, C}], edge[{A, C}], edge[{C, D}], edge[{A, D}], edge[{B, D}]});
    }
    return foam;
  }

  /// Link id of the chain edge (p_i, p_k).
  static LinkId chain_link(int V, int i, int k) {
    if (i > k) std::swap(i, k);
    if (i < 0 || k > V + 2 || k - i < 1 || k - i > 3) throw DomainError("not an edge of the chain");
    LinkId id = 0;
    for (int a = 0; a <= V + 2; ++a)
      for (int b = a + 1; b <= std::min(a + 3, V + 2); ++b) {
        if (a == i && b == k) return id;
        ++id;
      }
    throw DomainError("not an edge of the chain");
  }

  /// V unconnected tetrahedra; vertex v owns links 6v..6v+5 in slot order.
  static Foam2Complex disjoint(int V) {
    if (V < 1) throw DomainError("foam needs at least one vertex");
    Foam2Complex foam;
    for (int v = 0; v < V; ++v) {
      std::array<FaceIndex, 6> slots{};
      for (int s = 0; s < 6; ++s) slots[static_cast<std::size_t>(s)] = foam.add_boundary_face(6 * v + s);
      foam.add_vertex(slots);
    }
    return foam;
  }

 private:
  std::vector<FoamFace> faces_;
  std::vector<std::array<FaceIndex, 6>> vertices_;
};

/// Weight profile of one boundary link.
struct LinkWeight {
  enum class Kind { pinned, gaussian, flat };
  Kind kind = Kind::pinned;
  Spin spin;           // pinned
  double center = 1.0; // gaussian: exp(-(j - j0)^2 / sqrt(j0))

  static LinkWeight pin(Spin j) { return {Kind::pinned, j, 0.0}; }
  static LinkWeight gaussian(double j0) {
    if (!(j0 > 0.0)) throw DomainError("Gaussian center must be positive");
    return {Kind::gaussian, Spin{}, j0};
  }
  static LinkWeight flat() { return {Kind::flat, Spin{}, 0.0}; }
};

inline constexpr double gaussian_tail_cut = 1e-8;

/// Boundary state: a finite superposition of full spin assignments, or a
/// product of per-link weight profiles.
class BoundaryState {
 public:
  struct Term {
    Complex weight;
    std::map<LinkId, Spin> spins;
  };

  static BoundaryState terms(std::vector<Term> t) {
    bool any = false;
    for (const auto& x : t) any = any || x.weight != Complex(0.0, 0.0);
    if (!any) throw DomainError("boundary state has no term with nonzero weight");
    BoundaryState s;
    s.terms_ = std::move(t);
    return s;
  }

  static BoundaryState product(std::map<LinkId, LinkWeight> w) {
    BoundaryState s;
    s.product_ = std::move(w);
    return s;
  }

  static BoundaryState pinned(const std::map<LinkId, Spin>& spins) {
    std::map<LinkId, LinkWeight> w;
    for (const auto& [l, j] : spins) w[l] = LinkWeight::pin(j);
    return product(std::move(w));
  }

  bool is_product() const noexcept { return product_.has_value(); }
  const std::vector<Term>& term_list() const noexcept { return terms_; }
  const std::map<LinkId, LinkWeight>& profiles() const { return *product_; }

 private:
  std::vector<Term> terms_;
  std::optional<std::map<LinkId, LinkWeight>> product_;
};

namespace detail {

/// Candidate spins and weights for one face.
struct FaceDomain {
  std::vector<Spin> spins;
  std::vector<Complex> weights;
};

inline FaceDomain internal_domain(int twice_max) {
  FaceDomain d;
  for (int tw = 0; tw <= twice_max; ++tw) {
    d.spins.push_back(Spin::from_twice(tw));
    d.weights.push_back(half_turn_phase(tw) * static_cast<double>(tw + 1));
  }
  return d;
}

inline FaceDomain link_domain(const LinkWeight& w, int twice_max) {
  FaceDomain d;
  switch (w.kind) {
    case LinkWeight::Kind::pinned:
      d.spins.push_back(w.spin);
      d.weights.emplace_back(1.0, 0.0);
      break;
    case LinkWeight::Kind::flat:
      for (int tw = 0; tw <= twice_max; ++tw) {
        d.spins.push_back(Spin::from_twice(tw));
        d.weights.emplace_back(1.0, 0.0);
      }
      break;
    case LinkWeight::Kind::gaussian: {
      double peak = 0.0;
      std::vector<double> raw;
      for (int tw = 0; tw <= twice_max; ++tw) {
        const double j = 0.5 * tw;
        raw.push_back(std::exp(-(j - w.center) * (j - w.center) / std::sqrt(w.center)));
        peak = std::max(peak, raw.back());
      }
      for (int tw = 0; tw <= twice_max; ++tw) {
        if (raw[static_cast<std::size_t>(tw)] < gaussian_tail_cut * peak) continue;
        d.spins.push_back(Spin::from_twice(tw));
        d.weights.emplace_back(raw[static_cast<std::size_t>(tw)], 0.0);
      }
      break;
    }
  }
  return d;
}

/// Backtracking sum over the faces of one connected component in
/// ascending lexicographic order, pruning on completed triads.
class ComponentSum {
 public:
  ComponentSum(const Foam2Complex& foam, const std::vector<int>& verts, const std::vector<FaceDomain>& domains,
               const SixJTable& table)
      : foam_(foam), verts_(verts), domains_(domains), table_(table) {
    std::map<FaceIndex, int> pos;
    for (int v : verts_) {
      for (auto f : foam_.vertices()[static_cast<std::size_t>(v)]) {
        if (pos.emplace(f, static_cast<int>(order_.size())).second) order_.push_back(f);
      }
    }
    // A triad is checked once its last face (in summation order) is set.
    checks_.resize(order_.size());
    for (int v : verts_) {
      const auto& slots = foam_.vertices()[static_cast<std::size_t>(v)];
      for (const auto& t : vertex_triads) {
        const std::array<FaceIndex, 3> tri{slots[t[0]], slots[t[1]], slots[t[2]]};
        int last = 0;
        for (auto f : tri) last = std::max(last, pos[f]);
        checks_[static_cast<std::size_t>(last)].push_back(tri);
      }
    }
    assigned_.assign(foam_.faces().size(), Spin{});
  }

  Complex run() {
    total_ = {0.0, 0.0};
    recurse(0, {1.0, 0.0});
    return total_;
  }

 private:
  void recurse(std::size_t depth, Complex weight) {
    if (depth == order_.size()) {
      Complex prod = weight;
      for (int v : verts_) {
        const auto& slots = foam_.vertices()[static_cast<std::size_t>(v)];
        std::array<Spin, 6> j;
        for (std::size_t s = 0; s < 6; ++s) j[s] = assigned_[static_cast<std::size_t>(slots[s])];
        const Complex a = pr_vertex(j, table_);
        if (a == Complex(0.0, 0.0)) return;
        prod *= a;
      }
      total_ += prod;
      return;
    }
    const FaceIndex f = order_[depth];
    const auto& dom = domains_[static_cast<std::size_t>(f)];
    for (std::size_t i = 0; i < dom.spins.size(); ++i) {
      assigned_[static_cast<std::size_t>(f)] = dom.spins[i];
      bool ok = true;
      for (const auto& tri : checks_[depth]) {
        if (!triangle_ok(assigned_[static_cast<std::size_t>(tri[0])], assigned_[static_cast<std::size_t>(tri[1])],
                         assigned_[static_cast<std::size_t>(tri[2])])) {
          ok = false;
          break;
        }
      }
      if (ok) recurse(depth + 1, weight * dom.weights[i]);
    }
  }

  const Foam2Complex& foam_;
  const std::vector<int>& verts_;
  const std::vector<FaceDomain>& domains_;
  const SixJTable& table_;
  std::vector<FaceIndex> order_;
  std::vector<std::vector<std::array<FaceIndex, 3>>> checks_;
  std::vector<Spin> assigned_;
  Complex total_;
};

inline Complex product_sum(const Foam2Complex& foam, const std::map<LinkId, LinkWeight>& profile, int twice_max,
                           const SixJTable& table) {
  std::vector<FaceDomain> domains;
  std::vector<LinkId> missing;
  for (const auto& f : foam.faces()) {
    if (f.internal) {
      domains.push_back(internal_domain(twice_max));
      continue;
    }
    auto it = profile.find(f.link);
    if (it == profile.end()) {
      missing.push_back(f.link);
      domains.emplace_back();
      continue;
    }
    domains.push_back(link_domain(it->second, twice_max));
  }
  if (!missing.empty()) {
    std::string msg = "boundary state leaves links uncovered:";
    for (auto l : missing) msg += " " + std::to_string(l);
    throw DomainError(msg);
  }
  Complex total{1.0, 0.0};
  for (const auto& comp : foam.components()) {
    total *= ComponentSum(foam, comp, domains, table).run();
    if (total == Complex(0.0, 0.0)) break;
  }
  return total;
}

}  // namespace detail

/// Ponzano-Regge amplitude
///   sum_{j_f} prod_f (-1)^{j_f} (2j_f + 1) prod_v (-1)^{sum j} {6j}
/// over internal faces up to j_max, contracted with the boundary state.
/// Normalization is fixed to 1.
inline Complex pr_transition(const Foam2Complex& foam, const BoundaryState& boundary, Spin j_max,
                             const SixJTable& table = default_sixj_table()) {
  foam.check();
  if (boundary.is_product()) return detail::product_sum(foam, boundary.profiles(), j_max.twice(), table);
  Complex total{0.0, 0.0};
  for (const auto& term : boundary.term_list()) {
    if (term.weight == Complex(0.0, 0.0)) continue;
    std::map<LinkId, LinkWeight> pins;
    for (const auto& [l, j] : term.spins) pins[l] = LinkWeight::pin(j);
    total += term.weight * detail::product_sum(foam, pins, j_max.twice(), table);
  }
  return total;
}

/// Amplitude of a fully pinned boundary without internal faces.
inline Complex pr_pinned(const Foam2Complex& foam, const std::vector<Spin>& face_spins,
                         const SixJTable& table = default_sixj_table()) {
  Complex prod{1.0, 0.0};
  for (const auto& slots : foam.vertices()) {
    std::array<Spin, 6> j;
    for (std::size_t s = 0; s < 6; ++s) j[s] = face_spins[static_cast<std::size_t>(slots[s])];
    prod *= pr_vertex(j, table);
    if (prod == Complex(0.0, 0.0)) break;
  }
  return prod;
}

// ---------------------------------------------------------------------------
// Large-spin vertex

struct AsymptoticParams {
  double gamma_I = 1.0;
  double S_R = 1.0;
  Complex alpha{0.0, 0.0};  // N_- = alpha N_+
  double N_plus_abs = 1.0;
  double Phi_c = 0.0;
  double chi_plus_M = 0.0;  // half-integer

  void check() const {
    if (!(N_plus_abs > 0.0)) throw DomainError("N_plus_abs must be positive");
  }
};

/// ((-1)^{chi+M} / lambda^12) e^{i lambda Phi_c} (N_+ e^{i lambda gamma S_R} + N_- e^{-i lambda gamma S_R})
inline Complex asymptotic_vertex(double lambda, const AsymptoticParams& p) {
  p.check();
  if (!(lambda > 0.0)) throw DomainError("asymptotic_vertex: lambda must be positive");
  const double x = lambda * p.gamma_I * p.S_R;
  const Complex Np(p.N_plus_abs, 0.0);
  const Complex Nm = p.alpha * Np;
  const Complex sign = std::exp(Complex(0.0, std::numbers::pi * p.chi_plus_M));
  return sign / std::pow(lambda, 12) * std::exp(Complex(0.0, lambda * p.Phi_c)) *
         (Np * std::exp(Complex(0.0, x)) + Nm * std::exp(Complex(0.0, -x)));
}

/// f(lambda) = |e^{2 i lambda gamma S_R} + alpha| |N_+|
inline double interference_factor(double lambda, const AsymptoticParams& p) {
  p.check();
  return std::abs(std::exp(Complex(0.0, 2.0 * lambda * p.gamma_I * p.S_R)) + p.alpha) * p.N_plus_abs;
}

/// rho_11 = l1^4 f(l2) / (l1^4 f(l2) + l2^4 f(l1)). The smaller share is
/// divided out directly and the larger one taken as its complement, so that
/// swapping the levels sums to exactly 1.
inline double two_level_rho11(double lambda1, double lambda2, const AsymptoticParams& p) {
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0)) throw DomainError("two_level_rho11: lambdas must be positive");
  const double a = std::pow(lambda1, 4) * interference_factor(lambda2, p);
  const double b = std::pow(lambda2, 4) * interference_factor(lambda1, p);
  if (a + b == 0.0) throw DomainError("two_level_rho11: degenerate steady state, f vanishes at both lambdas");
  if (a < b) return a / (a + b);
  if (b < a) return 1.0 - b / (a + b);
  return 0.5;
}

/// Squared-modulus weights |W_n|^2 of the two-level model.
enum class TwoLevelWeights {
  lambda4_over_f,  // lambda^4 / f(lambda): gives rho11 = l1^4 f(l2) / (l1^4 f(l2) + l2^4 f(l1))
  f_over_lambda4   // f(lambda) / lambda^4: squared modulus of the vertex asymptotics
};

inline double two_level_weight(double lambda, const AsymptoticParams& p, TwoLevelWeights w) {
  const double f = interference_factor(lambda, p);
  if (w == TwoLevelWeights::lambda4_over_f) {
    if (f == 0.0) throw DomainError("two-level weight: f vanishes at lambda = " + std::to_string(lambda));
    return std::pow(lambda, 4) / f;
  }
  return f / std::pow(lambda, 4);
}

// ---------------------------------------------------------------------------
// Reduced basis and transition matrices

/// Spins pinned on the in- or out-slot links for one reduced basis state.
struct BasisLabel {
  std::vector<Spin> spins;

  std::string str() const {
    std::string s;
    for (std::size_t i = 0; i < spins.size(); ++i) s += (i ? " " : "") + spins[i].str();
    return s;
  }
  double mean() const {
    double m = 0.0;
    for (const auto& j : spins) m += j.value();
    return spins.empty() ? 0.0 : m / static_cast<double>(spins.size());
  }
  auto operator<=>(const BasisLabel&) const = default;
};

struct TransitionMatrix {
  std::vector<BasisLabel> basis;
  Matrix W;  // W(n, m): out n, in m

  void check() const {
    if (W.rows() != W.cols()) throw ShapeError("transition matrix must be square");
    if (static_cast<std::size_t>(W.rows()) != basis.size()) throw ShapeError("transition matrix and basis differ");
    if (!W.allFinite()) throw NumericalError("transition matrix has non-finite entries");
  }
};

/// W(out n, in m).
using AmplitudeProvider = std::function<Complex(const BasisLabel& out, const BasisLabel& in)>;

/// W_nm = conj(W_n) W_m with W_n looked up by basis position.
class FactorizedProvider {
 public:
  FactorizedProvider(std::vector<BasisLabel> basis, std::vector<Complex> weights)
      : basis_(std::move(basis)), weights_(std::move(weights)) {
    if (basis_.size() != weights_.size()) throw ShapeError("factorized provider: one weight per basis state");
  }

  Complex operator()(const BasisLabel& out, const BasisLabel& in) const {
    return std::conj(weight(out)) * weight(in);
  }

 private:
  Complex weight(const BasisLabel& b) const {
    for (std::size_t i = 0; i < basis_.size(); ++i)
      if (basis_[i] == b) return weights_[i];
    throw DomainError("factorized provider: unknown basis state " + b.str());
  }
  std::vector<BasisLabel> basis_;
  std::vector<Complex> weights_;
};

/// Bath profile for the links outside the in/out slots.
struct BathSpec {
  enum class Center { fixed, in, out, split };
  Center center = Center::split;
  double j0 = 1.0;        // fixed center
  std::map<LinkId, Spin> pinned;  // extra pinned bath links

  static Center parse_center(const std::string& s) {
    if (s == "fixed") return Center::fixed;
    if (s == "in") return Center::in;
    if (s == "out") return Center::out;
    if (s == "split") return Center::split;
    throw DomainError("unknown Gaussian center mode '" + s + "'");
  }
};

/// Ponzano-Regge amplitudes with the in label pinned on `in_links`, the out
/// label on `out_links` and a Gaussian bath on every other boundary link.
/// In `split` mode a bath link touching the first vertex is centered on the
/// in label, any other on the out label.
class Pr3dProvider {
 public:
  Pr3dProvider(Foam2Complex foam, std::vector<LinkId> in_links, std::vector<LinkId> out_links, BathSpec bath,
               Spin j_max)
      : foam_(std::move(foam)), in_(std::move(in_links)), out_(std::move(out_links)), bath_(std::move(bath)),
        j_max_(j_max) {
    foam_.check();
    std::set<LinkId> used;
    for (auto l : in_)
      if (!foam_.face_of_link(l) || !used.insert(l).second) throw DomainError("bad in-slot link " + std::to_string(l));
    for (auto l : out_)
      if (!foam_.face_of_link(l) || !used.insert(l).second) throw DomainError("bad out-slot link " + std::to_string(l));
    const auto& first = foam_.vertices().front();
    for (auto f : first) first_vertex_faces_.insert(f);
  }

  Complex operator()(const BasisLabel& out, const BasisLabel& in) const {
    return pr_transition(foam_, state(out, in), j_max_);
  }

  BoundaryState state(const BasisLabel& out, const BasisLabel& in) const {
    if (in.spins.size() != in_.size() || out.spins.size() != out_.size()) {
      throw ShapeError("basis label size does not match the in/out slots");
    }
    std::map<LinkId, LinkWeight> w;
    for (std::size_t i = 0; i < in_.size(); ++i) w[in_[i]] = LinkWeight::pin(in.spins[i]);
    for (std::size_t i = 0; i < out_.size(); ++i) w[out_[i]] = LinkWeight::pin(out.spins[i]);
    for (auto l : foam_.boundary_links()) {
      if (w.count(l)) continue;
      if (auto it = bath_.pinned.find(l); it != bath_.pinned.end()) {
        w[l] = LinkWeight::pin(it->second);
        continue;
      }
      double c = bath_.j0;
      switch (bath_.center) {
        case BathSpec::Center::fixed: break;
        case BathSpec::Center::in: c = in.mean(); break;
        case BathSpec::Center::out: c = out.mean(); break;
        case BathSpec::Center::split:
          c = first_vertex_faces_.count(*foam_.face_of_link(l)) ? in.mean() : out.mean();
          break;
      }
      w[l] = LinkWeight::gaussian(c);
    }
    return BoundaryState::product(std::move(w));
  }

  const Foam2Complex& foam() const noexcept { return foam_; }

 private:
  Foam2Complex foam_;
  std::vector<LinkId> in_, out_;
  BathSpec bath_;
  Spin j_max_;
  std::set<FaceIndex> first_vertex_faces_;
};

/// Fills W(n, m) = provider(basis[n], basis[m]); entries are independent, so
/// `jobs` > 1 splits the rows across threads without changing any value.
inline TransitionMatrix transition_matrix(const AmplitudeProvider& provider, const std::vector<BasisLabel>& basis,
                                          unsigned jobs = 1) {
  const auto d = static_cast<Eigen::Index>(basis.size());
  if (d == 0) throw ShapeError("transition_matrix: empty basis");
  TransitionMatrix t{basis, Matrix::Zero(d, d)};
  std::vector<std::string> errors(static_cast<std::size_t>(d));
  auto fill_row = [&](Eigen::Index n) {
    for (Eigen::Index m = 0; m < d; ++m) {
      try {
        t.W(n, m) = provider(basis[static_cast<std::size_t>(n)], basis[static_cast<std::size_t>(m)]);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(n)] = "W(" + basis[static_cast<std::size_t>(n)].str() + ", " +
                                              basis[static_cast<std::size_t>(m)].str() + "): " + e.what();
        return;
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(d)));
  if (jobs == 1) {
    for (Eigen::Index n = 0; n < d; ++n) fill_row(n);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < jobs; ++w) {
      pool.emplace_back([&, w] {
        for (Eigen::Index n = w; n < d; n += jobs) fill_row(n);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (!e.empty()) throw NumericalError(e);
  t.check();
  return t;
}

/// kappa(n, m) = |W(n,m)|^2 normalized over n (columns) or over m (rows).
inline KappaMatrix kappa_from_W(const TransitionMatrix& t, KappaNormalization conv = KappaNormalization::over_n) {
  t.check();
  const Eigen::Index d = t.W.rows();
  RealMatrix p = t.W.cwiseAbs2();
  if (conv == KappaNormalization::over_n) {
    for (Eigen::Index m = 0; m < d; ++m) {
      const double s = p.col(m).sum();
      if (s == 0.0) throw DomainError("kappa_from_W: all amplitudes vanish for in-state " + t.basis[static_cast<std::size_t>(m)].str());
      p.col(m) /= s;
    }
  } else if (conv == KappaNormalization::over_m) {
    for (Eigen::Index n = 0; n < d; ++n) {
      const double s = p.row(n).sum();
      if (s == 0.0) throw DomainError("kappa_from_W: all amplitudes vanish for out-state " + t.basis[static_cast<std::size_t>(n)].str());
      p.row(n) /= s;
    }
  }
  KappaMatrix k{std::move(p), conv};
  k.check(1e-12);
  return k;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_complex(Complex z) {
  std::ostringstream os;
  os.precision(17);
  os << z.real();
  if (z.imag() != 0.0) os << (z.imag() < 0.0 ? "" : "+") << z.imag() << 'j';
  return os.str();
}

inline std::vector<std::string> label_strings(const std::vector<BasisLabel>& basis) {
  std::vector<std::string> out;
  for (const auto& b : basis) out.push_back(b.str());
  return out;
}

/// Row-major matrix with labels on both axes.
template <class Cell>
void write_labeled_matrix(std::ostream& os, const std::vector<std::string>& labels, Eigen::Index d, Cell cell) {
  os << "n\\m";
  for (const auto& b : labels) os << ",\"" << b << '"';
  os << '\n';
  for (Eigen::Index n = 0; n < d; ++n) {
    os << '"' << labels[static_cast<std::size_t>(n)] << '"';
    for (Eigen::Index m = 0; m < d; ++m) os << ',' << cell(n, m);
    os << '\n';
  }
}

inline void write_csv(std::ostream& os, const TransitionMatrix& t) {
  write_labeled_matrix(os, label_strings(t.basis), t.W.rows(), [&](auto n, auto m) { return format_complex(t.W(n, m)); });
}

inline void write_csv(std::ostream& os, const KappaMatrix& k, const std::vector<std::string>& labels) {
  write_labeled_matrix(os, labels, k.dim(), [&](auto n, auto m) {
    std::ostringstream c;
    c.precision(17);
    c << k.values(n, m);
    return c.str();
  });
}

inline void write_csv(std::ostream& os, const KappaMatrix& k, const std::vector<BasisLabel>& basis) {
  write_csv(os, k, label_strings(basis));
}

}  // namespace osf
