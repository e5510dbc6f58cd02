#pragma once

// Spin-network graphs: labeled links, trivalent admissibility, cuts into a
// sub-network and its complement, gluing (the union map), random labelings.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "osf/error.hpp"
#include "osf/spin.hpp"

namespace osf {

using NodeId = int;
using LinkId = int;

struct Node {
  NodeId id = 0;
  int valence = 3;
  /// Opaque intertwiner index; trivial for trivalent nodes.
  int intertwiner = 0;

  auto operator<=>(const Node&) const = default;
};

/// Oriented link; a missing endpoint makes it dangling.
struct Link {
  LinkId id = 0;
  std::optional<NodeId> source;
  std::optional<NodeId> target;
  Spin spin;

  bool dangling() const noexcept { return !source || !target; }
  auto operator<=>(const Link&) const = default;
};

class SpinNetwork {
 public:
  SpinNetwork() = default;

  NodeId add_node(NodeId id, int valence = 3, int intertwiner = 0) {
    if (find_node(id)) throw GraphError("duplicate node id " + std::to_string(id));
    if (valence < 1) throw GraphError("node " + std::to_string(id) + " has valence < 1");
    nodes_.push_back(Node{id, valence, intertwiner});
    return id;
  }

  NodeId add_node() { return add_node(next_node_id()); }

  LinkId add_link(LinkId id, std::optional<NodeId> source, std::optional<NodeId> target, Spin spin) {
    if (find_link(id)) throw GraphError("duplicate link id " + std::to_string(id));
    for (auto end : {source, target}) {
      if (end && !find_node(*end)) {
        throw GraphError("link " + std::to_string(id) + " references unknown node " + std::to_string(*end));
      }
    }
    links_.push_back(Link{id, source, target, spin});
    return id;
  }

  LinkId add_link(std::optional<NodeId> source, std::optional<NodeId> target, Spin spin) {
    return add_link(next_link_id(), source, target, spin);
  }

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<Link>& links() const noexcept { return links_; }
  bool empty() const noexcept { return nodes_.empty() && links_.empty(); }

  const Node* find_node(NodeId id) const {
    for (const auto& n : nodes_)
      if (n.id == id) return &n;
    return nullptr;
  }
  const Link* find_link(LinkId id) const {
    for (const auto& l : links_)
      if (l.id == id) return &l;
    return nullptr;
  }

  void set_spin(LinkId id, Spin spin) {
    for (auto& l : links_) {
      if (l.id == id) {
        l.spin = spin;
        return;
      }
    }
    throw GraphError("unknown link id " + std::to_string(id));
  }

  /// Link ends incident to a node; a self-loop contributes twice.
  std::vector<LinkId> incident(NodeId node) const {
    std::vector<LinkId> out;
    for (const auto& l : links_) {
      if (l.source == node) out.push_back(l.id);
      if (l.target == node) out.push_back(l.id);
    }
    return out;
  }

  NodeId next_node_id() const {
    NodeId m = -1;
    for (const auto& n : nodes_) m = std::max(m, n.id);
    return m + 1;
  }
  LinkId next_link_id() const {
    LinkId m = -1;
    for (const auto& l : links_) m = std::max(m, l.id);
    return m + 1;
  }

  /// Order-insensitive equality.
  friend bool operator==(const SpinNetwork& a, const SpinNetwork& b) {
    auto na = a.nodes_, nb = b.nodes_;
    auto la = a.links_, lb = b.links_;
    std::sort(na.begin(), na.end());
    std::sort(nb.begin(), nb.end());
    std::sort(la.begin(), la.end());
    std::sort(lb.begin(), lb.end());
    return na == nb && la == lb;
  }

 private:
  std::vector<Node> nodes_;
  std::vector<Link> links_;
};

struct Diagnostic {
  NodeId node;
  std::string message;
};

struct Validation {
  std::vector<Diagnostic> diagnostics;
  bool ok() const noexcept { return diagnostics.empty(); }
  explicit operator bool() const noexcept { return ok(); }
};

/// Checks node valences and, for trivalent nodes, the triangle rule on the
/// incident spins. Nodes with fewer incident ends than their valence are
/// reported unless `allow_open_nodes` (used for cut pieces).
inline Validation validate(const SpinNetwork& net, bool allow_open_nodes = false) {
  Validation v;
  for (const auto& n : net.nodes()) {
    const auto inc = net.incident(n.id);
    const int count = static_cast<int>(inc.size());
    if (count > n.valence || (count < n.valence && !allow_open_nodes)) {
      v.diagnostics.push_back({n.id, "node " + std::to_string(n.id) + " has " + std::to_string(count) +
                                         " incident link ends, valence " + std::to_string(n.valence)});
      continue;
    }
    if (n.valence != 3 || count != 3) continue;
    const Spin a = net.find_link(inc[0])->spin;
    const Spin b = net.find_link(inc[1])->spin;
    const Spin c = net.find_link(inc[2])->spin;
    if (!triangle_ok(a, b, c)) {
      v.diagnostics.push_back({n.id, "node " + std::to_string(n.id) + " spins (" + a.str() + ", " + b.str() +
                                         ", " + c.str() + ") violate the triangle rule"});
    }
  }
  return v;
}

/// Connected piece of a network. Links cut out of the parent are kept as
/// dangling links and listed in `boundary`; `parent_link` records which parent
/// link each boundary entry came from when the piece was produced by a cut.
struct SubSpinNetwork {
  struct BoundaryEnd {
    LinkId link;                        // dangling link in `network`
    std::optional<LinkId> parent_link;  // provenance
  };

  SpinNetwork network;
  std::vector<BoundaryEnd> boundary;

  bool has_provenance() const {
    return std::all_of(boundary.begin(), boundary.end(), [](const auto& b) { return b.parent_link.has_value(); });
  }
};

namespace detail {

inline std::vector<std::set<NodeId>> components(const SpinNetwork& net, const std::set<NodeId>& nodes) {
  std::map<NodeId, NodeId> parent;
  for (NodeId n : nodes) parent[n] = n;
  auto find = [&](NodeId x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& l : net.links()) {
    if (l.source && l.target && nodes.count(*l.source) && nodes.count(*l.target)) {
      parent[find(*l.source)] = find(*l.target);
    }
  }
  std::map<NodeId, std::set<NodeId>> groups;
  for (NodeId n : nodes) groups[find(n)].insert(n);
  std::vector<std::set<NodeId>> out;
  for (auto& [root, g] : groups) out.push_back(std::move(g));
  return out;
}

inline std::string describe(const std::set<NodeId>& s) {
  std::string r = "{";
  bool first = true;
  for (NodeId n : s) {
    r += (first ? "" : ",") + std::to_string(n);
    first = false;
  }
  return r + "}";
}

inline SubSpinNetwork restrict_to(const SpinNetwork& net, const std::set<NodeId>& keep) {
  SubSpinNetwork part;
  for (const auto& n : net.nodes()) {
    if (keep.count(n.id)) part.network.add_node(n.id, n.valence, n.intertwiner);
  }
  for (const auto& l : net.links()) {
    const bool s_in = l.source && keep.count(*l.source);
    const bool t_in = l.target && keep.count(*l.target);
    const bool s_out = l.source && !keep.count(*l.source);
    const bool t_out = l.target && !keep.count(*l.target);
    if (!s_in && !t_in) continue;
    if (s_out || t_out) {
      part.network.add_link(l.id, s_in ? l.source : std::nullopt, t_in ? l.target : std::nullopt, l.spin);
      part.boundary.push_back({l.id, l.id});
    } else {
      part.network.add_link(l.id, l.source, l.target, l.spin);
    }
  }
  return part;
}

}  // namespace detail

/// Cuts `net` into the connected piece spanned by `node_subset` and its
/// complement. Links crossing the cut become dangling on both sides.
inline std::pair<SubSpinNetwork, SubSpinNetwork> extract_sub(const SpinNetwork& net,
                                                             const std::set<NodeId>& node_subset) {
  if (node_subset.empty()) throw GraphError("empty node subset");
  for (NodeId n : node_subset) {
    if (!net.find_node(n)) throw GraphError("node " + std::to_string(n) + " not in network");
  }
  const auto comps = detail::components(net, node_subset);
  if (comps.size() > 1) {
    std::string msg = "node subset is disconnected; components:";
    for (const auto& c : comps) msg += " " + detail::describe(c);
    throw GraphError(msg);
  }
  std::set<NodeId> rest;
  for (const auto& n : net.nodes()) {
    if (!node_subset.count(n.id)) rest.insert(n.id);
  }
  auto inside = detail::restrict_to(net, node_subset);
  auto outside = detail::restrict_to(net, rest);
  // Parent-dangling links with no endpoint in either set cannot exist, but a
  // fully detached link (no endpoints at all) would be lost; keep it outside.
  for (const auto& l : net.links()) {
    if (!l.source && !l.target) outside.network.add_link(l.id, std::nullopt, std::nullopt, l.spin);
  }
  return {std::move(inside), std::move(outside)};
}

/// Result of gluing: a network, or the weight-0 element.
struct GlueResult {
  std::optional<SpinNetwork> network;
  std::string zero_reason;

  bool is_zero() const noexcept { return !network.has_value(); }
  static GlueResult zero(std::string why) { return GlueResult{std::nullopt, std::move(why)}; }
};

/// Explicit pairing of boundary entries (index into a.boundary, index into b.boundary).
using BoundaryPairing = std::vector<std::pair<std::size_t, std::size_t>>;

/// Union map. Boundaries are paired by provenance, or by `pairing` when given.
/// Incompatible spins, unmatched ends, or an inadmissible glued node give ZERO.
inline GlueResult glue(const SubSpinNetwork& a, const SubSpinNetwork& b,
                       std::optional<BoundaryPairing> pairing = std::nullopt) {
  const bool any_boundary = !a.boundary.empty() || !b.boundary.empty();
  BoundaryPairing pairs;
  const bool by_provenance = !pairing && a.has_provenance() && b.has_provenance();
  if (pairing) {
    pairs = *pairing;
  } else if (by_provenance) {
    for (std::size_t i = 0; i < a.boundary.size(); ++i) {
      for (std::size_t k = 0; k < b.boundary.size(); ++k) {
        if (a.boundary[i].parent_link == b.boundary[k].parent_link) pairs.emplace_back(i, k);
      }
    }
  } else if (any_boundary) {
    throw GraphError("ambiguous gluing: boundaries carry no provenance and no pairing was given");
  }

  // One-to-one coverage of both boundaries.
  std::vector<int> used_a(a.boundary.size(), 0), used_b(b.boundary.size(), 0);
  for (auto [i, k] : pairs) {
    if (i >= a.boundary.size() || k >= b.boundary.size()) throw GraphError("pairing index out of range");
    ++used_a[i];
    ++used_b[k];
  }
  for (int u : used_a)
    if (u != 1) return GlueResult::zero("boundary ends do not match one-to-one");
  for (int u : used_b)
    if (u != 1) return GlueResult::zero("boundary ends do not match one-to-one");

  // Node and link ids of b are kept under provenance, shifted otherwise.
  const NodeId node_shift = by_provenance ? 0 : a.network.next_node_id();
  const LinkId link_shift = by_provenance ? 0 : a.network.next_link_id();

  std::set<LinkId> a_cut, b_cut;
  for (const auto& e : a.boundary) a_cut.insert(e.link);
  for (const auto& e : b.boundary) b_cut.insert(e.link);

  SpinNetwork out;
  for (const auto& n : a.network.nodes()) out.add_node(n.id, n.valence, n.intertwiner);
  for (const auto& n : b.network.nodes()) {
    if (out.find_node(n.id + node_shift)) throw GraphError("node id collision while gluing");
    out.add_node(n.id + node_shift, n.valence, n.intertwiner);
  }
  auto shifted = [&](std::optional<NodeId> n) { return n ? std::optional<NodeId>(*n + node_shift) : n; };
  for (const auto& l : a.network.links()) {
    if (!a_cut.count(l.id)) out.add_link(l.id, l.source, l.target, l.spin);
  }
  for (const auto& l : b.network.links()) {
    if (!b_cut.count(l.id)) out.add_link(l.id + link_shift, shifted(l.source), shifted(l.target), l.spin);
  }
  for (auto [i, k] : pairs) {
    const Link& la = *a.network.find_link(a.boundary[i].link);
    const Link& lb = *b.network.find_link(b.boundary[k].link);
    if (la.spin != lb.spin) {
      return GlueResult::zero("boundary spins " + la.spin.str() + " and " + lb.spin.str() + " differ");
    }
    if (la.source.has_value() == la.target.has_value() || lb.source.has_value() == lb.target.has_value()) {
      throw GraphError("boundary link must have exactly one attached end");
    }
    const NodeId na = la.source ? *la.source : *la.target;
    const NodeId nb = *shifted(lb.source ? lb.source : lb.target);
    // Opposite roles keep the orientation; equal roles flip b's end.
    const bool a_is_source = la.source.has_value();
    const std::optional<NodeId> src = a_is_source ? na : nb;
    const std::optional<NodeId> tgt = a_is_source ? nb : na;
    const LinkId id = a.boundary[i].parent_link && by_provenance ? *a.boundary[i].parent_link : la.id;
    if (out.find_link(id)) throw GraphError("link id collision while gluing");
    out.add_link(id, src, tgt, la.spin);
  }
  const auto v = validate(out, true);
  if (!v.ok()) return GlueResult::zero(v.diagnostics.front().message);
  return GlueResult{std::move(out), {}};
}

/// Topology with a spin range (doubled labels, step 1/2) per link.
struct NetworkTemplate {
  SpinNetwork topology;
  std::map<LinkId, std::pair<int, int>> twice_range;

  void check() const {
    for (const auto& l : topology.links()) {
      auto it = twice_range.find(l.id);
      if (it == twice_range.end()) throw GraphError("link " + std::to_string(l.id) + " has no spin range");
      if (it->second.first < 0 || it->second.first > it->second.second) {
        throw GraphError("link " + std::to_string(l.id) + " has an empty spin range");
      }
    }
  }
};

/// Uniform link labels, resampled around inadmissible nodes until the whole
/// network validates. Deterministic in `seed`.
inline SpinNetwork random_network(const NetworkTemplate& tmpl, std::uint64_t seed, int max_retries = 10000) {
  tmpl.check();
  std::mt19937_64 rng(seed);
  SpinNetwork net = tmpl.topology;
  auto draw = [&](LinkId id) {
    const auto [lo, hi] = tmpl.twice_range.at(id);
    std::uniform_int_distribution<int> d(lo, hi);
    net.set_spin(id, Spin::from_twice(d(rng)));
  };
  for (const auto& l : tmpl.topology.links()) draw(l.id);
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    const auto v = validate(net, true);
    if (v.ok()) return net;
    // Redraw one link at a randomly chosen offending node.
    std::uniform_int_distribution<std::size_t> pick_node(0, v.diagnostics.size() - 1);
    const auto inc = net.incident(v.diagnostics[pick_node(rng)].node);
    if (inc.empty()) break;
    std::uniform_int_distribution<std::size_t> pick_link(0, inc.size() - 1);
    draw(inc[pick_link(rng)]);
  }
  throw GraphError("random_network: retry budget of " + std::to_string(max_retries) +
                   " exhausted; template admits too few admissible labelings");
}

}  // namespace osf
