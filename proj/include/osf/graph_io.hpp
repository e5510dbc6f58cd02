#pragma once

// Line-oriented graph records:
//
//   # comment
//   node <id> [valence=<v>] [intertwiner=<i>]
//   link <id> <source|-> <target|-> <2j>                 (network)
//   link <id> <source|-> <target|-> <2j_min> <2j_max>    (template)
//
// A '-' endpoint marks a dangling end.

#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "osf/spin_network.hpp"

namespace osf {

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

inline int parse_int(const std::string& s, int line_no) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw GraphError("line " + std::to_string(line_no) + ": expected integer, got '" + s + "'");
}

inline std::optional<NodeId> parse_end(const std::string& s, int line_no) {
  if (s == "-") return std::nullopt;
  return parse_int(s, line_no);
}

struct ParsedLink {
  LinkId id;
  std::optional<NodeId> source, target;
  std::vector<int> values;
};

template <class OnLink>
SpinNetwork parse_records(std::istream& in, std::size_t values_per_link, OnLink on_link) {
  SpinNetwork net;
  std::vector<ParsedLink> links;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "node") {
      if (tok.size() < 2) throw GraphError("line " + std::to_string(line_no) + ": node record needs an id");
      int valence = 3, intertwiner = 0;
      for (std::size_t i = 2; i < tok.size(); ++i) {
        const auto eq = tok[i].find('=');
        if (eq == std::string::npos) throw GraphError("line " + std::to_string(line_no) + ": bad attribute " + tok[i]);
        const std::string key = tok[i].substr(0, eq);
        const int val = parse_int(tok[i].substr(eq + 1), line_no);
        if (key == "valence") valence = val;
        else if (key == "intertwiner") intertwiner = val;
        else throw GraphError("line " + std::to_string(line_no) + ": unknown attribute " + key);
      }
      net.add_node(parse_int(tok[1], line_no), valence, intertwiner);
    } else if (tok[0] == "link") {
      if (tok.size() != 4 + values_per_link) {
        throw GraphError("line " + std::to_string(line_no) + ": link record needs " +
                         std::to_string(4 + values_per_link) + " fields");
      }
      ParsedLink pl{parse_int(tok[1], line_no), parse_end(tok[2], line_no), parse_end(tok[3], line_no), {}};
      for (std::size_t i = 4; i < tok.size(); ++i) pl.values.push_back(parse_int(tok[i], line_no));
      links.push_back(std::move(pl));
    } else {
      throw GraphError("line " + std::to_string(line_no) + ": unknown record '" + tok[0] + "'");
    }
  }
  // Links may precede the nodes they reference.
  for (const auto& pl : links) on_link(net, pl);
  return net;
}

}  // namespace detail

inline SpinNetwork read_network(std::istream& in) {
  return detail::parse_records(in, 1, [](SpinNetwork& net, const detail::ParsedLink& pl) {
    net.add_link(pl.id, pl.source, pl.target, Spin::from_twice(pl.values[0]));
  });
}

inline SpinNetwork read_network(const std::string& text) {
  std::istringstream is(text);
  return read_network(is);
}

inline NetworkTemplate read_template(std::istream& in) {
  NetworkTemplate t;
  t.topology = detail::parse_records(in, 2, [&](SpinNetwork& net, const detail::ParsedLink& pl) {
    net.add_link(pl.id, pl.source, pl.target, Spin::from_twice(pl.values[0]));
    t.twice_range[pl.id] = {pl.values[0], pl.values[1]};
  });
  t.check();
  return t;
}

inline NetworkTemplate read_template(const std::string& text) {
  std::istringstream is(text);
  return read_template(is);
}

inline void write_network(std::ostream& out, const SpinNetwork& net) {
  auto end = [](const std::optional<NodeId>& n) { return n ? std::to_string(*n) : std::string("-"); };
  for (const auto& n : net.nodes()) {
    out << "node " << n.id;
    if (n.valence != 3) out << " valence=" << n.valence;
    if (n.intertwiner != 0) out << " intertwiner=" << n.intertwiner;
    out << '\n';
  }
  for (const auto& l : net.links()) {
    out << "link " << l.id << ' ' << end(l.source) << ' ' << end(l.target) << ' ' << l.spin.twice() << '\n';
  }
}

}  // namespace osf
