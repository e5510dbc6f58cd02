#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "osf/error.hpp"

namespace osf {

/// SU(2) representation label stored as 2j so half-integers stay exact.
class Spin {
 public:
  constexpr Spin() = default;

  static constexpr Spin from_twice(int twice_j) {
    if (twice_j < 0) throw DomainError("spin label must be non-negative");
    Spin s;
    s.twice_ = twice_j;
    return s;
  }

  /// Accepts "3/2", "1", "1.5" or "0.5".
  static Spin parse(std::string_view text);

  constexpr int twice() const noexcept { return twice_; }
  constexpr double value() const noexcept { return 0.5 * twice_; }
  constexpr bool is_integer() const noexcept { return twice_ % 2 == 0; }

  /// j(j+1), exact in double for any realistic label.
  constexpr double casimir() const noexcept { return value() * (value() + 1.0); }

  std::string str() const {
    if (twice_ % 2 == 0) return std::to_string(twice_ / 2);
    return std::to_string(twice_) + "/2";
  }

  constexpr auto operator<=>(const Spin&) const = default;

 private:
  int twice_ = 0;
};

namespace literals {
/// 3_2j == Spin::from_twice(3), i.e. j = 3/2.
constexpr Spin operator""_2j(unsigned long long twice_j) {
  return Spin::from_twice(static_cast<int>(twice_j));
}
}  // namespace literals

/// |a-b| <= c <= a+b and a+b+c integer.
constexpr bool triangle_ok(Spin a, Spin b, Spin c) noexcept {
  const int x = a.twice(), y = b.twice(), z = c.twice();
  if ((x + y + z) % 2 != 0) return false;
  const int lo = x > y ? x - y : y - x;
  return lo <= z && z <= x + y;
}

inline Spin Spin::parse(std::string_view text) {
  auto fail = [&] { return DomainError("cannot parse spin label '" + std::string(text) + "'"); };
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text.empty()) throw fail();
  const auto slash = text.find('/');
  try {
    if (slash != std::string_view::npos) {
      if (text.substr(slash + 1) != "2") throw fail();
      const int num = std::stoi(std::string(text.substr(0, slash)));
      return from_twice(num);
    }
    const std::string s(text);
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw fail();
    const double twice = 2.0 * v;
    const long rounded = static_cast<long>(twice + 0.5);
    if (twice < 0 || std::abs(twice - static_cast<double>(rounded)) > 1e-9) throw fail();
    return from_twice(static_cast<int>(rounded));
  } catch (const std::invalid_argument&) {
    throw fail();
  } catch (const std::out_of_range&) {
    throw fail();
  }
}

}  // namespace osf

template <>
struct std::hash<osf::Spin> {
  std::size_t operator()(const osf::Spin& s) const noexcept { return std::hash<int>{}(s.twice()); }
};
