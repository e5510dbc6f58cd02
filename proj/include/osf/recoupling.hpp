#pragma once

// Wigner 6j symbols evaluated exactly (big-integer Racah single sum over a
// prime-factorized factorial table) and memoized under a canonical key.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "osf/error.hpp"
#include "osf/spin.hpp"

namespace osf {

/// Six labels of {j1 j2 j3; j4 j5 j6} reduced to a representative of the
/// 24-element classical symmetry group (column permutations and upper/lower
/// exchange in two columns). Stored as doubled integers.
struct SixJKey {
  std::array<int, 6> twice{};

  static SixJKey canonical(const std::array<Spin, 6>& j) {
    std::array<int, 6> raw{};
    for (std::size_t i = 0; i < 6; ++i) raw[i] = j[i].twice();
    return canonical(raw);
  }

  static SixJKey canonical(const std::array<int, 6>& raw) {
    // Columns are (0,3), (1,4), (2,5).
    static constexpr std::array<std::array<int, 3>, 6> perms{{
        {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    // Which columns get their rows swapped: none, or exactly two.
    static constexpr std::array<std::array<bool, 3>, 4> flips{{
        {false, false, false}, {true, true, false}, {true, false, true}, {false, true, true}}};
    std::array<int, 6> best{};
    bool first = true;
    for (const auto& p : perms) {
      for (const auto& f : flips) {
        std::array<int, 6> cand{};
        for (int c = 0; c < 3; ++c) {
          const int col = p[static_cast<std::size_t>(c)];
          int up = raw[static_cast<std::size_t>(col)];
          int lo = raw[static_cast<std::size_t>(col + 3)];
          if (f[static_cast<std::size_t>(c)]) std::swap(up, lo);
          cand[static_cast<std::size_t>(c)] = up;
          cand[static_cast<std::size_t>(c + 3)] = lo;
        }
        if (first || cand < best) {
          best = cand;
          first = false;
        }
      }
    }
    return SixJKey{best};
  }

  bool operator==(const SixJKey&) const = default;
};

struct SixJKeyHash {
  std::size_t operator()(const SixJKey& k) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (int v : k.twice) {
      h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
  }
};

namespace detail {

/// n! for n <= limit, stored as exponent vectors over the primes <= limit.
class PrimeFactorials {
 public:
  explicit PrimeFactorials(int limit) : limit_(limit) {
    std::vector<bool> sieve(static_cast<std::size_t>(limit + 1), true);
    for (int p = 2; p <= limit; ++p) {
      if (!sieve[static_cast<std::size_t>(p)]) continue;
      primes_.push_back(p);
      for (int q = 2 * p; q <= limit; q += p) sieve[static_cast<std::size_t>(q)] = false;
    }
    table_.resize(static_cast<std::size_t>(limit + 1), std::vector<int>(primes_.size(), 0));
    for (int n = 2; n <= limit; ++n) {
      auto& row = table_[static_cast<std::size_t>(n)];
      row = table_[static_cast<std::size_t>(n - 1)];
      int m = n;
      for (std::size_t i = 0; i < primes_.size() && m > 1; ++i) {
        while (m % primes_[i] == 0) {
          ++row[i];
          m /= primes_[i];
        }
      }
    }
  }

  int limit() const noexcept { return limit_; }
  std::size_t size() const noexcept { return primes_.size(); }
  int prime(std::size_t i) const noexcept { return primes_[i]; }
  const std::vector<int>& factorial(int n) const { return table_.at(static_cast<std::size_t>(n)); }

 private:
  int limit_;
  std::vector<int> primes_;
  std::vector<std::vector<int>> table_;
};

}  // namespace detail

/// Memoizing 6j evaluator. Labels up to `max_twice_j` (2j_max) are supported;
/// larger ones raise CapacityError.
class SixJTable {
 public:
  explicit SixJTable(int max_twice_j = 40)
      : max_twice_(max_twice_j), factorials_(2 * max_twice_j + 2) {
    if (max_twice_j < 0) throw DomainError("2j_max must be non-negative");
  }

  int max_twice_j() const noexcept { return max_twice_; }

  /// {j1 j2 j3; j4 j5 j6}; zero when any triad is inadmissible.
  double operator()(const std::array<Spin, 6>& j) const {
    if (!admissible(j)) return 0.0;
    const SixJKey key = SixJKey::canonical(j);
    {
      std::shared_lock lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    const double v = evaluate_exact(key);
    std::unique_lock lock(mutex_);
    cache_.emplace(key, v);
    return v;
  }

  double operator()(Spin j1, Spin j2, Spin j3, Spin j4, Spin j5, Spin j6) const {
    return (*this)(std::array<Spin, 6>{j1, j2, j3, j4, j5, j6});
  }

  /// Same value without touching the cache.
  double uncached(const std::array<Spin, 6>& j) const {
    if (!admissible(j)) return 0.0;
    return evaluate_exact(SixJKey::canonical(j));
  }

  std::size_t cache_size() const {
    std::shared_lock lock(mutex_);
    return cache_.size();
  }

  void clear_cache() {
    std::unique_lock lock(mutex_);
    cache_.clear();
  }

  static bool admissible(const std::array<Spin, 6>& j) {
    return triangle_ok(j[0], j[1], j[2]) && triangle_ok(j[0], j[4], j[5]) &&
           triangle_ok(j[3], j[1], j[5]) && triangle_ok(j[3], j[4], j[2]);
  }

 private:
  using BigInt = boost::multiprecision::cpp_int;
  using BigFloat = boost::multiprecision::cpp_bin_float_50;

  double evaluate_exact(const SixJKey& key) const {
    const auto& t = key.twice;
    for (int v : t) {
      if (v > max_twice_) {
        std::string msg = "6j labels exceed 2j_max=" + std::to_string(max_twice_) + ": {";
        for (std::size_t i = 0; i < 6; ++i) {
          msg += Spin::from_twice(t[i]).str();
          msg += (i == 2 ? "; " : (i == 5 ? "}" : " "));
        }
        throw CapacityError(msg);
      }
    }
    // All quantities below are integers once doubled labels are halved.
    const std::array<int, 4> a{(t[0] + t[1] + t[2]) / 2, (t[0] + t[4] + t[5]) / 2,
                               (t[3] + t[1] + t[5]) / 2, (t[3] + t[4] + t[2]) / 2};
    const std::array<int, 3> b{(t[0] + t[1] + t[3] + t[4]) / 2, (t[1] + t[2] + t[4] + t[5]) / 2,
                               (t[2] + t[0] + t[5] + t[3]) / 2};
    const std::size_t np = factorials_.size();
    std::vector<int> prefactor(np, 0);
    auto add = [&](std::vector<int>& acc, int n, int sign) {
      const auto& f = factorials_.factorial(n);
      for (std::size_t i = 0; i < np; ++i) acc[i] += sign * f[i];
    };
    // Squared triangle coefficients.
    const std::array<std::array<int, 3>, 4> triads{{{t[0], t[1], t[2]}, {t[0], t[4], t[5]},
                                                   {t[3], t[1], t[5]}, {t[3], t[4], t[2]}}};
    for (const auto& tr : triads) {
      add(prefactor, (tr[0] + tr[1] - tr[2]) / 2, +1);
      add(prefactor, (tr[0] - tr[1] + tr[2]) / 2, +1);
      add(prefactor, (-tr[0] + tr[1] + tr[2]) / 2, +1);
      add(prefactor, (tr[0] + tr[1] + tr[2]) / 2 + 1, -1);
    }

    const int tmin = *std::max_element(a.begin(), a.end());
    const int tmax = *std::min_element(b.begin(), b.end());
    std::vector<std::vector<int>> terms;
    for (int s = tmin; s <= tmax; ++s) {
      std::vector<int> e(np, 0);
      add(e, s + 1, +1);
      for (int ai : a) add(e, s - ai, -1);
      for (int bi : b) add(e, bi - s, -1);
      terms.push_back(std::move(e));
    }
    std::vector<int> common = terms.front();
    for (const auto& e : terms) {
      for (std::size_t i = 0; i < np; ++i) common[i] = std::min(common[i], e[i]);
    }
    BigInt sum = 0;
    for (std::size_t k = 0; k < terms.size(); ++k) {
      BigInt term = 1;
      for (std::size_t i = 0; i < np; ++i) {
        const int ex = terms[k][i] - common[i];
        if (ex > 0) term *= boost::multiprecision::pow(BigInt(factorials_.prime(i)), static_cast<unsigned>(ex));
      }
      if ((tmin + static_cast<int>(k)) % 2 == 0) sum += term;
      else sum -= term;
    }
    if (sum == 0) return 0.0;
    const int sign = sum < 0 ? -1 : 1;
    // value^2 = sum^2 * prod p^(prefactor + 2*common)
    BigInt num = sum * sum;
    BigInt den = 1;
    for (std::size_t i = 0; i < np; ++i) {
      const int ex = prefactor[i] + 2 * common[i];
      const BigInt p = factorials_.prime(i);
      if (ex > 0) num *= boost::multiprecision::pow(p, static_cast<unsigned>(ex));
      else if (ex < 0) den *= boost::multiprecision::pow(p, static_cast<unsigned>(-ex));
    }
    const BigFloat ratio = BigFloat(num) / BigFloat(den);
    return sign * static_cast<double>(boost::multiprecision::sqrt(ratio));
  }

  int max_twice_;
  detail::PrimeFactorials factorials_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<SixJKey, double, SixJKeyHash> cache_;
};

/// Process-wide table used by the free functions and the amplitude backend.
inline SixJTable& default_sixj_table() {
  static SixJTable table;
  return table;
}

inline double wigner6j(Spin j1, Spin j2, Spin j3, Spin j4, Spin j5, Spin j6) {
  return default_sixj_table()(j1, j2, j3, j4, j5, j6);
}

inline double wigner6j(const std::array<Spin, 6>& j) { return default_sixj_table()(j); }

}  // namespace osf
