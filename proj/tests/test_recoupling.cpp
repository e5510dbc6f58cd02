#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"
#include "osf/recoupling.hpp"

using namespace osf;
using namespace osf::literals;

namespace {

std::array<Spin, 6> spins(std::array<int, 6> tw) {
  std::array<Spin, 6> s;
  for (std::size_t i = 0; i < 6; ++i) s[i] = Spin::from_twice(tw[i]);
  return s;
}

/// Draws admissible {a b c; d e f} with all 2j <= max_twice.
std::array<int, 6> random_admissible(std::mt19937_64& rng, int max_twice) {
  std::uniform_int_distribution<int> pick(0, max_twice);
  for (;;) {
    std::array<int, 6> t{};
    for (auto& v : t) v = pick(rng);
    if (SixJTable::admissible(spins(t))) return t;
  }
}

}  // namespace

TEST_CASE("triangle rule", "[recoupling]") {
  CHECK(triangle_ok(1_2j, 1_2j, 2_2j));
  CHECK_FALSE(triangle_ok(1_2j, 1_2j, 1_2j));
  CHECK_FALSE(triangle_ok(2_2j, 2_2j, 6_2j));
  CHECK(triangle_ok(0_2j, 3_2j, 3_2j));
}

TEST_CASE("spin parsing", "[recoupling]") {
  CHECK(Spin::parse("3/2") == 3_2j);
  CHECK(Spin::parse("2") == 4_2j);
  CHECK(Spin::parse("0.5") == 1_2j);
  CHECK(Spin::parse("3/2").str() == "3/2");
  CHECK_THROWS_AS(Spin::parse("1/3"), DomainError);
  CHECK_THROWS_AS(Spin::parse("0.3"), DomainError);
  CHECK_THROWS_AS(Spin::parse("-1"), DomainError);
}

TEST_CASE("6j closed forms and oracle", "[recoupling]") {
  SixJTable table;
  // {a b c; 0 c b} = (-1)^(a+b+c) / sqrt((2b+1)(2c+1)); here a=b=c=1.
  const double one_zero = table(2_2j, 2_2j, 2_2j, 0_2j, 2_2j, 2_2j);
  CHECK(one_zero == Catch::Approx(-1.0 / 3.0).epsilon(1e-15));
  CHECK(test::racah_6j({2, 2, 2, 0, 2, 2}) == Catch::Approx(-1.0 / 3.0).epsilon(1e-15));

  CHECK(table(2_2j, 2_2j, 6_2j, 2_2j, 2_2j, 2_2j) == 0.0);

  // Frozen from the oracle: {1 1 1; 1 1 1} = 1/6.
  const double oracle = test::racah_6j({2, 2, 2, 2, 2, 2});
  CHECK(oracle == Catch::Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK(table(2_2j, 2_2j, 2_2j, 2_2j, 2_2j, 2_2j) == Catch::Approx(oracle).epsilon(1e-15));

  std::mt19937_64 rng(7);
  for (int i = 0; i < 300; ++i) {
    const auto t = random_admissible(rng, 12);
    const double ref = test::racah_6j(t);
    CHECK(table(spins(t)) == Catch::Approx(ref).epsilon(1e-14).margin(1e-16));
  }
}

TEST_CASE("6j symmetries are exact", "[recoupling]") {
  SixJTable table;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto t = random_admissible(rng, 10);
    const double v = table(spins(t));
    std::array<int, 3> cols{0, 1, 2};
    do {
      std::array<int, 6> p{t[cols[0]], t[cols[1]], t[cols[2]],
                           t[cols[0] + 3], t[cols[1] + 3], t[cols[2] + 3]};
      CHECK(table(spins(p)) == v);
      // upper/lower exchange in columns (0,1), (0,2), (1,2)
      for (auto [x, y] : {std::pair{0, 1}, std::pair{0, 2}, std::pair{1, 2}}) {
        auto q = p;
        std::swap(q[x], q[x + 3]);
        std::swap(q[y], q[y + 3]);
        CHECK(table(spins(q)) == v);
      }
    } while (std::next_permutation(cols.begin(), cols.end()));
  }
}

TEST_CASE("6j key canonicalization is idempotent", "[recoupling]") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto t = random_admissible(rng, 8);
    const auto k = SixJKey::canonical(t);
    CHECK(SixJKey::canonical(k.twice) == k);
  }
}

TEST_CASE("6j cache is transparent", "[recoupling]") {
  SixJTable table;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto s = spins(random_admissible(rng, 10));
    const double cold = table.uncached(s);
    const double first = table(s);
    const double warm = table(s);
    CHECK(cold == first);
    CHECK(first == warm);
  }
  CHECK(table.cache_size() > 0);
}

TEST_CASE("6j capacity error names the spins", "[recoupling]") {
  SixJTable small(8);
  CHECK_THROWS_AS(small(10_2j, 10_2j, 10_2j, 10_2j, 10_2j, 10_2j), CapacityError);
  CHECK_THROWS_WITH(small(10_2j, 10_2j, 10_2j, 10_2j, 10_2j, 10_2j),
                    Catch::Matchers::ContainsSubstring("{5 5 5; 5 5 5}"));
  // Inadmissible labels vanish before any capacity check.
  CHECK(small(10_2j, 10_2j, 30_2j, 10_2j, 10_2j, 10_2j) == 0.0);
}

TEST_CASE("6j orthogonality", "[recoupling]") {
  SixJTable table;
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> pick(0, 12);
  int checked = 0;
  while (checked < 200) {
    const int a = pick(rng), b = pick(rng), c = pick(rng), d = pick(rng), p = pick(rng), q = pick(rng);
    if (!triangle_ok(Spin::from_twice(a), Spin::from_twice(d), Spin::from_twice(p)) ||
        !triangle_ok(Spin::from_twice(c), Spin::from_twice(b), Spin::from_twice(p)) ||
        !triangle_ok(Spin::from_twice(a), Spin::from_twice(d), Spin::from_twice(q)) ||
        !triangle_ok(Spin::from_twice(c), Spin::from_twice(b), Spin::from_twice(q)))
      continue;
    double sum = 0.0;
    for (int x = 0; x <= 24; ++x) {
      const double w = (x + 1) * (p + 1);
      sum += w * table(spins({a, b, x, c, d, p})) * table(spins({a, b, x, c, d, q}));
    }
    CHECK(std::abs(sum - (p == q ? 1.0 : 0.0)) < 1e-10);
    ++checked;
  }
}
