#include "doctest.h"

#include "cycflow/errors.hpp"
#include "cycflow/oracle.hpp"
#include "test_support.hpp"

#include <numeric>

using namespace cycflow;
using namespace cycflow::testing;

TEST_CASE("brute force on small instances") {
  CHECK(brute_force_opt(unit_square()).length == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(brute_force_opt(unit_square()).provenance == Provenance::exact);

  const Instance tri = random_instance(3, 5, 0);
  const double len = brute_force_opt(tri).length;
  Order p{0, 1, 2};
  do {
    CHECK(tour_length(tri, p) == doctest::Approx(len).epsilon(1e-14));
  } while (std::next_permutation(p.begin(), p.end()));

  CHECK_THROWS_AS(brute_force_opt(random_instance(11, 0, 0)), SizeLimitError);
}

TEST_CASE("brute force beats every enumerated cycle at n = 8") {
  const Instance inst = random_instance(8, 123, 0);
  const double best = brute_force_opt(inst).length;
  Order p(8);
  std::iota(p.begin(), p.end(), 0);
  do {
    REQUIRE(best <= tour_length(inst, p) + 1e-12);
  } while (std::next_permutation(p.begin(), p.end()));
}

TEST_CASE("Held-Karp matches brute force") {
  CHECK(held_karp(unit_square()).length == doctest::Approx(4.0).epsilon(1e-15));
  for (std::uint64_t k = 0; k < 100; ++k) {
    const Instance inst = random_instance(9, 2024, k);
    const Tour hk = held_karp(inst);
    CHECK(is_permutation(hk.order, 9));
    CHECK(std::abs(hk.length - tour_length(inst, hk.order)) <= 1e-12);
    REQUIRE(std::abs(hk.length - brute_force_opt(inst).length) <= 1e-9);
  }
}

TEST_CASE("Held-Karp finds the hull order on a regular polygon") {
  const Instance poly = regular_polygon(15);
  Order expected(15);
  std::iota(expected.begin(), expected.end(), 0);
  CHECK(same_cycle(held_karp(poly).order, expected));
}

TEST_CASE("Held-Karp enforces its size limit") {
  CHECK_THROWS_AS(held_karp(random_instance(kHeldKarpMaxNodes + 1, 0, 0)), SizeLimitError);
}

TEST_CASE("heuristic labels") {
  CHECK(heuristic_label(unit_square(), 0).length == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(heuristic_label(unit_square(), 0).provenance == Provenance::heuristic);
  CHECK_THROWS_AS(heuristic_label(random_instance(3, 0, 0), 0), InvalidArgument);

  SUBCASE("within 5% of optimal on 95% of n = 9 instances, never below it") {
    int within = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      const Instance inst = random_instance(9, seed, 0);
      const Tour h = heuristic_label(inst, seed);
      const double opt = held_karp(inst).length;
      REQUIRE(h.length >= opt - 1e-9);
      REQUIRE(is_permutation(h.order, 9));
      if (gap_percent(h.length, opt) <= 5.0) ++within;
    }
    CHECK(within >= 950);
  }

  SUBCASE("convex position gives the hull tour") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      const Instance inst = convex_instance(12 + trial, rng);
      const Tour h = heuristic_label(inst, 1);
      const Order hull = angular_hull(inst);
      CHECK(h.length == doctest::Approx(tour_length(inst, hull)).epsilon(1e-12));
    }
  }

  SUBCASE("deterministic, and kicks never hurt") {
    const Instance inst = random_instance(40, 9, 0);
    CHECK(heuristic_label(inst, 5).order == heuristic_label(inst, 5).order);
    CHECK(heuristic_label(inst, 5, {20}).length <= heuristic_label(inst, 5).length);
  }
}
