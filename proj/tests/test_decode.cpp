#include "doctest.h"

#include "cycflow/decode.hpp"
#include "cycflow/oracle.hpp"
#include "test_support.hpp"

using namespace cycflow;
using namespace cycflow::testing;

namespace {

Cloud at_angles(std::initializer_list<double> degrees) {
  Cloud c(static_cast<Eigen::Index>(degrees.size()), 2);
  Eigen::Index i = 0;
  for (double d : degrees) {
    const double a = d * std::numbers::pi / 180.0;
    c(i, 0) = std::cos(a);
    c(i, 1) = std::sin(a);
    ++i;
  }
  return c;
}

}  // namespace

TEST_CASE("angular sort") {
  CHECK(sort_by_angle(at_angles({280, 10, 190, 100})) == Order{1, 3, 2, 0});
  CHECK(sort_by_angle(at_angles({0, 359.9, 180})) == Order{0, 2, 1});

  Cloud ties(3, 2);
  ties << 2, 0, 1, 0, 1, 0;
  CHECK(sort_by_angle(ties) == Order{1, 2, 0});

  Cloud shifted = at_angles({280, 10, 190, 100});
  shifted.rowwise() += Eigen::RowVector2d(5.0, 5.0);
  CHECK(angular_order(shifted) == sort_by_angle(at_angles({280, 10, 190, 100})));
}

TEST_CASE("2-opt uncrosses the square") {
  const Instance sq = unit_square();
  const Tour crossed = make_tour(sq, {0, 2, 1, 3}, Provenance::decoded);
  CHECK(crossed.length == doctest::Approx(2.0 + 2.0 * std::sqrt(2.0)));
  for (auto strategy : {TwoOptStrategy::best, TwoOptStrategy::first}) {
    const Tour fixed = two_opt(sq, crossed, {100, strategy});
    CHECK(fixed.length == doctest::Approx(4.0));
    CHECK(is_permutation(fixed.order, 4));
    CHECK(fixed.provenance == Provenance::decoded);
    // Already optimal: nothing moves.
    CHECK(two_opt(sq, fixed, {100, strategy}).order == fixed.order);
  }
}

TEST_CASE("2-opt never worsens and never beats the optimum") {
  Rng rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    const Instance inst = random_instance(9, 17, static_cast<std::uint64_t>(trial));
    const Tour start = make_tour(inst, random_permutation(9, rng), Provenance::decoded);
    const double opt = brute_force_opt(inst).length;
    for (auto strategy : {TwoOptStrategy::best, TwoOptStrategy::first}) {
      const Tour t = two_opt(inst, start, {100, strategy});
      CHECK(t.length <= start.length + 1e-12);
      CHECK(t.length >= opt - 1e-9);
      CHECK(t.length == doctest::Approx(tour_length(inst, t.order)).epsilon(1e-12));
    }
  }
}

TEST_CASE("2-opt pass budget") {
  const Instance inst = random_instance(40, 2, 0);
  Rng rng(4);
  const Tour start = make_tour(inst, random_permutation(40, rng), Provenance::decoded);
  const Tour one = two_opt(inst, start, {1, TwoOptStrategy::best});
  const Tour many = two_opt(inst, start, {1000, TwoOptStrategy::best});
  CHECK(one.length < start.length);
  CHECK(many.length <= one.length);
  CHECK(two_opt(inst, start, {0, TwoOptStrategy::best}).order == start.order);
}

TEST_CASE("zero flow model reduces to angular sort") {
  ModelConfig cfg;
  cfg.dim = 16;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.t_dim = 8;
  const auto p = init_params(cfg);
  for (int trial = 0; trial < 10; ++trial) {
    const Instance inst = random_instance(30, 8, static_cast<std::uint64_t>(trial));
    const auto flow = solve(p, inst, 5, true);
    const auto ang = solve_angular(inst, true);
    CHECK(flow.decoded.order == ang.decoded.order);
    CHECK(flow.tour.order == ang.tour.order);
    CHECK(flow.tour.order == two_opt(inst, make_tour(inst, angular_order(inst.points), Provenance::decoded)).order);
    CHECK(flow.decoded.provenance == Provenance::decoded);
    CHECK(flow.times.total() >= 0.0);
  }
}

TEST_CASE("zero direct model decodes to index order") {
  ModelConfig cfg;
  cfg.dim = 16;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.t_dim = 8;
  const auto p = init_params(cfg);
  const Instance inst = random_instance(12, 1, 0);
  const auto r = solve_direct(p, inst, false);
  Order idx(12);
  for (int i = 0; i < 12; ++i) idx[static_cast<std::size_t>(i)] = i;
  CHECK(r.decoded.order == idx);
  CHECK(r.tour.order == idx);
}

TEST_CASE("convex position is solved by angular sort") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Instance inst = convex_instance(12, rng);
    CHECK(same_cycle(solve_angular(inst, false).tour.order, angular_hull(inst)));
  }
}

TEST_CASE("2-opt reaches the optimum on convex position") {
  Rng rng(10);
  for (int trial = 0; trial < 30; ++trial) {
    const Instance inst = convex_instance(8, rng);
    const Tour start = make_tour(inst, random_permutation(8, rng), Provenance::decoded);
    const double opt = brute_force_opt(inst).length;
    CHECK(two_opt(inst, start).length == doctest::Approx(opt).epsilon(1e-12));
    CHECK(two_opt(inst, start, {100, TwoOptStrategy::first}).length == doctest::Approx(opt).epsilon(1e-12));
  }
}
