#include "doctest.h"

#include "cycflow/coupling.hpp"
#include "cycflow/decode.hpp"
#include "cycflow/errors.hpp"
#include "cycflow/oracle.hpp"
#include "test_support.hpp"

using namespace cycflow;
using namespace cycflow::testing;

namespace {

constexpr double kPi = std::numbers::pi;

double polar_deg(const Cloud& c, int i) {
  double a = std::atan2(c(i, 1), c(i, 0)) * 180.0 / kPi;
  if (a < -1e-9) a += 360.0;
  return a;
}

double objective(const Cloud& moving, const Cloud& fixed, double theta) {
  return (rotated(moving, theta) - fixed).squaredNorm();
}

}  // namespace

TEST_CASE("circle_embed on the unit square") {
  const Instance sq = unit_square();
  const Tour tour = make_tour(sq, {0, 1, 2, 3}, Provenance::exact);
  const Cloud c = circle_embed(sq, tour, Direction::forward);
  for (int i = 0; i < 4; ++i) CHECK(c.row(i).norm() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(polar_deg(c, 0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(polar_deg(c, 1) == doctest::Approx(90.0).epsilon(1e-12));
  CHECK(polar_deg(c, 2) == doctest::Approx(180.0).epsilon(1e-12));
  CHECK(polar_deg(c, 3) == doctest::Approx(270.0).epsilon(1e-12));

  const Cloud r = circle_embed(sq, tour, Direction::reversed);
  CHECK(polar_deg(r, 1) == doctest::Approx(270.0).epsilon(1e-12));
  CHECK(polar_deg(r, 3) == doctest::Approx(90.0).epsilon(1e-12));
}

TEST_CASE("circle_embed spacing follows edge lengths") {
  SUBCASE("equilateral triangle") {
    const Instance tri = from_points({{0.0, 0.0}, {1.0, 0.0}, {0.5, std::sqrt(3.0) / 2.0}});
    const Cloud c = circle_embed(tri, make_tour(tri, {0, 1, 2}, Provenance::exact), Direction::forward);
    CHECK(polar_deg(c, 0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(polar_deg(c, 1) == doctest::Approx(120.0).epsilon(1e-12));
    CHECK(polar_deg(c, 2) == doctest::Approx(240.0).epsilon(1e-12));
  }
  SUBCASE("collinear points: edges (1,1,1,3) give arcs (60,60,60,180)") {
    const Instance line = from_points({{0, 0}, {1, 0}, {2, 0}, {3, 0}});
    const Cloud c = circle_embed(line, make_tour(line, {0, 1, 2, 3}, Provenance::exact), Direction::forward);
    CHECK(polar_deg(c, 1) == doctest::Approx(60.0).epsilon(1e-12));
    CHECK(polar_deg(c, 2) == doctest::Approx(120.0).epsilon(1e-12));
    CHECK(polar_deg(c, 3) == doctest::Approx(180.0).epsilon(1e-12));
  }
  SUBCASE("coincident points are degenerate") {
    const Instance same = from_points({{0.2, 0.2}, {0.2, 0.2}, {0.2, 0.2}});
    CHECK_THROWS_AS(circle_embed(same, Tour{{0, 1, 2}, 0.0, Provenance::exact}, Direction::forward),
                    DegenerateError);
  }
}

TEST_CASE("kabsch_so2 recovers rotations") {
  Rng rng(3);
  const Cloud moving = centered(random_cloud(12, rng));
  const Alignment a = kabsch_so2(moving, rotated(moving, kPi / 6.0));
  CHECK_FALSE(a.degenerate);
  CHECK(a.angle == doctest::Approx(kPi / 6.0).epsilon(1e-12));
  CHECK(objective(moving, rotated(moving, kPi / 6.0), a.angle) < 1e-24);
  CHECK(std::abs(kabsch_so2(moving, moving).angle) < 1e-15);

  const Cloud zero = Cloud::Zero(5, 2);
  const Alignment d = kabsch_so2(zero, moving.topRows(5));
  CHECK(d.degenerate);
  CHECK(d.angle == 0.0);
}

TEST_CASE("kabsch_so2 beats a fine grid sweep") {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Cloud moving = centered(random_cloud(20, rng));
    const Cloud fixed = centered(random_cloud(20, rng));
    const double best = objective(moving, fixed, kabsch_so2(moving, fixed).angle);
    double grid = std::numeric_limits<double>::infinity();
    for (double th = -kPi; th < kPi; th += 1e-3) grid = std::min(grid, objective(moving, fixed, th));
    CHECK(best <= grid + 1e-12);
  }
}

TEST_CASE("build_coupled_pair on the unit square is exact") {
  const Instance sq = unit_square();
  const CoupledPair pair = build_coupled_pair(sq, make_tour(sq, {0, 1, 2, 3}, Provenance::exact));
  CHECK((pair.x1 - pair.x0).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(pair.residual < 1e-28);
  CHECK(pair.direction == Direction::forward);
  CHECK(pair.radius == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("coupled pair invariants on random labeled instances") {
  for (std::uint64_t k = 0; k < 60; ++k) {
    const int n = 4 + static_cast<int>(k % 13);
    const Instance inst = random_instance(n, 77, k);
    const Tour tour = held_karp(inst);
    const CoupledPair pair = build_coupled_pair(inst, tour);

    CHECK(std::abs(pair.x1.norm() - pair.x0.norm()) <= 1e-9);
    for (int i = 0; i < n; ++i) REQUIRE(std::abs(pair.x1.row(i).norm() - pair.radius) <= 1e-9);

    const double sign = pair.direction == Direction::forward ? 1.0 : -1.0;
    for (int e = 0; e < n; ++e) {
      const int a = tour.order[static_cast<std::size_t>(e)];
      const int b = tour.order[static_cast<std::size_t>((e + 1) % n)];
      const Eigen::RowVector2d pa = pair.x1.row(a), pb = pair.x1.row(b);
      const double dtheta = std::atan2(pa.x() * pb.y() - pa.y() * pb.x(), pa.dot(pb));
      const double expected = 2.0 * kPi * (inst.points.row(a) - inst.points.row(b)).norm() / tour.length;
      REQUIRE(std::abs(sign * dtheta - expected) <= 1e-9 * expected);
    }

    CHECK(same_cycle(angular_order(pair.x1), tour.order));

    // The other traversal direction never aligns better.
    const Direction other = pair.direction == Direction::forward ? Direction::reversed : Direction::forward;
    const Cloud alt = circle_embed(inst, tour, other);
    const double alt_residual = (rotated(alt, kabsch_so2(alt, pair.x0).angle) - pair.x0).squaredNorm();
    CHECK(pair.residual <= alt_residual + 1e-15);
  }
}

TEST_CASE("coupling is equivariant to rigid motions of the input") {
  Rng rng(21);
  for (std::uint64_t k = 0; k < 20; ++k) {
    const Instance inst = random_instance(9, 5, k);
    const Tour tour = held_karp(inst);
    const CoupledPair base = build_coupled_pair(inst, tour);

    const double phi = rng.uniform(-kPi, kPi);
    Instance moved = inst;
    moved.points = rotated(inst.points, phi);
    moved.points.rowwise() += Eigen::RowVector2d(rng.uniform(-3, 3), rng.uniform(-3, 3));
    const CoupledPair pair = build_coupled_pair(moved, make_tour(moved, tour.order, Provenance::exact));

    CHECK((pair.x1 - rotated(base.x1, phi)).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(std::abs(pair.residual - base.residual) <= 1e-9);
  }
}
