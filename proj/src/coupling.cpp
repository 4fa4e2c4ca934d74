#include "cycflow/coupling.hpp"

#include "cycflow/errors.hpp"

#include <cmath>
#include <numbers>

namespace cycflow {

Cloud circle_embed(const Instance& inst, const Tour& tour, Direction direction) {
  validate(inst);
  const int n = inst.size();
  if (!is_permutation(tour.order, n)) {
    throw InvalidArgument("tour is not a permutation of instance " + std::to_string(inst.id));
  }
  std::vector<double> edge(static_cast<std::size_t>(n));
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    const int a = tour.order[static_cast<std::size_t>(k)];
    const int b = tour.order[static_cast<std::size_t>((k + 1) % n)];
    edge[static_cast<std::size_t>(k)] = (inst.points.row(a) - inst.points.row(b)).norm();
    total += edge[static_cast<std::size_t>(k)];
  }
  if (!(total > 0.0)) {
    throw DegenerateError("instance " + std::to_string(inst.id) + " has zero tour length");
  }
  const double radius = centered(inst.points).norm() / std::sqrt(static_cast<double>(n));
  const double sign = direction == Direction::forward ? 1.0 : -1.0;
  Cloud out(n, 2);
  double walked = 0.0;
  for (int k = 0; k < n; ++k) {
    const double angle = sign * 2.0 * std::numbers::pi * walked / total;
    const int node = tour.order[static_cast<std::size_t>(k)];
    out(node, 0) = radius * std::cos(angle);
    out(node, 1) = radius * std::sin(angle);
    walked += edge[static_cast<std::size_t>(k)];
  }
  return out;
}

Alignment kabsch_so2(const Cloud& moving, const Cloud& fixed) {
  if (moving.rows() != fixed.rows()) {
    throw InvalidArgument("kabsch_so2: clouds differ in row count");
  }
  double cross = 0.0;
  double dot = 0.0;
  for (Eigen::Index i = 0; i < moving.rows(); ++i) {
    cross += moving(i, 0) * fixed(i, 1) - moving(i, 1) * fixed(i, 0);
    dot += moving(i, 0) * fixed(i, 0) + moving(i, 1) * fixed(i, 1);
  }
  if (cross == 0.0 && dot == 0.0) return {0.0, true};
  return {std::atan2(cross, dot), false};
}

CoupledPair build_coupled_pair(const Instance& inst, const Tour& tour) {
  const Cloud x0 = centered(inst.points);
  CoupledPair best;
  bool have = false;
  for (Direction dir : {Direction::forward, Direction::reversed}) {
    const Cloud embedded = circle_embed(inst, tour, dir);
    const Alignment align = kabsch_so2(embedded, x0);
    Cloud x1 = rotated(embedded, align.angle);
    const double residual = (x1 - x0).squaredNorm();
    if (!have || residual < best.residual) {
      best.x1 = std::move(x1);
      best.residual = residual;
      best.rotation_applied = align.angle;
      best.direction = dir;
      have = true;
    }
  }
  best.x0 = x0;
  best.tour = tour;
  best.radius = x0.norm() / std::sqrt(static_cast<double>(x0.rows()));
  return best;
}

}  // namespace cycflow
