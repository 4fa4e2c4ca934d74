#include "cycflow/decode.hpp"

#include "cycflow/flow.hpp"
#include "cycflow/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

namespace cycflow {

Order sort_by_angle(const Cloud& points) {
  const int n = static_cast<int>(points.rows());
  std::vector<double> angle(static_cast<std::size_t>(n)), radius(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    // Angles in [0, 2pi) so the sweep starts at the positive x axis.
    double a = std::atan2(points(i, 1), points(i, 0));
    if (a < 0.0) a += 2.0 * std::numbers::pi;
    angle[static_cast<std::size_t>(i)] = a;
    radius[static_cast<std::size_t>(i)] = points.row(i).norm();
  }
  Order order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto ua = static_cast<std::size_t>(a);
    const auto ub = static_cast<std::size_t>(b);
    if (angle[ua] != angle[ub]) return angle[ua] < angle[ub];
    if (radius[ua] != radius[ub]) return radius[ua] < radius[ub];
    return a < b;
  });
  return order;
}

Order angular_order(const Cloud& points) { return sort_by_angle(centered(points)); }

Tour two_opt(const Instance& inst, const Tour& tour, const TwoOptOptions& options) {
  const auto dist = distance_matrix(inst.points);
  Order order = tour.order;
  const int n = static_cast<int>(order.size());
  constexpr double eps = 1e-12;
  for (int pass = 0; pass < options.max_passes; ++pass) {
    bool improved = false;
    if (options.strategy == TwoOptStrategy::best) {
      double best = -eps;
      int bi = -1, bj = -1;
      for (int i = 0; i < n - 1; ++i) {
        for (int j = i + 2; j < n; ++j) {
          if (i == 0 && j == n - 1) continue;
          const int a = order[i], b = order[i + 1], c = order[j], d = order[(j + 1) % n];
          const double delta = dist(a, c) + dist(b, d) - dist(a, b) - dist(c, d);
          if (delta < best) {
            best = delta;
            bi = i;
            bj = j;
          }
        }
      }
      if (bi >= 0) {
        std::reverse(order.begin() + bi + 1, order.begin() + bj + 1);
        improved = true;
      }
    } else {
      for (int i = 0; i < n - 1; ++i) {
        for (int j = i + 2; j < n; ++j) {
          if (i == 0 && j == n - 1) continue;
          const int a = order[i], b = order[i + 1], c = order[j], d = order[(j + 1) % n];
          if (dist(a, c) + dist(b, d) - dist(a, b) - dist(c, d) < -eps) {
            std::reverse(order.begin() + i + 1, order.begin() + j + 1);
            improved = true;
          }
        }
      }
    }
    if (!improved) break;
  }
  Tour out = make_tour(inst, std::move(order), tour.provenance);
  // Guard the contract against accumulated rounding in the per-move deltas.
  if (out.length > tour.length) return tour;
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::time_point a, Clock::time_point b) { return std::chrono::duration<double>(b - a).count(); }

template <typename Transport>
SolveResult run_pipeline(const Instance& inst, bool refine, const TwoOptOptions& options, Transport transport) {
  SolveResult r;
  const auto t0 = Clock::now();
  const Cloud moved = transport();
  const auto t1 = Clock::now();
  r.decoded = make_tour(inst, angular_order(moved), Provenance::decoded);
  const auto t2 = Clock::now();
  r.tour = refine ? two_opt(inst, r.decoded, options) : r.decoded;
  const auto t3 = Clock::now();
  r.times = {seconds(t0, t1), seconds(t1, t2), seconds(t2, t3)};
  return r;
}

}  // namespace

SolveResult solve(const ModelParams& params, const Instance& inst, int steps, bool refine,
                  const TwoOptOptions& options) {
  return run_pipeline(inst, refine, options, [&] { return integrate(params, inst, steps); });
}

SolveResult solve_direct(const ModelParams& params, const Instance& inst, bool refine,
                         const TwoOptOptions& options) {
  SolveResult r;
  const auto t0 = Clock::now();
  const Cloud dirs = predict_directions(params, inst);
  const auto t1 = Clock::now();
  // Predicted unit directions are already about the origin; no re-centering.
  r.decoded = make_tour(inst, sort_by_angle(dirs), Provenance::decoded);
  const auto t2 = Clock::now();
  r.tour = refine ? two_opt(inst, r.decoded, options) : r.decoded;
  const auto t3 = Clock::now();
  r.times = {seconds(t0, t1), seconds(t1, t2), seconds(t2, t3)};
  return r;
}

SolveResult solve_angular(const Instance& inst, bool refine, const TwoOptOptions& options) {
  return run_pipeline(inst, refine, options, [&] { return inst.points; });
}

}  // namespace cycflow
