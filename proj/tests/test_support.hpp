#pragma once

#include "cycflow/geometry.hpp"
#include "cycflow/instances.hpp"
#include "cycflow/model.hpp"
#include "cycflow/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cycflow::testing {

inline Instance unit_square() {
  Instance inst;
  inst.points.resize(4, 2);
  inst.points << 0, 0, 1, 0, 1, 1, 0, 1;
  return inst;
}

inline Instance from_points(std::initializer_list<std::pair<double, double>> pts) {
  Instance inst;
  inst.points.resize(static_cast<Eigen::Index>(pts.size()), 2);
  Eigen::Index i = 0;
  for (auto [x, y] : pts) {
    inst.points(i, 0) = x;
    inst.points(i, 1) = y;
    ++i;
  }
  return inst;
}

// Points on a circle of radius r at equally spaced angles, listed in angular order.
inline Instance regular_polygon(int n, double r = 0.4, double phase = 0.3) {
  Instance inst;
  inst.points.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    const double a = phase + 2.0 * std::numbers::pi * i / n;
    inst.points(i, 0) = 0.5 + r * std::cos(a);
    inst.points(i, 1) = 0.5 + r * std::sin(a);
  }
  return inst;
}

// Random points on a circle, in random index order.
inline Instance convex_instance(int n, Rng& rng) {
  Instance inst;
  inst.points.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    inst.points(i, 0) = 0.5 + 0.45 * std::cos(a);
    inst.points(i, 1) = 0.5 + 0.45 * std::sin(a);
  }
  return inst;
}

// Order of points on a circle about (0.5, 0.5), by angle.
inline Order angular_hull(const Instance& inst) {
  const int n = inst.size();
  Order o(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) o[static_cast<std::size_t>(i)] = i;
  auto ang = [&](int i) { return std::atan2(inst.points(i, 1) - 0.5, inst.points(i, 0) - 0.5); };
  std::sort(o.begin(), o.end(), [&](int a, int b) { return ang(a) < ang(b); });
  return o;
}

inline Order random_permutation(int n, Rng& rng) {
  Order p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  rng.shuffle(p);
  return p;
}

inline Cloud permute_rows(const Cloud& x, const Order& p) {
  // Row i of the result is row p[i] of x.
  Cloud out(x.rows(), 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = x.row(p[static_cast<std::size_t>(i)]);
  return out;
}

// Canonical form of a cyclic order: rotate so the smallest index leads, then pick
// the lexicographically smaller of the two directions.
inline Order canonical_cycle(const Order& order) {
  const auto n = order.size();
  auto rot = [&](const Order& o) {
    const auto it = std::min_element(o.begin(), o.end());
    Order r(o.size());
    std::rotate_copy(o.begin(), it, o.end(), r.begin());
    return r;
  };
  Order fwd = rot(order);
  Order rev(order.rbegin(), order.rend());
  rev = rot(rev);
  (void)n;
  return std::min(fwd, rev);
}

inline bool same_cycle(const Order& a, const Order& b) { return canonical_cycle(a) == canonical_cycle(b); }

// Model with every tensor (including gates and the head) drawn at random, so no
// gradient is structurally zero.
inline ModelParams random_params(const ModelConfig& cfg, std::uint64_t seed, double scale = 0.3) {
  ModelParams p = init_params(cfg);
  Rng rng(seed, 99);
  p.for_each([&](const std::string&, Eigen::MatrixXd& t) {
    for (Eigen::Index i = 0; i < t.rows(); ++i)
      for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = rng.uniform(-scale, scale);
  });
  return p;
}

inline Cloud random_cloud(int n, Rng& rng, double lo = 0.0, double hi = 1.0) {
  Cloud c(n, 2);
  for (int i = 0; i < n; ++i) {
    c(i, 0) = rng.uniform(lo, hi);
    c(i, 1) = rng.uniform(lo, hi);
  }
  return c;
}

}  // namespace cycflow::testing
