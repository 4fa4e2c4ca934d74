#pragma once

#include <Eigen/Core>

#include <cmath>
#include <vector>

namespace cycflow {

// N x 2 point cloud, one node per row.
using Cloud = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
using Vec2 = Eigen::Vector2d;

// A permutation of node indices, read cyclically when it describes a tour.
using Order = std::vector<int>;

inline Vec2 centroid(const Cloud& x) { return x.colwise().mean().transpose(); }

inline Cloud centered(const Cloud& x) {
  Cloud out = x;
  out.rowwise() -= x.colwise().mean();
  return out;
}

// Rotates every row counterclockwise by `angle` radians.
inline Cloud rotated(const Cloud& x, double angle) {
  Eigen::Matrix2d r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return x * r.transpose();
}

bool is_permutation(const Order& order, int n);

}  // namespace cycflow
