#pragma once

#include "cycflow/geometry.hpp"

#include <Eigen/Dense>

namespace cycflow {

struct FrameFlags {
  bool sign_tie = false;          // Fiedler skewness |sum v^3| < 1e-12, no flip applied
  bool zero_orientation = false;  // ||u|| < 1e-9, rotation left at identity
  bool reflect_tie = false;       // reflection aggregate |s| < 1e-12, no reflection

  bool any() const { return sign_tie || zero_orientation || reflect_tie; }
};

/// Permutation plus rigid motion taking a cloud to its canonical pose:
///   canonical row i = F * R(rotation) * (x[perm[i]] - mean)
/// where F mirrors across the y axis when `reflect` is set.
struct CanonicalFrame {
  Order perm;
  Vec2 mean = Vec2::Zero();
  double rotation = 0.0;
  bool reflect = false;
  FrameFlags flags;

  static CanonicalFrame identity(int n);
  int size() const { return static_cast<int>(perm.size()); }
  Eigen::Matrix2d linear() const;
};

struct SpectralOptions {
  int dense_limit = 256;     // above this, Lanczos on the normalized affinity
  double tolerance = 1e-10;  // eigen-residual target for the iterative path
  int max_restarts = 200;
  int krylov_dim = 60;
};

Eigen::MatrixXd gaussian_affinity(const Cloud& x, double sigma);

// Median of the n(n-1)/2 pairwise distances (mean of the middle two when even).
double median_pairwise_distance(const Cloud& x);

// I - D^{-1/2} W D^{-1/2} with sigma = median pairwise distance.
Eigen::MatrixXd normalized_laplacian(const Cloud& x);

struct FiedlerResult {
  Order perm;              // indices ascending by Fiedler value, ties by index
  Eigen::VectorXd vector;  // unit norm, sign fixed to non-negative skewness
  double eigenvalue = 0.0;
  bool sign_tie = false;
};

FiedlerResult fiedler_order(const Cloud& x, const SpectralOptions& options = {});

CanonicalFrame canonical_frame(const Cloud& x, const SpectralOptions& options = {});

Cloud apply_frame(const CanonicalFrame& f, const Cloud& x);

// Permutation and linear part only; used for displacement fields.
Cloud apply_linear(const CanonicalFrame& f, const Cloud& v);

// Inverse of apply_linear: canonical velocities back to input order and pose.
Cloud restore_velocity(const CanonicalFrame& f, const Cloud& v_can);

}  // namespace cycflow
