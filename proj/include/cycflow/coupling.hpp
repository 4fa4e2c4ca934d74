#pragma once

#include "cycflow/instances.hpp"

namespace cycflow {

enum class Direction { forward, reversed };

/// Training pair for flow matching: the centered input cloud and its aligned
/// circle target. Row i of both clouds refers to node i.
struct CoupledPair {
  Cloud x0;  // input, mean-centered
  Cloud x1;  // aligned circle embedding of `tour`
  Tour tour;
  double radius = 0.0;
  double rotation_applied = 0.0;  // radians, counterclockwise
  Direction direction = Direction::forward;
  double residual = 0.0;  // ||x1 - x0||_F^2 after alignment
};

// Places the tour on a circle about the origin whose radius makes the Frobenius
// norm equal that of the centered input. tour[0] sits at angle 0 and arc k spans
// 2*pi*d_k/L; `reversed` walks clockwise.
Cloud circle_embed(const Instance& inst, const Tour& tour, Direction direction);

struct Alignment {
  double angle = 0.0;
  bool degenerate = false;  // zero cross-covariance; angle forced to 0
};

// Angle theta minimizing ||rotated(moving, theta) - fixed||_F^2.
Alignment kabsch_so2(const Cloud& moving, const Cloud& fixed);

CoupledPair build_coupled_pair(const Instance& inst, const Tour& tour);

}  // namespace cycflow
