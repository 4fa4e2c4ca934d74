#pragma once

#include "cycflow/instances.hpp"
#include "cycflow/model.hpp"

namespace cycflow {

// Indices sorted by polar angle in [0, 2pi) about the origin, ties by radius then index.
Order sort_by_angle(const Cloud& points);

// Centers the cloud at its mean, then sort_by_angle.
Order angular_order(const Cloud& points);

enum class TwoOptStrategy { best, first };

struct TwoOptOptions {
  int max_passes = 100;
  TwoOptStrategy strategy = TwoOptStrategy::best;
};

// best: each pass applies the single most improving segment reversal.
// first: each pass sweeps all pairs once, applying every improving reversal met.
// Stops when no move improves by more than 1e-12 or after max_passes.
Tour two_opt(const Instance& inst, const Tour& tour, const TwoOptOptions& options = {});

struct StageTimes {
  double integrate_s = 0.0;
  double decode_s = 0.0;
  double refine_s = 0.0;

  double total() const { return integrate_s + decode_s + refine_s; }
};

struct SolveResult {
  Tour decoded;  // straight from the angular sort
  Tour tour;     // after optional 2-opt
  StageTimes times;
};

// Flow pipeline: integrate -> angular sort -> optional 2-opt.
SolveResult solve(const ModelParams& params, const Instance& inst, int steps, bool refine,
                  const TwoOptOptions& options = {});

// Direct angular regression baseline: one forward pass, sort by predicted angle.
SolveResult solve_direct(const ModelParams& params, const Instance& inst, bool refine,
                         const TwoOptOptions& options = {});

// Angular sort of the raw input.
SolveResult solve_angular(const Instance& inst, bool refine, const TwoOptOptions& options = {});

}  // namespace cycflow
