#pragma once

#include "cycflow/instances.hpp"

#include <cstdint>

namespace cycflow {

inline constexpr int kBruteForceMaxNodes = 10;
inline constexpr int kHeldKarpMaxNodes = 20;

// Exhaustive search over the (n-1)!/2 distinct cycles. Test oracle only.
Tour brute_force_opt(const Instance& inst);

// Bitmask dynamic program over (visited set, endpoint). Ties between equal-cost
// predecessors resolve toward the smaller node index.
Tour held_karp(const Instance& inst);

struct HeuristicOptions {
  // Iterated-local-search rounds: double-bridge kick from the incumbent, re-run
  // local search, keep the result if strictly shorter. Kicks draw from the seed.
  int kicks = 0;
};

// Best-of-n-starts nearest neighbour, then alternating 2-opt and Or-opt
// (segments of 1..3 nodes) until neither improves.
Tour heuristic_label(const Instance& inst, std::uint64_t seed, const HeuristicOptions& options = {});

// Local search pieces, shared with the label pipeline. Both return true if the
// tour changed.
bool two_opt_first_improvement(const Eigen::MatrixXd& dist, Order& order);
bool or_opt_first_improvement(const Eigen::MatrixXd& dist, Order& order);

Eigen::MatrixXd distance_matrix(const Cloud& points);

}  // namespace cycflow
