#include "cycflow/oracle.hpp"

#include "cycflow/errors.hpp"
#include "cycflow/rng.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace cycflow {

namespace {

constexpr double kImproveEps = 1e-12;

double cycle_cost(const Eigen::MatrixXd& dist, const Order& order) {
  const std::size_t n = order.size();
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) total += dist(order[k], order[(k + 1) % n]);
  return total;
}

}  // namespace

Eigen::MatrixXd distance_matrix(const Cloud& points) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = (points.row(i) - points.row(j)).norm();
    }
  }
  return d;
}

Tour brute_force_opt(const Instance& inst) {
  validate(inst);
  const int n = inst.size();
  if (n > kBruteForceMaxNodes) {
    throw SizeLimitError("brute force supports at most " + std::to_string(kBruteForceMaxNodes) +
                         " nodes, got " + std::to_string(n));
  }
  const auto dist = distance_matrix(inst.points);
  Order rest(static_cast<std::size_t>(n - 1));
  std::iota(rest.begin(), rest.end(), 1);
  Order best;
  double best_len = std::numeric_limits<double>::infinity();
  Order cand(static_cast<std::size_t>(n));
  do {
    // Each undirected cycle through node 0 appears twice; keep one orientation.
    if (rest.front() > rest.back()) continue;
    cand[0] = 0;
    std::copy(rest.begin(), rest.end(), cand.begin() + 1);
    const double len = cycle_cost(dist, cand);
    if (len < best_len) {
      best_len = len;
      best = cand;
    }
  } while (std::next_permutation(rest.begin(), rest.end()));
  return make_tour(inst, std::move(best), Provenance::exact);
}

Tour held_karp(const Instance& inst) {
  validate(inst);
  const int n = inst.size();
  if (n > kHeldKarpMaxNodes) {
    throw SizeLimitError("Held-Karp supports at most " + std::to_string(kHeldKarpMaxNodes) +
                         " nodes, got " + std::to_string(n) + "; use the heuristic solver");
  }
  const auto dist = distance_matrix(inst.points);
  // Node 0 is the fixed start; bit j of a mask stands for node j + 1.
  const int m = n - 1;
  const std::size_t full = (std::size_t{1} << m) - 1;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> cost((full + 1) * static_cast<std::size_t>(m), inf);
  std::vector<std::int8_t> parent((full + 1) * static_cast<std::size_t>(m), -1);
  auto at = [m](std::size_t mask, int j) { return mask * static_cast<std::size_t>(m) + static_cast<std::size_t>(j); };

  for (int j = 0; j < m; ++j) cost[at(std::size_t{1} << j, j)] = dist(0, j + 1);
  for (std::size_t mask = 1; mask <= full; ++mask) {
    if ((mask & (mask - 1)) == 0) continue;
    for (int j = 0; j < m; ++j) {
      if (!(mask & (std::size_t{1} << j))) continue;
      const std::size_t prev = mask ^ (std::size_t{1} << j);
      double best = inf;
      int arg = -1;
      for (int k = 0; k < m; ++k) {
        if (!(prev & (std::size_t{1} << k))) continue;
        const double c = cost[at(prev, k)] + dist(k + 1, j + 1);
        if (c < best) {
          best = c;
          arg = k;
        }
      }
      cost[at(mask, j)] = best;
      parent[at(mask, j)] = static_cast<std::int8_t>(arg);
    }
  }

  double best = inf;
  int last = -1;
  for (int j = 0; j < m; ++j) {
    const double c = cost[at(full, j)] + dist(j + 1, 0);
    if (c < best) {
      best = c;
      last = j;
    }
  }
  Order order(static_cast<std::size_t>(n));
  order[0] = 0;
  std::size_t mask = full;
  for (int pos = n - 1; pos >= 1; --pos) {
    order[static_cast<std::size_t>(pos)] = last + 1;
    const int prev = parent[at(mask, last)];
    mask ^= std::size_t{1} << last;
    last = prev;
  }
  return make_tour(inst, std::move(order), Provenance::exact);
}

bool two_opt_first_improvement(const Eigen::MatrixXd& dist, Order& order) {
  const int n = static_cast<int>(order.size());
  bool changed = false;
  bool improved = true;
  while (improved) {
    improved = false;
    for (int i = 0; i < n - 1; ++i) {
      for (int j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;
        const int a = order[i], b = order[i + 1], c = order[j], d = order[(j + 1) % n];
        const double delta = dist(a, c) + dist(b, d) - dist(a, b) - dist(c, d);
        if (delta < -kImproveEps) {
          std::reverse(order.begin() + i + 1, order.begin() + j + 1);
          improved = changed = true;
        }
      }
    }
  }
  return changed;
}

bool or_opt_first_improvement(const Eigen::MatrixXd& dist, Order& order) {
  const int n = static_cast<int>(order.size());
  bool changed = false;
  bool improved = true;
  while (improved) {
    improved = false;
    for (int len = 1; len <= 3 && !improved; ++len) {
      if (len > n - 3) break;
      for (int i = 0; i < n && !improved; ++i) {
        // Segment occupies positions i .. i+len-1 (cyclically).
        const int prev = order[(i - 1 + n) % n];
        const int first = order[i];
        const int last = order[(i + len - 1) % n];
        const int next = order[(i + len) % n];
        const double removal = dist(prev, first) + dist(last, next) - dist(prev, next);
        // Candidate edges (p, q) among the remaining path next .. prev.
        for (int s = 0; s < n - len - 1; ++s) {
          const int p = order[(i + len + s) % n];
          const int q = order[(i + len + s + 1) % n];
          const double keep = dist(p, first) + dist(last, q) - dist(p, q);
          const double flip = dist(p, last) + dist(first, q) - dist(p, q);
          const bool reversed = flip < keep;
          if (std::min(keep, flip) - removal < -kImproveEps) {
            Order segment;
            for (int k = 0; k < len; ++k) segment.push_back(order[(i + k) % n]);
            if (reversed) std::reverse(segment.begin(), segment.end());
            Order rebuilt;
            rebuilt.reserve(static_cast<std::size_t>(n));
            for (int k = 0; k <= s; ++k) rebuilt.push_back(order[(i + len + k) % n]);
            rebuilt.insert(rebuilt.end(), segment.begin(), segment.end());
            for (int k = s + 1; k < n - len; ++k) rebuilt.push_back(order[(i + len + k) % n]);
            order = std::move(rebuilt);
            improved = changed = true;
            break;
          }
        }
      }
    }
  }
  return changed;
}

namespace {

Order nearest_neighbor(const Eigen::MatrixXd& dist, int start) {
  const int n = static_cast<int>(dist.rows());
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  Order order{start};
  used[static_cast<std::size_t>(start)] = 1;
  int cur = start;
  for (int step = 1; step < n; ++step) {
    int best = -1;
    for (int j = 0; j < n; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      if (best < 0 || dist(cur, j) < dist(cur, best)) best = j;
    }
    used[static_cast<std::size_t>(best)] = 1;
    order.push_back(best);
    cur = best;
  }
  return order;
}

void local_search(const Eigen::MatrixXd& dist, Order& order) {
  bool any = true;
  while (any) {
    const bool a = two_opt_first_improvement(dist, order);
    const bool b = or_opt_first_improvement(dist, order);
    any = a || b;
  }
}

Order double_bridge(const Order& order, Rng& rng) {
  const std::size_t n = order.size();
  std::size_t cuts[3];
  for (auto& c : cuts) c = 1 + static_cast<std::size_t>(rng.below(n - 1));
  std::sort(std::begin(cuts), std::end(cuts));
  Order out(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cuts[0]));
  out.insert(out.end(), order.begin() + static_cast<std::ptrdiff_t>(cuts[2]), order.end());
  out.insert(out.end(), order.begin() + static_cast<std::ptrdiff_t>(cuts[1]),
             order.begin() + static_cast<std::ptrdiff_t>(cuts[2]));
  out.insert(out.end(), order.begin() + static_cast<std::ptrdiff_t>(cuts[0]),
             order.begin() + static_cast<std::ptrdiff_t>(cuts[1]));
  return out;
}

}  // namespace

Tour heuristic_label(const Instance& inst, std::uint64_t seed, const HeuristicOptions& options) {
  validate(inst);
  const int n = inst.size();
  if (n < 4) throw InvalidArgument("heuristic labels need at least 4 nodes");
  const auto dist = distance_matrix(inst.points);

  Order best;
  double best_len = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n; ++s) {
    Order cand = nearest_neighbor(dist, s);
    const double len = cycle_cost(dist, cand);
    if (len < best_len) {
      best_len = len;
      best = std::move(cand);
    }
  }
  local_search(dist, best);
  best_len = cycle_cost(dist, best);

  Rng rng(seed, inst.id);
  for (int kick = 0; kick < options.kicks && n >= 8; ++kick) {
    Order cand = double_bridge(best, rng);
    local_search(dist, cand);
    const double len = cycle_cost(dist, cand);
    if (len < best_len - kImproveEps) {
      best_len = len;
      best = std::move(cand);
    }
  }
  return make_tour(inst, std::move(best), Provenance::heuristic);
}

}  // namespace cycflow
