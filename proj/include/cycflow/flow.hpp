#pragma once

#include "cycflow/canon.hpp"
#include "cycflow/coupling.hpp"
#include "cycflow/instances.hpp"
#include "cycflow/model.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cycflow {

// x_t = (1 - t) x0 + t x1.
Cloud sample_interpolant(const CoupledPair& pair, double t);

// u = x1 - x0, constant along the path.
Cloud target_velocity(const CoupledPair& pair);

enum class Objective { flow, direct };

std::string_view to_string(Objective o);
Objective parse_objective(std::string_view text);

struct TrainConfig {
  ModelConfig model;
  Objective objective = Objective::flow;
  int epochs = 100;
  int batch_size = 64;
  double lr = 3e-4;
  double lr_final_ratio = 0.0;  // cosine decays lr to lr * ratio
  int warmup_steps = 0;
  double grad_clip = 1.0;  // global-norm clip, <= 0 disables
  std::uint64_t seed = 0;
  int threads = 1;  // gradient shards; fixed reduction order for a given value

  void validate() const;
};

/// One precomputed training pair, already in the canonical frame of its input.
struct TrainingExample {
  Cloud x0_can;
  Cloud x1_can;
};

// Couples and canonicalizes every labeled record once. Throws DataError when a
// record has no tour.
std::vector<TrainingExample> prepare_examples(const Dataset& data);

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
  double wallclock_s = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

TrainResult train(const TrainConfig& cfg, const Dataset& data, const EpochCallback& on_epoch = {});
TrainResult train_examples(const TrainConfig& cfg, std::span<const TrainingExample> examples,
                           const EpochCallback& on_epoch = {});

// Mean over examples of (1/n) ||x1 - x0||^2: the flow loss of a zero field.
double displacement_energy(std::span<const TrainingExample> examples);

// Flow loss averaged over examples and a fixed midpoint grid of `t_points` times.
double evaluate_flow_loss(const ModelParams& params, std::span<const TrainingExample> examples, int t_points = 8);

using VelocityField = std::function<Cloud(double t, const Cloud& xt, const Cloud& x0)>;
using StepObserver = std::function<void(int step, const Cloud& x)>;

// Forward Euler with t_k = k / steps.
Cloud integrate_field(const Cloud& x0, int steps, const VelocityField& field, const StepObserver& observe = {});

// Centers the instance, fixes the canonical frame of x0 once, and integrates the
// model field (evaluated in that frame and restored) for `steps` Euler steps.
Cloud integrate(const ModelParams& params, const Instance& inst, int steps, const StepObserver& observe = {});

// Direct-regression baseline: unit directions per node in the input frame.
Cloud predict_directions(const ModelParams& params, const Instance& inst);

}  // namespace cycflow
