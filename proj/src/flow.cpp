#include "cycflow/flow.hpp"

#include "cycflow/errors.hpp"
#include "cycflow/rng.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

namespace cycflow {

Cloud sample_interpolant(const CoupledPair& pair, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("interpolant time must lie in [0, 1]");
  return (1.0 - t) * pair.x0 + t * pair.x1;
}

Cloud target_velocity(const CoupledPair& pair) { return pair.x1 - pair.x0; }

std::string_view to_string(Objective o) { return o == Objective::flow ? "flow" : "direct"; }

Objective parse_objective(std::string_view text) {
  if (text == "flow") return Objective::flow;
  if (text == "direct") return Objective::direct;
  throw InvalidArgument("unknown objective '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  model.validate();
  if (epochs < 0) throw InvalidArgument("epochs must be non-negative");
  if (batch_size < 1) throw InvalidArgument("batch size must be positive");
  if (!(lr > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (threads < 1) throw InvalidArgument("threads must be positive");
}

std::vector<TrainingExample> prepare_examples(const Dataset& data) {
  std::vector<TrainingExample> out;
  out.reserve(data.records.size());
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const Record& rec = data.records[i];
    if (!rec.tour) {
      throw DataError("record " + std::to_string(i) + " (instance " + std::to_string(rec.instance.id) +
                      ") has no tour label; training needs a labeled dataset");
    }
    const CoupledPair pair = build_coupled_pair(rec.instance, *rec.tour);
    const CanonicalFrame frame = canonical_frame(pair.x0);
    out.push_back({apply_frame(frame, pair.x0), apply_frame(frame, pair.x1)});
  }
  return out;
}

double displacement_energy(std::span<const TrainingExample> examples) {
  double total = 0.0;
  for (const auto& ex : examples) {
    total += (ex.x1_can - ex.x0_can).squaredNorm() / static_cast<double>(ex.x0_can.rows());
  }
  return total / static_cast<double>(examples.size());
}

double evaluate_flow_loss(const ModelParams& params, std::span<const TrainingExample> examples, int t_points) {
  double total = 0.0;
  for (const auto& ex : examples) {
    const Cloud u = ex.x1_can - ex.x0_can;
    for (int j = 0; j < t_points; ++j) {
      const double t = (j + 0.5) / t_points;
      const Cloud xt = (1.0 - t) * ex.x0_can + t * ex.x1_can;
      total += (forward(params, t, xt, ex.x0_can) - u).squaredNorm() / static_cast<double>(u.rows());
    }
  }
  return total / static_cast<double>(examples.size() * static_cast<std::size_t>(t_points));
}

namespace {

/// Adam with bias correction.
class Adam {
 public:
  explicit Adam(const ModelParams& like) : m_(like.zeros_like()), v_(like.zeros_like()) {}

  void step(ModelParams& params, const ModelParams& grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    std::vector<const Eigen::MatrixXd*> g;
    grad.for_each([&](const std::string&, const Eigen::MatrixXd& x) { g.push_back(&x); });
    std::vector<Eigen::MatrixXd*> m, v;
    m_.for_each([&](const std::string&, Eigen::MatrixXd& x) { m.push_back(&x); });
    v_.for_each([&](const std::string&, Eigen::MatrixXd& x) { v.push_back(&x); });
    std::size_t i = 0;
    params.for_each([&](const std::string&, Eigen::MatrixXd& p) {
      *m[i] = kBeta1 * *m[i] + (1.0 - kBeta1) * *g[i];
      *v[i] = kBeta2 * *v[i] + (1.0 - kBeta2) * g[i]->cwiseAbs2();
      p.array() -= lr * (m[i]->array() / c1) / ((v[i]->array() / c2).sqrt() + kEps);
      ++i;
    });
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  ModelParams m_, v_;
  int t_ = 0;
};

double global_norm(const ModelParams& g) {
  double sq = 0.0;
  g.for_each([&](const std::string&, const Eigen::MatrixXd& x) { sq += x.squaredNorm(); });
  return std::sqrt(sq);
}

void scale_params(ModelParams& g, double factor) {
  g.for_each([&](const std::string&, Eigen::MatrixXd& x) { x *= factor; });
}

double scheduled_lr(const TrainConfig& cfg, long step, long total) {
  if (cfg.warmup_steps > 0 && step < cfg.warmup_steps) {
    return cfg.lr * static_cast<double>(step + 1) / cfg.warmup_steps;
  }
  const long span = std::max<long>(1, total - cfg.warmup_steps);
  const double progress = std::min(1.0, static_cast<double>(step - cfg.warmup_steps) / static_cast<double>(span));
  const double floor = cfg.lr * cfg.lr_final_ratio;
  return floor + 0.5 * (cfg.lr - floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace

TrainResult train_examples(const TrainConfig& cfg, std::span<const TrainingExample> examples,
                           const EpochCallback& on_epoch) {
  cfg.validate();
  if (examples.empty()) throw DataError("training set is empty");
  TrainResult result;
  result.params = init_params(cfg.model, cfg.objective == Objective::flow ? HeadInit::zero : HeadInit::small_random);

  const std::size_t count = examples.size();
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), count);
  const long steps_per_epoch = static_cast<long>((count + batch - 1) / batch);
  const long total_steps = steps_per_epoch * cfg.epochs;

  Adam adam(result.params);
  Rng rng(cfg.seed, 0x7a11);
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;

  const auto start = std::chrono::steady_clock::now();
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    double lr = cfg.lr;
    for (std::size_t lo = 0; lo < count; lo += batch) {
      const std::size_t hi = std::min(count, lo + batch);
      LossAndGrad lg;
      if (cfg.objective == Objective::flow) {
        std::vector<FlowItem> items;
        for (std::size_t k = lo; k < hi; ++k) {
          const auto& ex = examples[order[k]];
          items.push_back({&ex.x0_can, &ex.x1_can, rng.uniform()});
        }
        lg = loss_and_grad(result.params, items, cfg.threads);
      } else {
        std::vector<DirectItem> items;
        for (std::size_t k = lo; k < hi; ++k) {
          const auto& ex = examples[order[k]];
          items.push_back({&ex.x0_can, &ex.x1_can});
        }
        lg = direct_loss_and_grad(result.params, items, cfg.threads);
      }
      epoch_loss += lg.loss * static_cast<double>(hi - lo);
      if (cfg.grad_clip > 0.0) {
        const double norm = global_norm(lg.grad);
        if (norm > cfg.grad_clip) scale_params(lg.grad, cfg.grad_clip / norm);
      }
      lr = scheduled_lr(cfg, step, total_steps);
      adam.step(result.params, lg.grad, lr);
      ++step;
    }
    if (!result.params.all_finite()) {
      throw NumericalError("parameters became non-finite in epoch " + std::to_string(epoch));
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = epoch_loss / static_cast<double>(count);
    stats.lr = lr;
    stats.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

TrainResult train(const TrainConfig& cfg, const Dataset& data, const EpochCallback& on_epoch) {
  if (!data.fully_labeled()) {
    throw DataError("dataset is missing tour labels; generate it with --solver heldkarp or heuristic");
  }
  const auto examples = prepare_examples(data);
  return train_examples(cfg, examples, on_epoch);
}

Cloud integrate_field(const Cloud& x0, int steps, const VelocityField& field, const StepObserver& observe) {
  if (steps < 1) throw InvalidArgument("integration needs at least one step");
  Cloud x = x0;
  const double dt = 1.0 / steps;
  if (observe) observe(0, x);
  for (int k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) / steps;
    const Cloud v = field(t, x, x0);
    x += dt * v;
    if (!x.allFinite()) throw NumericalError("integration produced non-finite values at step " + std::to_string(k));
    if (observe) observe(k + 1, x);
  }
  return x;
}

Cloud integrate(const ModelParams& params, const Instance& inst, int steps, const StepObserver& observe) {
  validate(inst);
  const Cloud x0 = centered(inst.points);
  const CanonicalFrame frame = canonical_frame(x0);
  const Cloud x0_can = apply_frame(frame, x0);
  return integrate_field(
      x0, steps,
      [&](double t, const Cloud& xt, const Cloud&) {
        return restore_velocity(frame, forward(params, t, apply_frame(frame, xt), x0_can));
      },
      observe);
}

Cloud predict_directions(const ModelParams& params, const Instance& inst) {
  validate(inst);
  const Cloud x0 = centered(inst.points);
  const CanonicalFrame frame = canonical_frame(x0);
  const Cloud x0_can = apply_frame(frame, x0);
  return restore_velocity(frame, normalize_directions(forward(params, 0.0, x0_can, x0_can)));
}

}  // namespace cycflow
