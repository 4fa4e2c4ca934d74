#pragma once

#include "cycflow/geometry.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cycflow {

struct ModelConfig {
  int dim = 128;
  int layers = 4;
  int heads = 8;
  int ff_mult = 4;
  int t_dim = 64;  // sinusoidal time features fed to the time MLP
  std::uint64_t seed = 0;

  int head_dim() const { return dim / heads; }
  // Throws InvalidArgument on inconsistent shapes.
  void validate() const;
};

// y = x * w + b, with b stored as a 1 x out row.
struct Linear {
  Eigen::MatrixXd w;
  Eigen::MatrixXd b;
};

struct BlockParams {
  Linear modulation;  // c -> [shift1 scale1 gate1 shift2 scale2 gate2]
  Linear q, k, v, o;
  Linear ff1, ff2;
};

/// All weights of the velocity field. Gradients use the same type.
struct ModelParams {
  ModelConfig config;
  Linear input;  // (x_t, x0) per node: 4 -> dim
  Linear time1;  // t_dim -> dim
  Linear time2;  // dim -> dim, output is the conditioning vector c
  std::vector<BlockParams> blocks;
  Linear final_modulation;  // c -> [shift scale]
  Linear head;              // dim -> 2

  // Visits every tensor in a fixed order with a stable dotted name.
  template <typename F>
  void for_each(F&& f) {
    visit_linear("input", input, f);
    visit_linear("time.0", time1, f);
    visit_linear("time.1", time2, f);
    for (std::size_t l = 0; l < blocks.size(); ++l) {
      const std::string p = "blocks." + std::to_string(l) + ".";
      auto& b = blocks[l];
      visit_linear(p + "modulation", b.modulation, f);
      visit_linear(p + "attn.q", b.q, f);
      visit_linear(p + "attn.k", b.k, f);
      visit_linear(p + "attn.v", b.v, f);
      visit_linear(p + "attn.o", b.o, f);
      visit_linear(p + "ff.0", b.ff1, f);
      visit_linear(p + "ff.1", b.ff2, f);
    }
    visit_linear("final.modulation", final_modulation, f);
    visit_linear("head", head, f);
  }

  template <typename F>
  void for_each(F&& f) const {
    const_cast<ModelParams*>(this)->for_each(
        [&f](const std::string& name, Eigen::MatrixXd& t) { f(name, static_cast<const Eigen::MatrixXd&>(t)); });
  }

  ModelParams zeros_like() const;
  std::size_t parameter_count() const;
  bool all_finite() const;

 private:
  template <typename F>
  static void visit_linear(const std::string& name, Linear& l, F& f) {
    f(name + ".w", l.w);
    f(name + ".b", l.b);
  }
};

enum class HeadInit { zero, small_random };

// Xavier-uniform weights, zero biases, zero AdaLN modulation (every block starts
// as the identity). With HeadInit::zero the field is identically zero.
ModelParams init_params(const ModelConfig& cfg, HeadInit head = HeadInit::zero);

// Sin/cos features of 1000*t at geometrically spaced frequencies.
Eigen::RowVectorXd time_features(double t, int t_dim);

// Conditioning vector c (length dim) produced by the time MLP.
Eigen::RowVectorXd time_embedding(const ModelParams& params, double t);

// Velocity in the canonical frame; row i is sequence position i.
Cloud forward(const ModelParams& params, double t, const Cloud& xt_can, const Cloud& x0_can);

// Maps a model output to a scalar loss and writes dL/d(output) into the second argument.
using OutputLoss = std::function<double(const Cloud& out, Cloud& d_out)>;

// One forward/backward pass; adds dL/dparams into `grad` and returns the loss.
double accumulate_gradient(const ModelParams& params, double t, const Cloud& xt_can, const Cloud& x0_can,
                           const OutputLoss& loss, ModelParams& grad);

struct FlowItem {
  const Cloud* x0_can;
  const Cloud* x1_can;
  double t;
};

struct DirectItem {
  const Cloud* x0_can;
  const Cloud* x1_can;
};

struct LossAndGrad {
  double loss = 0.0;
  ModelParams grad;
};

// Mean over items and nodes of ||v(t, x_t | x0) - (x1 - x0)||^2.
// Items are split into `shards` contiguous groups reduced in order, so the
// result depends only on the batch and the shard count.
LossAndGrad loss_and_grad(const ModelParams& params, std::span<const FlowItem> batch, int shards = 1);

// Direct angular regression objective: mean squared chordal distance between the
// normalized output at t = 0 with input (x0, x0) and the unit direction of x1.
LossAndGrad direct_loss_and_grad(const ModelParams& params, std::span<const DirectItem> batch, int shards = 1);

inline constexpr double kDirectNormEps = 1e-6;

// sqrt(|v|^2 + eps^2)-normalized rows.
Cloud normalize_directions(const Cloud& v);

}  // namespace cycflow
