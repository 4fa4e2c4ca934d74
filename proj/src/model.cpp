#include "cycflow/model.hpp"

#include "cycflow/errors.hpp"
#include "cycflow/rng.hpp"

#include <cmath>
#include <numbers>
#include <thread>

namespace cycflow {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

void ModelConfig::validate() const {
  if (dim <= 0 || layers < 0 || heads <= 0 || ff_mult <= 0 || t_dim <= 0) {
    throw InvalidArgument("model config: sizes must be positive");
  }
  if (dim % heads != 0) {
    throw InvalidArgument("model config: dim " + std::to_string(dim) + " is not divisible by heads " +
                          std::to_string(heads));
  }
  if (head_dim() % 2 != 0) {
    throw InvalidArgument("model config: head width " + std::to_string(head_dim()) +
                          " must be even for rotary embeddings");
  }
  if (t_dim % 2 != 0) throw InvalidArgument("model config: t_dim must be even");
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  z.for_each([](const std::string&, MatrixXd& t) { t.setZero(); });
  return z;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t total = 0;
  for_each([&](const std::string&, const MatrixXd& t) { total += static_cast<std::size_t>(t.size()); });
  return total;
}

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const MatrixXd& t) { ok = ok && t.allFinite(); });
  return ok;
}

namespace {

Linear make_linear(int in, int out) { return {MatrixXd::Zero(in, out), MatrixXd::Zero(1, out)}; }

void xavier(MatrixXd& w, Rng& rng, double gain = 1.0) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound);
  }
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, HeadInit head) {
  cfg.validate();
  const int d = cfg.dim;
  ModelParams p;
  p.config = cfg;
  p.input = make_linear(4, d);
  p.time1 = make_linear(cfg.t_dim, d);
  p.time2 = make_linear(d, d);
  p.blocks.resize(static_cast<std::size_t>(cfg.layers));
  for (auto& b : p.blocks) {
    b.modulation = make_linear(d, 6 * d);
    b.q = make_linear(d, d);
    b.k = make_linear(d, d);
    b.v = make_linear(d, d);
    b.o = make_linear(d, d);
    b.ff1 = make_linear(d, cfg.ff_mult * d);
    b.ff2 = make_linear(cfg.ff_mult * d, d);
  }
  p.final_modulation = make_linear(d, 2 * d);
  p.head = make_linear(d, 2);

  // One stream per tensor so adding layers does not reshuffle earlier ones.
  std::uint64_t stream = 0;
  auto fill = [&](MatrixXd& w, double gain = 1.0) {
    Rng rng(cfg.seed, stream++);
    xavier(w, rng, gain);
  };
  fill(p.input.w);
  fill(p.time1.w);
  fill(p.time2.w);
  for (auto& b : p.blocks) {
    fill(b.q.w);
    fill(b.k.w);
    fill(b.v.w);
    fill(b.o.w);
    fill(b.ff1.w);
    fill(b.ff2.w);
  }
  if (head == HeadInit::small_random) fill(p.head.w, 0.1);
  return p;
}

RowVectorXd time_features(double t, int t_dim) {
  const int half = t_dim / 2;
  RowVectorXd f(t_dim);
  for (int j = 0; j < half; ++j) {
    const double freq = std::exp(-std::log(10000.0) * j / static_cast<double>(half));
    f(j) = std::sin(1000.0 * t * freq);
    f(half + j) = std::cos(1000.0 * t * freq);
  }
  return f;
}

namespace {

constexpr double kLnEps = 1e-6;
constexpr double kRopeBase = 10000.0;

MatrixXd apply_linear(const Linear& l, const MatrixXd& x) {
  MatrixXd y = x * l.w;
  y.rowwise() += l.b.row(0);
  return y;
}

// Accumulates weight/bias gradients and returns dL/dx.
MatrixXd linear_backward(const Linear& l, const MatrixXd& x, const MatrixXd& dy, Linear& g) {
  g.w.noalias() += x.transpose() * dy;
  g.b += dy.colwise().sum();
  return dy * l.w.transpose();
}

double gelu(double x) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
}

double gelu_grad(double x) {
  constexpr double k = 0.7978845608028654;
  const double inner = k * (x + 0.044715 * x * x * x);
  const double th = std::tanh(inner);
  return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * k * (1.0 + 3.0 * 0.044715 * x * x);
}

struct Normalized {
  MatrixXd y;
  VectorXd inv;  // 1 / sqrt(var + eps), per row
};

Normalized layer_norm(const MatrixXd& x) {
  const double d = static_cast<double>(x.cols());
  const VectorXd mean = x.rowwise().mean();
  MatrixXd c = x.colwise() - mean;
  const VectorXd var = c.rowwise().squaredNorm() / d;
  VectorXd inv = (var.array() + kLnEps).rsqrt().matrix();
  return {inv.asDiagonal() * c, inv};
}

MatrixXd layer_norm_backward(const MatrixXd& dy, const Normalized& n) {
  const double d = static_cast<double>(dy.cols());
  const VectorXd mean_dy = dy.rowwise().mean();
  const VectorXd mean_dyy = dy.cwiseProduct(n.y).rowwise().sum() / d;
  MatrixXd dx = dy.colwise() - mean_dy;
  dx -= (n.y.array().colwise() * mean_dyy.array()).matrix();
  return n.inv.asDiagonal() * dx;
}

MatrixXd modulate(const MatrixXd& y, const RowVectorXd& shift, const RowVectorXd& scale) {
  MatrixXd out = (y.array().rowwise() * (scale.array() + 1.0)).matrix();
  out.rowwise() += shift;
  return out;
}

struct RopeTable {
  MatrixXd cos, sin;  // n x head_dim/2
};

RopeTable rope_table(int n, int head_dim) {
  const int pairs = head_dim / 2;
  RopeTable t{MatrixXd(n, pairs), MatrixXd(n, pairs)};
  for (int j = 0; j < pairs; ++j) {
    const double freq = std::pow(kRopeBase, -2.0 * j / static_cast<double>(head_dim));
    for (int i = 0; i < n; ++i) {
      t.cos(i, j) = std::cos(i * freq);
      t.sin(i, j) = std::sin(i * freq);
    }
  }
  return t;
}

// Rotates each (2j, 2j+1) pair of every head by the position angle; `inverse`
// applies the transpose rotation (used for the backward pass).
void rope(MatrixXd& m, int heads, int head_dim, const RopeTable& t, bool inverse) {
  const double sign = inverse ? -1.0 : 1.0;
  for (int h = 0; h < heads; ++h) {
    for (int j = 0; j < head_dim / 2; ++j) {
      const int c0 = h * head_dim + 2 * j;
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double c = t.cos(i, j);
        const double s = sign * t.sin(i, j);
        const double a = m(i, c0);
        const double b = m(i, c0 + 1);
        m(i, c0) = a * c - b * s;
        m(i, c0 + 1) = a * s + b * c;
      }
    }
  }
}

struct BlockCache {
  MatrixXd h_in;
  Normalized n1;
  MatrixXd a1;
  MatrixXd q, k, v;  // q, k after rotary embedding
  std::vector<MatrixXd> probs;
  MatrixXd att;
  MatrixXd o;
  MatrixXd h_mid;
  Normalized n2;
  MatrixXd a2;
  MatrixXd z, g, f;
  RowVectorXd mod;
};

struct Cache {
  RowVectorXd feats, e1, g1, c;
  MatrixXd input;
  std::vector<BlockCache> blocks;
  Normalized nf;
  MatrixXd af;
  RowVectorXd fmod;
  RopeTable table;
};

RowVectorXd seg(const RowVectorXd& v, int index, int d) { return v.segment(index * d, d); }

Cloud run_forward(const ModelParams& p, double t, const Cloud& xt, const Cloud& x0, Cache* cache) {
  const ModelConfig& cfg = p.config;
  const int n = static_cast<int>(xt.rows());
  const int d = cfg.dim;
  const int hd = cfg.head_dim();
  if (x0.rows() != n) throw InvalidArgument("forward: x_t and x0 differ in node count");
  if (!xt.allFinite() || !x0.allFinite() || !std::isfinite(t)) {
    throw NumericalError("forward: non-finite input");
  }

  Cache local;
  Cache& cc = cache ? *cache : local;
  cc.feats = time_features(t, cfg.t_dim);
  cc.e1 = cc.feats * p.time1.w + p.time1.b;
  cc.g1 = cc.e1.unaryExpr(&gelu);
  cc.c = cc.g1 * p.time2.w + p.time2.b;

  cc.input.resize(n, 4);
  cc.input.leftCols(2) = xt;
  cc.input.rightCols(2) = x0;
  MatrixXd h = apply_linear(p.input, cc.input);

  cc.table = rope_table(n, hd);
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  cc.blocks.resize(p.blocks.size());
  for (std::size_t l = 0; l < p.blocks.size(); ++l) {
    const BlockParams& bp = p.blocks[l];
    BlockCache& bc = cc.blocks[l];
    bc.mod = cc.c * bp.modulation.w + bp.modulation.b;
    bc.h_in = h;
    bc.n1 = layer_norm(h);
    bc.a1 = modulate(bc.n1.y, seg(bc.mod, 0, d), seg(bc.mod, 1, d));
    bc.q = apply_linear(bp.q, bc.a1);
    bc.k = apply_linear(bp.k, bc.a1);
    bc.v = apply_linear(bp.v, bc.a1);
    rope(bc.q, cfg.heads, hd, cc.table, false);
    rope(bc.k, cfg.heads, hd, cc.table, false);
    bc.att.resize(n, d);
    bc.probs.resize(static_cast<std::size_t>(cfg.heads));
    for (int hh = 0; hh < cfg.heads; ++hh) {
      MatrixXd s = bc.q.middleCols(hh * hd, hd) * bc.k.middleCols(hh * hd, hd).transpose() * scale;
      const VectorXd mx = s.rowwise().maxCoeff();
      s = (s.colwise() - mx).array().exp().matrix();
      const VectorXd sum = s.rowwise().sum();
      s = sum.cwiseInverse().asDiagonal() * s;
      bc.att.middleCols(hh * hd, hd) = s * bc.v.middleCols(hh * hd, hd);
      bc.probs[static_cast<std::size_t>(hh)] = std::move(s);
    }
    bc.o = apply_linear(bp.o, bc.att);
    h = h + (bc.o.array().rowwise() * seg(bc.mod, 2, d).array()).matrix();
    bc.h_mid = h;
    bc.n2 = layer_norm(h);
    bc.a2 = modulate(bc.n2.y, seg(bc.mod, 3, d), seg(bc.mod, 4, d));
    bc.z = apply_linear(bp.ff1, bc.a2);
    bc.g = bc.z.unaryExpr(&gelu);
    bc.f = apply_linear(bp.ff2, bc.g);
    h = h + (bc.f.array().rowwise() * seg(bc.mod, 5, d).array()).matrix();
  }

  cc.fmod = cc.c * p.final_modulation.w + p.final_modulation.b;
  cc.nf = layer_norm(h);
  cc.af = modulate(cc.nf.y, seg(cc.fmod, 0, d), seg(cc.fmod, 1, d));
  const MatrixXd out = apply_linear(p.head, cc.af);
  return Cloud(out);
}

void run_backward(const ModelParams& p, const Cache& cc, const Cloud& d_out, ModelParams& g) {
  const ModelConfig& cfg = p.config;
  const int d = cfg.dim;
  const int hd = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  RowVectorXd dc = RowVectorXd::Zero(d);

  // Output head and final modulated norm.
  const MatrixXd dout = d_out;
  const MatrixXd daf = linear_backward(p.head, cc.af, dout, g.head);
  RowVectorXd dfmod(2 * d);
  dfmod.segment(0, d) = daf.colwise().sum();
  dfmod.segment(d, d) = daf.cwiseProduct(cc.nf.y).colwise().sum();
  const MatrixXd dnf = (daf.array().rowwise() * (seg(cc.fmod, 1, d).array() + 1.0)).matrix();
  MatrixXd dh = layer_norm_backward(dnf, cc.nf);
  dc += linear_backward(p.final_modulation, cc.c, dfmod, g.final_modulation);

  for (std::size_t li = p.blocks.size(); li-- > 0;) {
    const BlockParams& bp = p.blocks[li];
    const BlockCache& bc = cc.blocks[li];
    BlockParams& gb = g.blocks[li];
    RowVectorXd dmod(6 * d);

    // Feedforward branch: h_out = h_mid + gate2 * f.
    dmod.segment(5 * d, d) = dh.cwiseProduct(bc.f).colwise().sum();
    const MatrixXd df = (dh.array().rowwise() * seg(bc.mod, 5, d).array()).matrix();
    const MatrixXd dg = linear_backward(bp.ff2, bc.g, df, gb.ff2);
    const MatrixXd dz = dg.cwiseProduct(bc.z.unaryExpr(&gelu_grad));
    const MatrixXd da2 = linear_backward(bp.ff1, bc.a2, dz, gb.ff1);
    dmod.segment(3 * d, d) = da2.colwise().sum();
    dmod.segment(4 * d, d) = da2.cwiseProduct(bc.n2.y).colwise().sum();
    const MatrixXd dn2 = (da2.array().rowwise() * (seg(bc.mod, 4, d).array() + 1.0)).matrix();
    dh += layer_norm_backward(dn2, bc.n2);

    // Attention branch: h_mid = h_in + gate1 * o.
    dmod.segment(2 * d, d) = dh.cwiseProduct(bc.o).colwise().sum();
    const MatrixXd do_ = (dh.array().rowwise() * seg(bc.mod, 2, d).array()).matrix();
    const MatrixXd datt = linear_backward(bp.o, bc.att, do_, gb.o);
    MatrixXd dq(bc.q.rows(), d), dk(bc.k.rows(), d), dv(bc.v.rows(), d);
    for (int hh = 0; hh < cfg.heads; ++hh) {
      const MatrixXd& prob = bc.probs[static_cast<std::size_t>(hh)];
      const MatrixXd dO = datt.middleCols(hh * hd, hd);
      const MatrixXd dP = dO * bc.v.middleCols(hh * hd, hd).transpose();
      dv.middleCols(hh * hd, hd) = prob.transpose() * dO;
      const VectorXd rowdot = dP.cwiseProduct(prob).rowwise().sum();
      const MatrixXd dS = prob.cwiseProduct(dP.colwise() - rowdot) * scale;
      dq.middleCols(hh * hd, hd) = dS * bc.k.middleCols(hh * hd, hd);
      dk.middleCols(hh * hd, hd) = dS.transpose() * bc.q.middleCols(hh * hd, hd);
    }
    rope(dq, cfg.heads, hd, cc.table, true);
    rope(dk, cfg.heads, hd, cc.table, true);
    MatrixXd da1 = linear_backward(bp.q, bc.a1, dq, gb.q);
    da1 += linear_backward(bp.k, bc.a1, dk, gb.k);
    da1 += linear_backward(bp.v, bc.a1, dv, gb.v);
    dmod.segment(0, d) = da1.colwise().sum();
    dmod.segment(d, d) = da1.cwiseProduct(bc.n1.y).colwise().sum();
    const MatrixXd dn1 = (da1.array().rowwise() * (seg(bc.mod, 1, d).array() + 1.0)).matrix();
    dh += layer_norm_backward(dn1, bc.n1);

    dc += linear_backward(bp.modulation, cc.c, dmod, gb.modulation);
  }

  linear_backward(p.input, cc.input, dh, g.input);

  const MatrixXd dg1 = linear_backward(p.time2, cc.g1, dc, g.time2);
  const MatrixXd de1 = dg1.cwiseProduct(cc.e1.unaryExpr(&gelu_grad));
  linear_backward(p.time1, cc.feats, de1, g.time1);
}

void add_into(ModelParams& dst, const ModelParams& src) {
  std::vector<const MatrixXd*> parts;
  src.for_each([&](const std::string&, const MatrixXd& t) { parts.push_back(&t); });
  std::size_t i = 0;
  dst.for_each([&](const std::string&, MatrixXd& t) { t += *parts[i++]; });
}

// Splits [0, count) into `shards` contiguous ranges, runs `work(lo, hi, grad)` on
// each (in parallel when shards > 1) and reduces gradients in shard order.
template <typename Work>
LossAndGrad sharded(const ModelParams& params, std::size_t count, int shards, Work work) {
  if (count == 0) throw InvalidArgument("loss_and_grad: empty batch");
  const std::size_t s = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(shards, 1)), count));
  std::vector<LossAndGrad> parts(s);
  auto run = [&](std::size_t k) {
    const std::size_t lo = count * k / s;
    const std::size_t hi = count * (k + 1) / s;
    parts[k].grad = params.zeros_like();
    parts[k].loss = work(lo, hi, parts[k].grad);
  };
  if (s == 1) {
    run(0);
    return std::move(parts[0]);
  }
  {
    std::vector<std::jthread> workers;
    for (std::size_t k = 0; k < s; ++k) workers.emplace_back(run, k);
  }
  LossAndGrad total = std::move(parts[0]);
  for (std::size_t k = 1; k < s; ++k) {
    total.loss += parts[k].loss;
    add_into(total.grad, parts[k].grad);
  }
  return total;
}

}  // namespace

RowVectorXd time_embedding(const ModelParams& p, double t) {
  const RowVectorXd e1 = time_features(t, p.config.t_dim) * p.time1.w + p.time1.b;
  return e1.unaryExpr(&gelu) * p.time2.w + p.time2.b;
}

Cloud forward(const ModelParams& params, double t, const Cloud& xt_can, const Cloud& x0_can) {
  return run_forward(params, t, xt_can, x0_can, nullptr);
}

double accumulate_gradient(const ModelParams& params, double t, const Cloud& xt_can, const Cloud& x0_can,
                           const OutputLoss& loss, ModelParams& grad) {
  Cache cache;
  const Cloud out = run_forward(params, t, xt_can, x0_can, &cache);
  Cloud d_out(out.rows(), 2);
  const double value = loss(out, d_out);
  if (!std::isfinite(value) || !d_out.allFinite()) {
    throw NumericalError("non-finite loss " + std::to_string(value) + " (t=" + std::to_string(t) +
                         ", n=" + std::to_string(out.rows()) + ")");
  }
  run_backward(params, cache, d_out, grad);
  return value;
}

LossAndGrad loss_and_grad(const ModelParams& params, std::span<const FlowItem> batch, int shards) {
  const double weight = 1.0 / static_cast<double>(batch.size());
  return sharded(params, batch.size(), shards, [&](std::size_t lo, std::size_t hi, ModelParams& grad) {
    double loss = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const FlowItem& item = batch[i];
      const Cloud& x0 = *item.x0_can;
      const Cloud& x1 = *item.x1_can;
      if (!(item.t >= 0.0 && item.t <= 1.0)) throw InvalidArgument("flow time outside [0, 1]");
      const Cloud xt = (1.0 - item.t) * x0 + item.t * x1;
      const Cloud target = x1 - x0;
      const double node_weight = weight / static_cast<double>(x0.rows());
      try {
        loss += accumulate_gradient(params, item.t, xt, x0,
                                    [&](const Cloud& out, Cloud& d_out) {
                                      const Cloud diff = out - target;
                                      d_out = 2.0 * node_weight * diff;
                                      return node_weight * diff.squaredNorm();
                                    },
                                    grad);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " at batch item " + std::to_string(i));
      }
    }
    return loss;
  });
}

Cloud normalize_directions(const Cloud& v) {
  Cloud out(v.rows(), 2);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double len = std::sqrt(v.row(i).squaredNorm() + kDirectNormEps * kDirectNormEps);
    out.row(i) = v.row(i) / len;
  }
  return out;
}

LossAndGrad direct_loss_and_grad(const ModelParams& params, std::span<const DirectItem> batch, int shards) {
  const double weight = 1.0 / static_cast<double>(batch.size());
  return sharded(params, batch.size(), shards, [&](std::size_t lo, std::size_t hi, ModelParams& grad) {
    double loss = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const Cloud& x0 = *batch[i].x0_can;
      const Cloud& x1 = *batch[i].x1_can;
      Cloud target(x1.rows(), 2);
      for (Eigen::Index r = 0; r < x1.rows(); ++r) target.row(r) = x1.row(r).normalized();
      const double node_weight = weight / static_cast<double>(x0.rows());
      loss += accumulate_gradient(params, 0.0, x0, x0,
                                  [&](const Cloud& out, Cloud& d_out) {
                                    double value = 0.0;
                                    for (Eigen::Index r = 0; r < out.rows(); ++r) {
                                      const Eigen::RowVector2d v = out.row(r);
                                      const double len = std::sqrt(v.squaredNorm() + kDirectNormEps * kDirectNormEps);
                                      const Eigen::RowVector2d u = v / len;
                                      const Eigen::RowVector2d diff = u - target.row(r);
                                      value += node_weight * diff.squaredNorm();
                                      const Eigen::RowVector2d du = 2.0 * node_weight * diff;
                                      // d(v/len)/dv = (I - v v^T / len^2) / len
                                      d_out.row(r) = (du - (du.dot(v) / (len * len)) * v) / len;
                                    }
                                    return value;
                                  },
                                  grad);
    }
    return loss;
  });
}

}  // namespace cycflow
