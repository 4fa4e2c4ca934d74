#include "cycflow/canon.hpp"

#include "cycflow/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace cycflow {

CanonicalFrame CanonicalFrame::identity(int n) {
  CanonicalFrame f;
  f.perm.resize(static_cast<std::size_t>(n));
  std::iota(f.perm.begin(), f.perm.end(), 0);
  return f;
}

Eigen::Matrix2d CanonicalFrame::linear() const {
  Eigen::Matrix2d r;
  r << std::cos(rotation), -std::sin(rotation), std::sin(rotation), std::cos(rotation);
  if (reflect) r.row(0) *= -1.0;
  return r;
}

Eigen::MatrixXd gaussian_affinity(const Cloud& x, double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("gaussian_affinity: sigma must be positive");
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd w(n, n);
  const double inv = 1.0 / (sigma * sigma);
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      w(i, j) = w(j, i) = std::exp(-(x.row(i) - x.row(j)).squaredNorm() * inv);
    }
  }
  return w;
}

double median_pairwise_distance(const Cloud& x) {
  const Eigen::Index n = x.rows();
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((x.row(i) - x.row(j)).norm());
  }
  if (d.empty()) return 0.0;
  std::sort(d.begin(), d.end());
  const std::size_t mid = d.size() / 2;
  return d.size() % 2 == 1 ? d[mid] : 0.5 * (d[mid - 1] + d[mid]);
}

namespace {

Eigen::MatrixXd normalized_affinity(const Cloud& x, Eigen::VectorXd* sqrt_degree) {
  const double sigma = median_pairwise_distance(x);
  if (!(sigma > 0.0)) {
    throw DegenerateError("cannot canonicalize: median pairwise distance is zero");
  }
  Eigen::MatrixXd w = gaussian_affinity(x, sigma);
  const Eigen::VectorXd s = w.rowwise().sum().cwiseSqrt();
  const Eigen::VectorXd inv = s.cwiseInverse();
  w = inv.asDiagonal() * w * inv.asDiagonal();
  if (sqrt_degree) *sqrt_degree = s;
  return w;
}

// Second eigenpair of L_sym = I - M via Lanczos on (M + I) restricted to the
// complement of M's known top eigenvector sqrt(D) 1.
std::pair<double, Eigen::VectorXd> lanczos_fiedler(const Eigen::MatrixXd& m, const Eigen::VectorXd& top,
                                                   const SpectralOptions& opt) {
  const Eigen::Index n = m.rows();
  const Eigen::VectorXd q0 = top.normalized();
  auto project = [&](Eigen::VectorXd& v) { v -= q0 * q0.dot(v); };
  auto apply = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd y = m * v + v;
    project(y);
    return y;
  };

  Eigen::VectorXd start(n);
  for (Eigen::Index i = 0; i < n; ++i) start(i) = 1.0 + static_cast<double>(i) / static_cast<double>(n);
  project(start);
  start.normalize();

  const int k_max = static_cast<int>(std::min<Eigen::Index>(opt.krylov_dim, n - 1));
  double residual = 0.0;
  double lambda = 0.0;
  for (int restart = 0; restart < opt.max_restarts; ++restart) {
    Eigen::MatrixXd basis(n, k_max);
    Eigen::VectorXd alpha(k_max), beta(k_max);
    basis.col(0) = start;
    int k = 0;
    for (; k < k_max; ++k) {
      Eigen::VectorXd w = apply(basis.col(k));
      alpha(k) = basis.col(k).dot(w);
      // Full reorthogonalization, twice.
      for (int pass = 0; pass < 2; ++pass) {
        w -= basis.leftCols(k + 1) * (basis.leftCols(k + 1).transpose() * w);
        project(w);
      }
      beta(k) = w.norm();
      if (k + 1 == k_max || beta(k) < 1e-14) {
        ++k;
        break;
      }
      basis.col(k + 1) = w / beta(k);
    }
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
      t(i, i) = alpha(i);
      if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = beta(i);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(t);
    Eigen::VectorXd v = basis.leftCols(k) * small.eigenvectors().col(k - 1);
    project(v);
    v.normalize();
    const Eigen::VectorXd lv = v - m * v;
    lambda = v.dot(lv);
    residual = (lv - lambda * v).norm();
    if (residual < opt.tolerance) return {lambda, v};
    start = v;
  }
  std::ostringstream msg;
  msg << "Fiedler eigensolver did not converge: n=" << n << " restarts=" << opt.max_restarts
      << " krylov_dim=" << k_max << " residual=" << residual << " eigenvalue=" << lambda;
  throw NumericalError(msg.str());
}

}  // namespace

Eigen::MatrixXd normalized_laplacian(const Cloud& x) {
  const Eigen::MatrixXd m = normalized_affinity(x, nullptr);
  return Eigen::MatrixXd::Identity(m.rows(), m.cols()) - m;
}

FiedlerResult fiedler_order(const Cloud& x, const SpectralOptions& options) {
  const Eigen::Index n = x.rows();
  if (n < 3) throw InvalidArgument("fiedler_order needs at least 3 points");
  if (!x.allFinite()) throw NumericalError("fiedler_order: non-finite coordinates");
  Eigen::VectorXd sqrt_degree;
  const Eigen::MatrixXd m = normalized_affinity(x, &sqrt_degree);

  FiedlerResult out;
  if (n <= options.dense_limit) {
    const Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(n, n) - m;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
    if (solver.info() != Eigen::Success) {
      throw NumericalError("dense eigensolver failed on " + std::to_string(n) + "x" +
                           std::to_string(n) + " Laplacian");
    }
    out.eigenvalue = solver.eigenvalues()(1);
    out.vector = solver.eigenvectors().col(1).normalized();
  } else {
    auto [lambda, v] = lanczos_fiedler(m, sqrt_degree, options);
    out.eigenvalue = lambda;
    out.vector = std::move(v);
  }

  const double skew = out.vector.array().cube().sum();
  if (std::abs(skew) < 1e-12) {
    out.sign_tie = true;
  } else if (skew < 0.0) {
    out.vector = -out.vector;
  }

  out.perm.resize(static_cast<std::size_t>(n));
  std::iota(out.perm.begin(), out.perm.end(), 0);
  std::stable_sort(out.perm.begin(), out.perm.end(),
                   [&](int a, int b) { return out.vector(a) < out.vector(b); });
  return out;
}

CanonicalFrame canonical_frame(const Cloud& x, const SpectralOptions& options) {
  const int n = static_cast<int>(x.rows());
  auto spectral = fiedler_order(x, options);

  CanonicalFrame f;
  f.perm = std::move(spectral.perm);
  f.flags.sign_tie = spectral.sign_tie;
  f.mean = centroid(x);

  Vec2 u = Vec2::Zero();
  std::vector<double> weight(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    weight[static_cast<std::size_t>(i)] = -1.0 + 2.0 * i / static_cast<double>(n - 1);
    u += weight[static_cast<std::size_t>(i)] * (x.row(f.perm[static_cast<std::size_t>(i)]).transpose() - f.mean);
  }
  if (u.norm() < 1e-9) {
    f.flags.zero_orientation = true;
    f.rotation = 0.0;
  } else {
    f.rotation = std::numbers::pi / 2.0 - std::atan2(u.y(), u.x());
  }

  const double c = std::cos(f.rotation);
  const double s = std::sin(f.rotation);
  double aggregate = 0.0;
  for (int i = 0; i < n; ++i) {
    if (weight[static_cast<std::size_t>(i)] <= 0.0) continue;
    const Vec2 p = x.row(f.perm[static_cast<std::size_t>(i)]).transpose() - f.mean;
    aggregate += c * p.x() - s * p.y();
  }
  if (std::abs(aggregate) < 1e-12) {
    f.flags.reflect_tie = true;
  } else {
    f.reflect = aggregate < 0.0;
  }
  return f;
}

namespace {

void check_size(const CanonicalFrame& f, const Cloud& x) {
  if (x.rows() != f.size()) {
    throw InvalidArgument("frame has " + std::to_string(f.size()) + " nodes, cloud has " +
                          std::to_string(x.rows()));
  }
}

}  // namespace

Cloud apply_linear(const CanonicalFrame& f, const Cloud& v) {
  check_size(f, v);
  const Eigen::Matrix2d a = f.linear();
  Cloud out(v.rows(), 2);
  for (int i = 0; i < f.size(); ++i) {
    out.row(i) = v.row(f.perm[static_cast<std::size_t>(i)]) * a.transpose();
  }
  return out;
}

Cloud apply_frame(const CanonicalFrame& f, const Cloud& x) {
  check_size(f, x);
  Cloud shifted = x;
  shifted.rowwise() -= f.mean.transpose();
  return apply_linear(f, shifted);
}

Cloud restore_velocity(const CanonicalFrame& f, const Cloud& v_can) {
  check_size(f, v_can);
  const Eigen::Matrix2d a = f.linear();
  Cloud out(v_can.rows(), 2);
  for (int i = 0; i < f.size(); ++i) {
    out.row(f.perm[static_cast<std::size_t>(i)]) = v_can.row(i) * a;
  }
  return out;
}

}  // namespace cycflow
