#include "doctest.h"

#include "cycflow/checkpoint.hpp"
#include "cycflow/errors.hpp"
#include "cycflow/model.hpp"
#include "test_support.hpp"

#include <filesystem>
#include <map>

using namespace cycflow;
using namespace cycflow::testing;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.dim = 16;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.ff_mult = 2;
  cfg.t_dim = 8;
  cfg.seed = 3;
  return cfg;
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
  std::vector<Eigen::MatrixXd> ta, tb;
  a.for_each([&](const std::string&, const Eigen::MatrixXd& t) { ta.push_back(t); });
  b.for_each([&](const std::string&, const Eigen::MatrixXd& t) { tb.push_back(t); });
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i)
    if (ta[i].rows() != tb[i].rows() || ta[i].cols() != tb[i].cols() || ta[i] != tb[i]) return false;
  return true;
}

double max_abs_diff(const ModelParams& a, const ModelParams& b) {
  std::vector<Eigen::MatrixXd> ta, tb;
  a.for_each([&](const std::string&, const Eigen::MatrixXd& t) { ta.push_back(t); });
  b.for_each([&](const std::string&, const Eigen::MatrixXd& t) { tb.push_back(t); });
  double m = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i) m = std::max(m, (ta[i] - tb[i]).cwiseAbs().maxCoeff());
  return m;
}

// Central differences over every coordinate; returns the worst relative error.
template <typename LossFn>
double gradient_check(ModelParams params, const ModelParams& analytic, LossFn loss) {
  constexpr double h = 1e-4;
  std::vector<Eigen::MatrixXd*> tensors;
  std::vector<const Eigen::MatrixXd*> grads;
  params.for_each([&](const std::string&, Eigen::MatrixXd& t) { tensors.push_back(&t); });
  analytic.for_each([&](const std::string&, const Eigen::MatrixXd& t) { grads.push_back(&t); });
  double worst = 0.0;
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    Eigen::MatrixXd& t = *tensors[k];
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double orig = t.data()[i];
      t.data()[i] = orig + h;
      const double up = loss(params);
      t.data()[i] = orig - h;
      const double down = loss(params);
      t.data()[i] = orig;
      const double fd = (up - down) / (2.0 * h);
      const double g = grads[k]->data()[i];
      const double rel = std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-6});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

struct Batch {
  std::vector<Cloud> x0, x1;
  std::vector<double> t;
};

Batch random_batch(int items, int n, std::uint64_t seed) {
  Rng rng(seed);
  Batch b;
  for (int i = 0; i < items; ++i) {
    b.x0.push_back(random_cloud(n, rng, -0.5, 0.5));
    b.x1.push_back(random_cloud(n, rng, -0.5, 0.5));
    b.t.push_back(rng.uniform());
  }
  return b;
}

std::vector<FlowItem> flow_items(const Batch& b) {
  std::vector<FlowItem> items;
  for (std::size_t i = 0; i < b.x0.size(); ++i) items.push_back({&b.x0[i], &b.x1[i], b.t[i]});
  return items;
}

}  // namespace

TEST_CASE("initialization is deterministic and seed dependent") {
  const auto cfg = small_config();
  CHECK(params_equal(init_params(cfg), init_params(cfg)));
  auto other = cfg;
  other.seed = 4;
  CHECK_FALSE(params_equal(init_params(cfg), init_params(other)));
  CHECK(init_params(cfg).all_finite());
}

TEST_CASE("zero-initialized model outputs zero") {
  const auto p = init_params(small_config());
  Rng rng(1);
  const Cloud x0 = random_cloud(12, rng);
  const Cloud xt = random_cloud(12, rng);
  for (double t : {0.0, 0.3, 1.0}) CHECK(forward(p, t, xt, x0).isZero(0.0));
  const auto direct = init_params(small_config(), HeadInit::small_random);
  CHECK_FALSE(forward(direct, 0.0, x0, x0).isZero(0.0));
}

TEST_CASE("inconsistent configurations are rejected") {
  ModelConfig cfg;
  cfg.dim = 63;
  cfg.heads = 4;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  CHECK_THROWS_AS(init_params(cfg), InvalidArgument);
  ModelConfig odd;
  odd.dim = 12;
  odd.heads = 4;  // head width 3 cannot be rotated pairwise
  CHECK_THROWS_AS(odd.validate(), InvalidArgument);
  ModelConfig ok;
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("parameter names and counts") {
  auto p = init_params(small_config());
  std::map<std::string, std::pair<Eigen::Index, Eigen::Index>> shapes;
  p.for_each([&](const std::string& n, Eigen::MatrixXd& t) { shapes[n] = {t.rows(), t.cols()}; });
  CHECK(shapes.at("input.w") == std::pair<Eigen::Index, Eigen::Index>{4, 16});
  CHECK(shapes.at("blocks.0.modulation.w") == std::pair<Eigen::Index, Eigen::Index>{16, 96});
  CHECK(shapes.at("blocks.0.ff.0.w") == std::pair<Eigen::Index, Eigen::Index>{16, 32});
  CHECK(shapes.at("head.w") == std::pair<Eigen::Index, Eigen::Index>{16, 2});
  std::size_t total = 0;
  for (auto& [n, s] : shapes) total += static_cast<std::size_t>(s.first * s.second);
  CHECK(p.parameter_count() == total);
}

TEST_CASE("time embedding") {
  const auto f0 = time_features(0.0, 8);
  CHECK(f0.size() == 8);
  CHECK(f0.head(4).isZero(0.0));
  CHECK(f0.tail(4).isOnes(0.0));
  const auto f1 = time_features(0.37, 8);
  CHECK((f1.head(4).array().square() + f1.tail(4).array().square() - 1.0).abs().maxCoeff() < 1e-12);
  const auto p = random_params(small_config(), 2);
  CHECK(time_embedding(p, 0.1).size() == 16);
  CHECK((time_embedding(p, 0.1) - time_embedding(p, 0.9)).norm() > 1e-6);
}

TEST_CASE("forward shape, finiteness and positional sensitivity") {
  const auto p = random_params(small_config(), 5);
  Rng rng(2);
  for (int n : {1, 3, 50}) {
    const Cloud x0 = random_cloud(n, rng);
    const Cloud v = forward(p, 0.5, x0, x0);
    CHECK(v.rows() == n);
    CHECK(v.allFinite());
  }
  // Swapping two rows is not just a row swap of the output: positions are encoded.
  const Cloud x0 = random_cloud(6, rng);
  Order swap{1, 0, 2, 3, 4, 5};
  const Cloud a = forward(p, 0.5, x0, x0);
  const Cloud b = forward(p, 0.5, permute_rows(x0, swap), permute_rows(x0, swap));
  CHECK((permute_rows(a, swap) - b).cwiseAbs().maxCoeff() > 1e-8);
  CHECK_THROWS_AS(forward(p, 0.5, x0, random_cloud(5, rng)), InvalidArgument);
}

TEST_CASE("zero field loss equals mean displacement energy") {
  const auto p = init_params(small_config());
  const Batch b = random_batch(5, 9, 11);
  const auto items = flow_items(b);
  const auto lg = loss_and_grad(p, items);
  double expected = 0.0;
  for (std::size_t i = 0; i < b.x0.size(); ++i) expected += (b.x1[i] - b.x0[i]).squaredNorm() / 9.0;
  expected /= 5.0;
  CHECK(lg.loss == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("flow loss gradient matches finite differences") {
  const auto p = random_params(small_config(), 7);
  const Batch b = random_batch(3, 6, 12);
  const auto items = flow_items(b);
  const auto lg = loss_and_grad(p, items);
  const double worst = gradient_check(p, lg.grad, [&](const ModelParams& q) { return loss_and_grad(q, items).loss; });
  MESSAGE("worst relative error " << worst);
  CHECK(worst < 1e-4);
}

TEST_CASE("direct loss gradient matches finite differences") {
  const auto p = random_params(small_config(), 8);
  const Batch b = random_batch(3, 6, 13);
  std::vector<DirectItem> items;
  for (std::size_t i = 0; i < b.x0.size(); ++i) items.push_back({&b.x0[i], &b.x1[i]});
  const auto lg = direct_loss_and_grad(p, items);

  double manual = 0.0;
  for (std::size_t i = 0; i < b.x0.size(); ++i) {
    const Cloud out = normalize_directions(forward(p, 0.0, b.x0[i], b.x0[i]));
    Cloud target = b.x1[i];
    target.rowwise().normalize();
    manual += (out - target).squaredNorm() / 6.0;
  }
  CHECK(lg.loss == doctest::Approx(manual / 3.0).epsilon(1e-12));

  const double worst =
      gradient_check(p, lg.grad, [&](const ModelParams& q) { return direct_loss_and_grad(q, items).loss; });
  MESSAGE("worst relative error " << worst);
  CHECK(worst < 1e-4);
}

TEST_CASE("sharded gradients agree with the single-shard reduction") {
  const auto p = random_params(small_config(), 9);
  const Batch b = random_batch(7, 5, 14);
  const auto items = flow_items(b);
  const auto one = loss_and_grad(p, items, 1);
  const auto three = loss_and_grad(p, items, 3);
  CHECK(one.loss == doctest::Approx(three.loss).epsilon(1e-13));
  CHECK(max_abs_diff(one.grad, three.grad) < 1e-12);
  // Same shard count, same bits.
  const auto again = loss_and_grad(p, items, 3);
  CHECK(three.loss == again.loss);
  CHECK(params_equal(three.grad, again.grad));

  // Item order inside the batch does not matter beyond rounding.
  auto reversed = items;
  std::reverse(reversed.begin(), reversed.end());
  const auto rev = loss_and_grad(p, reversed, 1);
  CHECK(rev.loss == doctest::Approx(one.loss).epsilon(1e-13));
  CHECK(max_abs_diff(rev.grad, one.grad) < 1e-12);
}

TEST_CASE("normalize_directions") {
  Cloud v(3, 2);
  v << 3, 4, 0, 0, -1e3, 0;
  const Cloud u = normalize_directions(v);
  CHECK(u(0, 0) == doctest::Approx(0.6));
  CHECK(u(0, 1) == doctest::Approx(0.8));
  CHECK(u.row(1).isZero(0.0));
  CHECK(u(2, 0) == doctest::Approx(-1.0));
}

TEST_CASE("checkpoint round trip is bit exact") {
  Checkpoint ck{random_params(small_config(), 21), {}};
  ck.meta.objective = "direct";
  ck.meta.epochs = 17;
  ck.meta.final_loss = 0.123456789012345;
  ck.meta.dataset_fingerprint = "00ff00ff00ff00ff";
  const auto bytes = serialize_checkpoint(ck);
  const auto back = parse_checkpoint(bytes);
  CHECK(params_equal(ck.params, back.params));
  CHECK(back.params.config.seed == ck.params.config.seed);
  CHECK(back.params.config.dim == 16);
  CHECK(back.meta.objective == "direct");
  CHECK(back.meta.epochs == 17);
  CHECK(back.meta.final_loss == ck.meta.final_loss);
  CHECK(back.meta.dataset_fingerprint == ck.meta.dataset_fingerprint);
  CHECK(serialize_checkpoint(back) == bytes);

  const auto path = std::filesystem::temp_directory_path() / "cycflow_test_ckpt.bin";
  save_checkpoint(ck, path);
  CHECK(params_equal(load_checkpoint(path).params, ck.params));
  std::filesystem::remove(path);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto bytes = serialize_checkpoint({init_params(small_config()), {}});
  CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(parse_checkpoint(bad_magic), DataError);
  std::string bad_version = bytes;
  bad_version[8] = 9;
  CHECK_THROWS_AS(parse_checkpoint(bad_version), DataError);
  CHECK_THROWS_AS(parse_checkpoint(bytes + "x"), DataError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.bin"), DataError);
}
