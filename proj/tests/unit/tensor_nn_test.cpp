#include <doctest.h>

#include <cmath>

#include "prefalign/adam.hpp"
#include "prefalign/error.hpp"
#include "prefalign/mlp.hpp"
#include "test_util.hpp"

using namespace prefalign;

namespace {

// Straightforward loops, no Eigen products.
Eigen::VectorXd naive_forward(const MlpParams<double>& p, Eigen::VectorXd x) {
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    const auto& l = p.layers[k];
    Eigen::VectorXd y(l.out_dim());
    for (Eigen::Index i = 0; i < l.out_dim(); ++i) {
      double acc = l.bias[i];
      for (Eigen::Index j = 0; j < l.in_dim(); ++j) acc += l.weight(i, j) * x[j];
      y[i] = (k + 1 < p.layers.size()) ? std::tanh(acc) : acc;
    }
    x = y;
  }
  return x;
}

Tensor random_vector(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  return Tensor::vector(rng.normal_vector(n));
}

}  // namespace

TEST_CASE("tensor shape must match data length") {
  CHECK_NOTHROW(Tensor(Eigen::VectorXd::Zero(6), {2, 3}));
  try {
    Tensor(Eigen::VectorXd::Zero(5), {2, 3});
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.category() == "shape-mismatch");
  }
}

TEST_CASE("zero network gives zero output") {
  auto p = init_mlp(5, {4}, 3, 17).zeros_like();
  const Tensor out = mlp_forward(p, random_vector(5, 1));
  CHECK(out.data.isZero(0.0));
}

TEST_CASE("identity single layer passes input through") {
  MlpParams<double> p;
  p.layers.push_back({Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Zero(4)});
  const Tensor v = random_vector(4, 2);
  CHECK(mlp_forward(p, v).data == v.data);
}

TEST_CASE("seed-17 init matches a naive forward pass") {
  const auto p = init_mlp(7, {6, 5}, 3, 17);
  const Tensor x = random_vector(7, 3);
  const Eigen::VectorXd expect = naive_forward(p, x.data);
  const Tensor got = mlp_forward(p, x);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(got.data[i] == doctest::Approx(expect[i]).epsilon(1e-13));
}

TEST_CASE("init is glorot-uniform and deterministic") {
  const auto a = init_mlp(30, {20}, 10, 17);
  const auto b = init_mlp(30, {20}, 10, 17);
  CHECK(a == b);
  CHECK_FALSE(a == init_mlp(30, {20}, 10, 18));
  const double bound0 = std::sqrt(6.0 / (30 + 20));
  CHECK(a.layers[0].weight.cwiseAbs().maxCoeff() <= bound0);
  CHECK(a.layers[0].bias.isZero(0.0));
  CHECK(a.hidden_dims() == std::vector<Eigen::Index>{20});
}

TEST_CASE("forward rejects wrong input length") {
  const auto p = init_mlp(5, {4}, 3, 17);
  try {
    mlp_forward(p, random_vector(6, 1));
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.category() == "shape-mismatch");
    CHECK(std::string(e.what()).find("6") != std::string::npos);
  }
}

// Holds once the layers are large enough for Eigen's blocked product, which
// is the regime of every denoiser; tiny layers take a different code path.
TEST_CASE("batch columns equal single-sample results bit for bit") {
  const auto p = init_mlp(120, {64}, 48, 17);
  Rng rng(4);
  Eigen::MatrixXd x(120, 37);
  rng.fill_normal(x);
  for (int n : {1, 2, 5, 16, 37}) {
    const auto trace = mlp_forward_batch(p, x.leftCols(n));
    for (int j = 0; j < n; ++j) {
      const auto single = mlp_forward(p, Tensor::vector(x.col(j)));
      CHECK(trace.output().col(j) == single.data);
    }
  }
}

TEST_CASE("zero upstream gives zero gradients") {
  const auto p = init_mlp(5, {4}, 3, 17);
  const auto g = mlp_backward(p, random_vector(5, 1), Tensor::zeros({3}));
  CHECK(g.param_grads == p.zeros_like());
  CHECK(g.input_grad.data.isZero(0.0));
}

TEST_CASE("linear layer with sum loss has outer(1, x) weight gradient") {
  MlpParams<double> p;
  p.layers.push_back({Eigen::MatrixXd::Random(3, 4), Eigen::VectorXd::Zero(3)});
  const Tensor x = random_vector(4, 5);
  const auto g = mlp_backward(p, x, Tensor::vector(Eigen::VectorXd::Ones(3)));
  const Eigen::MatrixXd expect = Eigen::VectorXd::Ones(3) * x.data.transpose();
  CHECK(g.param_grads.layers[0].weight == expect);
  CHECK(g.param_grads.layers[0].bias == Eigen::VectorXd::Ones(3));
}

TEST_CASE("backprop matches central differences on random nets") {
  for (std::uint64_t trial = 0; trial < 24; ++trial) {
    Rng shape_rng(100 + trial);
    const Eigen::Index in = 2 + static_cast<Eigen::Index>(shape_rng.below(6));
    const Eigen::Index out = 1 + static_cast<Eigen::Index>(shape_rng.below(4));
    std::vector<Eigen::Index> hidden;
    for (std::uint64_t k = 0, n = 1 + shape_rng.below(2); k < n; ++k)
      hidden.push_back(2 + static_cast<Eigen::Index>(shape_rng.below(6)));
    const auto p = init_mlp(in, hidden, out, 200 + trial);
    const Tensor x = random_vector(in, 300 + trial);
    const Tensor head = random_vector(out, 400 + trial);  // loss = head . output

    auto loss = [&](const MlpParams<double>& q) { return head.data.dot(mlp_forward(q, x).data); };
    const auto g = mlp_backward(p, x, head);
    CHECK(testutil::fd_check(p, g.param_grads, loss, 40, trial) < 1e-4);

    for (Eigen::Index i = 0; i < in; ++i) {
      Tensor up = x, down = x;
      up.data[i] += 1e-5;
      down.data[i] -= 1e-5;
      const double fd = (head.data.dot(mlp_forward(p, up).data) - head.data.dot(mlp_forward(p, down).data)) / 2e-5;
      CHECK(testutil::rel_error(g.input_grad.data[i], fd) < 1e-4);
    }
  }
}

TEST_CASE("adam: zero gradient leaves params, advances step") {
  auto p = init_mlp(3, {2}, 1, 17);
  const auto before = p;
  auto st = AdamState<double>::for_params(p, 0.1);
  adam_step(st, p, p.zeros_like());
  CHECK(p == before);
  CHECK(st.step == 1);
}

TEST_CASE("adam: first step on a scalar moves by about lr") {
  MlpParams<double> p;
  p.layers.push_back({Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1)});
  auto g = p.zeros_like();
  g.layers[0].weight(0, 0) = 1.0;
  auto st = AdamState<double>::for_params(p, 0.1);
  adam_step(st, p, g);
  // m_hat = 1, v_hat = 1 after bias correction
  CHECK(p.layers[0].weight(0, 0) == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-15));
  CHECK(p.layers[0].bias[0] == 0.0);
}

TEST_CASE("adam: identical runs are bitwise identical") {
  auto run = [] {
    auto p = init_mlp(4, {3}, 2, 17);
    auto st = AdamState<double>::for_params(p, 1e-2);
    const Tensor x = random_vector(4, 9);
    for (int i = 0; i < 5; ++i) {
      const auto g = mlp_backward(p, x, mlp_forward(p, x));
      adam_step(st, p, g.param_grads);
    }
    return p;
  };
  CHECK(run() == run());
}

TEST_CASE("adam rejects non-finite gradients") {
  auto p = init_mlp(3, {2}, 1, 17);
  auto st = AdamState<double>::for_params(p, 0.1);
  auto g = p.zeros_like();
  g.layers[1].bias[0] = std::nan("");
  try {
    adam_step(st, p, g);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.category() == "non-finite");
  }
}

TEST_CASE("float instantiation works") {
  const auto p = init_mlp<float>(4, {3}, 2, 17);
  const auto out = mlp_forward(p, BasicTensor<float>::vector(Eigen::VectorXf::Ones(4)));
  CHECK(out.size() == 2);
  CHECK(out.all_finite());
}
