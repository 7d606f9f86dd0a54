#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "fakeaudio/error.hpp"
#include "fakeaudio/nn.hpp"
#include "fakeaudio/random.hpp"

using namespace fakeaudio;
using namespace fakeaudio::nn;

namespace {

Eigen::MatrixXd random_batch(Eigen::Index n, Eigen::Index dim, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) x(i, j) = rng.uniform(-1.0, 1.0);
  return x;
}

double batch_loss(const MlpModel& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForwardCache& masks) {
  // Same masks as the cached pass, recomputed by hand.
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    Eigen::MatrixXd z = a * m.layers[l].weight;
    z.rowwise() += m.layers[l].bias.transpose();
    if (l + 1 < kNumLayers) {
      a = z.cwiseMax(0.0);
      if (masks.dropout_scale[l].size()) a.array() *= masks.dropout_scale[l].array();
    } else {
      a = z;
    }
  }
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double z = a(i, 0);
    loss += std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - y[i] * z;
  }
  return loss / static_cast<double>(x.rows());
}

}  // namespace

TEST_CASE("init_model shapes, bounds and determinism") {
  const auto m = init_model(128, 0.2, 42);
  CHECK(m.layers[0].weight.rows() == 128);
  CHECK(m.layers[0].weight.cols() == 512);
  CHECK(m.layers[1].weight.rows() == 512);
  CHECK(m.layers[1].weight.cols() == 1024);
  CHECK(m.layers[2].weight.rows() == 1024);
  CHECK(m.layers[2].weight.cols() == 512);
  CHECK(m.layers[3].weight.rows() == 512);
  CHECK(m.layers[3].weight.cols() == 1);
  for (const auto& layer : m.layers) CHECK(layer.bias.isZero(0.0));
  CHECK(m.layers[0].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 128));
  CHECK(m.layers[0].weight.cwiseAbs().maxCoeff() > 0.2);
  CHECK(m.layers[1].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 512));
  CHECK(init_model(128, 0.2, 42) == m);
  CHECK_FALSE(init_model(128, 0.2, 43) == m);
  CHECK_THROWS_AS(init_model(0, 0.2, 1), ConfigError);
  CHECK_THROWS_AS(init_model(4, 1.0, 1), ConfigError);
}

TEST_CASE("forward basics") {
  auto m = init_model(8, 0.2, 1);
  const auto x = random_batch(5, 8, 2);

  SUBCASE("zero parameters give 0.5") {
    auto z = m;
    z.layers = zeros_like(z);
    const auto r = forward(z, x, Mode::kTrain, 3);
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(r.likelihoods[i] == 0.5);
  }
  SUBCASE("eval ignores the dropout seed") {
    CHECK(forward(m, x, Mode::kEval, 1).likelihoods == forward(m, x, Mode::kEval, 999).likelihoods);
    CHECK(predict(m, x) == forward(m, x, Mode::kEval).likelihoods);
  }
  SUBCASE("train with p = 0 equals eval") {
    m.dropout_p = 0.0;
    CHECK(forward(m, x, Mode::kTrain, 7).likelihoods == forward(m, x, Mode::kEval).likelihoods);
  }
  SUBCASE("train mode depends on the seed and is reproducible") {
    CHECK(forward(m, x, Mode::kTrain, 7).likelihoods == forward(m, x, Mode::kTrain, 7).likelihoods);
    CHECK(forward(m, x, Mode::kTrain, 7).likelihoods != forward(m, x, Mode::kTrain, 8).likelihoods);
  }
  SUBCASE("outputs lie in (0, 1)") {
    const auto y = forward(m, random_batch(64, 8, 5) * 100.0, Mode::kEval).likelihoods;
    CHECK(y.minCoeff() >= 0.0);
    CHECK(y.maxCoeff() <= 1.0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(forward(m, random_batch(2, 7, 1), Mode::kEval), ShapeError);
    auto bad = x;
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(forward(m, bad, Mode::kEval), ValidationError);
  }
}

TEST_CASE("dropout expectation matches eval activations") {
  const auto m = init_model(16, 0.2, 9);
  const auto x = random_batch(1, 16, 10);
  const auto eval_act = forward(m, x, Mode::kEval).cache.post[0];
  const int seeds = 4000;
  const int units = 16;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(units), sq = Eigen::VectorXd::Zero(units);
  for (int s = 0; s < seeds; ++s) {
    const auto a = forward(m, x, Mode::kTrain, static_cast<std::uint64_t>(s)).cache.post[0];
    for (int j = 0; j < units; ++j) {
      sum[j] += a(0, j);
      sq[j] += a(0, j) * a(0, j);
    }
  }
  for (int j = 0; j < units; ++j) {
    const double mean = sum[j] / seeds;
    const double var = sq[j] / seeds - mean * mean;
    const double se = std::sqrt(std::max(var, 0.0) / seeds);
    CHECK(std::abs(mean - eval_act(0, j)) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("bce_loss") {
  CHECK(bce_loss(1, 1) == 0.0);
  CHECK(bce_loss(0, 0) == 0.0);
  CHECK(bce_loss(1, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(bce_loss(0, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(bce_loss(1, 0) == doctest::Approx(-std::log(1e-7)));
  CHECK(bce_loss(0, 1) == doctest::Approx(-std::log(1e-7)));
  CHECK(bce_loss(1, 0) <= -std::log(1e-7));
  CHECK(bce_loss(1, 0) == doctest::Approx(16.118095651));

  double prev = bce_loss(1, 1e-7);
  for (double p = 2e-7; p < 1.0 - 1e-7; p *= 1.5) {
    const double cur = bce_loss(1, p);
    CHECK(cur < prev);
    CHECK(cur >= 0.0);
    prev = cur;
  }
  CHECK(bce_loss(1, 0.3) > 0.0);
  CHECK(bce_loss(0, 0.3) > 0.0);

  Eigen::VectorXd y(3), p(3);
  y << 1, 0, 1;
  p << 0.5, 0.5, 1.0;
  CHECK(mean_bce_loss(y, p) == doctest::Approx(2.0 * std::log(2.0) / 3.0));
}

TEST_CASE("backward") {
  const auto m = init_model(8, 0.2, 3);
  const auto x = random_batch(4, 8, 4);
  Eigen::VectorXd y(4);
  y << 1, 0, 0, 1;

  SUBCASE("zero model with y = 0.5 has zero output bias gradient") {
    auto z = m;
    z.layers = zeros_like(z);
    const auto fwd = forward(z, x, Mode::kEval);
    const auto g = backward(z, fwd.cache, Eigen::VectorXd::Constant(4, 0.5));
    CHECK(g[3].bias[0] == 0.0);
  }
  SUBCASE("duplicating the batch leaves gradients unchanged") {
    const auto g1 = backward(m, forward(m, x, Mode::kEval).cache, y);
    Eigen::MatrixXd x2(8, 8);
    x2 << x, x;
    Eigen::VectorXd y2(8);
    y2 << y, y;
    const auto g2 = backward(m, forward(m, x2, Mode::kEval).cache, y2);
    for (std::size_t l = 0; l < kNumLayers; ++l) {
      CHECK((g1[l].weight - g2[l].weight).cwiseAbs().maxCoeff() <= 1e-15);
      CHECK((g1[l].bias - g2[l].bias).cwiseAbs().maxCoeff() <= 1e-15);
    }
  }
  SUBCASE("sampled finite differences") {
    const auto fwd = forward(m, x, Mode::kTrain, 77);
    const auto g = backward(m, fwd.cache, y);
    Rng pick(5);
    const double h = 1e-5;
    int checked = 0;
    for (int trial = 0; trial < 400; ++trial) {
      const std::size_t l = pick.uniform_index(kNumLayers);
      const bool bias = pick.uniform01() < 0.2;
      auto plus = m, minus = m;
      double analytic;
      if (bias) {
        const auto k = static_cast<Eigen::Index>(pick.uniform_index(m.layers[l].bias.size()));
        plus.layers[l].bias[k] += h;
        minus.layers[l].bias[k] -= h;
        analytic = g[l].bias[k];
      } else {
        const auto i = static_cast<Eigen::Index>(pick.uniform_index(m.layers[l].weight.rows()));
        const auto j = static_cast<Eigen::Index>(pick.uniform_index(m.layers[l].weight.cols()));
        plus.layers[l].weight(i, j) += h;
        minus.layers[l].weight(i, j) -= h;
        analytic = g[l].weight(i, j);
      }
      const double fd = (batch_loss(plus, x, y, fwd.cache) - batch_loss(minus, x, y, fwd.cache)) / (2 * h);
      const double scale = std::max({std::abs(analytic), std::abs(fd), 1e-6});
      CHECK(std::abs(analytic - fd) / scale < 1e-4);
      ++checked;
    }
    CHECK(checked == 400);
  }
  SUBCASE("mismatches") {
    const auto fwd = forward(m, x, Mode::kEval);
    CHECK_THROWS_AS(backward(m, fwd.cache, Eigen::VectorXd::Zero(3)), StateError);
    const auto other = init_model(9, 0.2, 3);
    CHECK_THROWS_AS(backward(other, fwd.cache, y), StateError);
  }
}

TEST_CASE("adam_step") {
  SUBCASE("first step from zero with unit gradient") {
    auto m = init_model(2, 0.2, 1);
    m.layers = zeros_like(m);
    auto state = AdamState::for_model(m);
    auto g = zeros_like(m);
    for (auto& layer : g) {
      layer.weight.setOnes();
      layer.bias.setOnes();
    }
    adam_step(m, state, g);
    CHECK(state.step == 1);
    const double expected = -7e-4 / (1.0 + 1e-8);
    for (const auto& layer : m.layers) {
      CHECK((layer.weight.array() - expected).abs().maxCoeff() <= 1e-12);
      CHECK((layer.bias.array() - expected).abs().maxCoeff() <= 1e-12);
    }
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    auto m = init_model(3, 0.2, 2);
    const auto before = m;
    auto state = AdamState::for_model(m);
    adam_step(m, state, zeros_like(m));
    CHECK(m == before);
    CHECK(state.step == 1);
  }
  SUBCASE("identical gradient histories give identical updates") {
    auto m = init_model(3, 0.2, 2);
    m.layers[0].weight(0, 0) = m.layers[0].weight(1, 1) = 0.25;
    auto state = AdamState::for_model(m);
    Rng rng(8);
    for (int t = 0; t < 20; ++t) {
      auto g = zeros_like(m);
      g[0].weight(0, 0) = g[0].weight(1, 1) = rng.uniform(-1, 1);
      adam_step(m, state, g);
    }
    CHECK(m.layers[0].weight(0, 0) == m.layers[0].weight(1, 1));
    CHECK(state.v[0].weight.minCoeff() >= 0.0);
  }
  SUBCASE("two steps against a hand recurrence") {
    auto m = init_model(2, 0.2, 1);
    auto state = AdamState::for_model(m);
    const double theta0 = m.layers[0].weight(0, 0);
    const double g1 = 0.3, g2 = -0.8;
    for (double gv : {g1, g2}) {
      auto g = zeros_like(m);
      g[0].weight(0, 0) = gv;
      adam_step(m, state, g);
    }
    const double m1 = 0.1 * g1, v1 = 0.001 * g1 * g1;
    const double mh1 = m1 / 0.1, vh1 = v1 / 0.001;
    const double th1 = theta0 - 7e-4 * mh1 / (std::sqrt(vh1) + 1e-8);
    const double m2 = 0.9 * m1 + 0.1 * g2, v2 = 0.999 * v1 + 0.001 * g2 * g2;
    const double mh2 = m2 / (1 - 0.81), vh2 = v2 / (1 - 0.999 * 0.999);
    const double th2 = th1 - 7e-4 * mh2 / (std::sqrt(vh2) + 1e-8);
    CHECK(m.layers[0].weight(0, 0) == doctest::Approx(th2).epsilon(1e-13));
  }
  SUBCASE("non-finite gradient names the layer and changes nothing") {
    auto m = init_model(3, 0.2, 2);
    const auto before = m;
    auto state = AdamState::for_model(m);
    const auto state_before = state;
    auto g = zeros_like(m);
    g[2].bias[5] = std::numeric_limits<double>::infinity();
    try {
      adam_step(m, state, g);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("Linear3") != std::string::npos);
    }
    CHECK(m == before);
    CHECK(state == state_before);
  }
  SUBCASE("shape mismatch") {
    auto m = init_model(3, 0.2, 2);
    auto state = AdamState::for_model(m);
    const auto other = init_model(4, 0.2, 2);
    CHECK_THROWS_AS(adam_step(m, state, zeros_like(other)), ShapeError);
  }
}

TEST_CASE("checkpoint round-trip") {
  auto m = init_model(5, 0.35, 12);
  auto state = AdamState::for_model(m, AdamHyper{.lr = 1e-3});
  auto g = zeros_like(m);
  g[1].weight.setConstant(0.01);
  adam_step(m, state, g);

  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  write_checkpoint(buf, m, &state);
  const auto ck = read_checkpoint(buf);
  CHECK(ck.model == m);
  REQUIRE(ck.adam.has_value());
  CHECK(*ck.adam == state);

  std::stringstream plain(std::ios::in | std::ios::out | std::ios::binary);
  write_checkpoint(plain, m);
  const auto bytes = plain.str();
  CHECK(bytes.substr(0, 4) == "MLPC");
  CHECK_FALSE(read_checkpoint(plain).adam.has_value());

  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream bad_in(bad);
  CHECK_THROWS_AS(read_checkpoint(bad_in), FormatError);
  std::istringstream short_in(bytes.substr(0, bytes.size() - 9));
  CHECK_THROWS_AS(read_checkpoint(short_in), IoError);
}
