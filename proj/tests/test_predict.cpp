#include <doctest.h>

#include <cmath>

#include "kgtrust/predict.hpp"
#include "kgtrust/train.hpp"
#include "support.hpp"

using namespace kgtrust;

namespace {

PredictorParams zero_predictor(int in) {
  std::mt19937_64 rng(1);
  PredictorParams p = init_predictor(in, {}, rng);
  p.layers[0].weight.setZero();
  p.layers[0].bias.setZero();
  return p;
}

}  // namespace

TEST_CASE("zero weights predict an even split") {
  auto p = zero_predictor(6);
  Eigen::VectorXd a = Eigen::VectorXd::Random(3), b = Eigen::VectorXd::Random(3);
  Eigen::Vector2d out = predict_pair(a, b, p);
  CHECK(out(0) == doctest::Approx(0.5));
  CHECK(out(1) == doctest::Approx(0.5));
}

TEST_CASE("pair order matters") {
  std::mt19937_64 rng(2);
  PredictorParams p = init_predictor(4, {}, rng);
  Eigen::VectorXd a(2), b(2);
  a << 1, 0;
  b << 0, 1;
  CHECK(std::abs(predict_pair(a, b, p)(1) - predict_pair(b, a, p)(1)) > 1e-6);
}

TEST_CASE("property: affine plus softmax oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    PredictorParams p = init_predictor(6, {}, rng);
    p.layers[0].bias = random_matrix(1, 2, rng);
    Eigen::VectorXd a = random_matrix(3, 1, rng), b = random_matrix(3, 1, rng);
    Eigen::VectorXd x(6);
    x << a, b;
    double l[2];
    for (int k = 0; k < 2; ++k) {
      l[k] = p.layers[0].bias(0, k);
      for (int c = 0; c < 6; ++c) l[k] += p.layers[0].weight(k, c) * x(c);
    }
    const double p1 = std::exp(l[1]) / (std::exp(l[0]) + std::exp(l[1]));
    Eigen::Vector2d got = predict_pair(a, b, p);
    CHECK(got(1) == doctest::Approx(p1).epsilon(1e-12));
    CHECK(got.sum() == doctest::Approx(1.0));
  }
}

TEST_CASE("hidden layers use relu") {
  std::mt19937_64 rng(4);
  PredictorParams p = init_predictor(2, {3}, rng);
  REQUIRE(p.layers.size() == 2);
  Eigen::VectorXd a(1), b(1);
  a << 0.7;
  b << -1.1;
  Eigen::VectorXd x(2);
  x << a, b;
  Eigen::VectorXd h = (p.layers[0].weight * x + p.layers[0].bias.transpose()).cwiseMax(0.0);
  Eigen::VectorXd l = p.layers[1].weight * h + p.layers[1].bias.transpose();
  CHECK(predict_pair(a, b, p)(1) == doctest::Approx(1.0 / (1.0 + std::exp(l(0) - l(1)))));
}

TEST_CASE("batch loss") {
  Matrix Z = Matrix::Ones(3, 2);
  auto zero = zero_predictor(4);
  std::vector<TrustSample> s{{0, 1, 1}, {1, 2, 0}};
  CHECK(batch_loss(s, Z, zero) == doctest::Approx(std::log(2.0)));
  auto sure = zero;
  sure.layers[0].bias << -100.0, 100.0;
  CHECK(batch_loss({{0, 1, 1}}, Z, sure) < 1e-12);
  std::mt19937_64 rng(5);
  PredictorParams p = init_predictor(4, {}, rng);
  Matrix Zr = random_matrix(3, 2, rng);
  double expect = 0.0;
  for (const auto& t : s) expect -= std::log(predict_pair(Zr.row(t.trustor).transpose(), Zr.row(t.trustee).transpose(), p)(t.label));
  CHECK(batch_loss(s, Zr, p) == doctest::Approx(expect / 2.0).epsilon(1e-12));
}

TEST_CASE("metrics") {
  auto all = metrics({0.9, 0.2, 0.7}, {1, 0, 1});
  CHECK(all.accuracy == 1.0);
  CHECK(all.f1 == 1.0);
  // tp 1, fp 1, fn 0, tn 0
  auto half = metrics({0.9, 0.8}, {1, 0});
  CHECK(half.accuracy == 0.5);
  CHECK(half.f1 == doctest::Approx(2.0 / 3.0));
  auto none = metrics({0.1, 0.2}, {1, 1});
  CHECK(none.accuracy == 0.0);
  CHECK(none.f1 == 0.0);
  CHECK(metrics({0.5}, {0}).accuracy == 1.0);
  CHECK_THROWS_AS(metrics({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(metrics({0.1}, {1, 0}), std::invalid_argument);
}

TEST_CASE("property: metrics against a confusion count") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 30);
    std::vector<double> p;
    std::vector<int> y;
    int tp = 0, fp = 0, fn = 0, tn = 0;
    for (int i = 0; i < n; ++i) {
      p.push_back(u(rng));
      y.push_back(static_cast<int>(rng() % 2));
      const bool pred = p.back() > 0.5;
      if (pred && y.back()) ++tp;
      else if (pred) ++fp;
      else if (y.back()) ++fn;
      else ++tn;
    }
    auto m = metrics(p, y);
    CHECK(m.accuracy == doctest::Approx(static_cast<double>(tp + tn) / n));
    const double f1 = tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
    CHECK(m.f1 == doctest::Approx(f1));
    CHECK(m.accuracy >= 0.0);
    CHECK(m.f1 <= 1.0);
  }
}

TEST_CASE("adam on the predictor lowers the loss") {
  std::mt19937_64 rng(7);
  Matrix Z = random_matrix(6, 3, rng);
  std::vector<TrustSample> s{{0, 1, 1}, {2, 3, 1}, {4, 5, 0}, {1, 0, 0}, {3, 4, 1}};
  PredictorParams p = init_predictor(6, {}, rng);
  AdamState state;
  AdamOptions opt;
  opt.learning_rate = 0.05;
  opt.weight_decay = 0.0;
  double previous = batch_loss(s, Z, p);
  for (int step = 0; step < 20; ++step) {
    Tape tape;
    PredictorVars vars = record_predictor(tape, p, true);
    Var loss = ad::softmax_cross_entropy(pair_logits(tape, tape.constant(Z), s, vars), {1, 1, 0, 0, 1});
    CHECK(loss.value()(0, 0) == doctest::Approx(previous).epsilon(1e-10));
    tape.backward(loss);
    adam_update({&p.layers[0].weight, &p.layers[0].bias}, {true, false},
                {vars.weight[0].grad(), vars.bias[0].grad()}, state, opt);
    const double now = batch_loss(s, Z, p);
    CHECK(now < previous);
    previous = now;
  }
}
