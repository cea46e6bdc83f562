#include <random>

#include "bubbledyn/models.hpp"
#include "bubbledyn/nn.hpp"
#include "doctest.h"

using namespace bubbledyn;
using nn::Tensor;

namespace {

Tensor<double> random_input(std::vector<int> shape, uint64_t seed) {
  Tensor<double> t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (auto& v : t.d) v = nd(rng);
  return t;
}

}  // namespace

TEST_CASE("dense layer gradients match central differences") {
  std::mt19937_64 rng(1);
  nn::Sequential<double> net;
  net.add<nn::Dense<double>>(5, 4, rng);
  CHECK(gradient_check(net, random_input({3, 5}, 2), 3) <= 1e-7);
}

TEST_CASE("conv and deconv layer gradients match central differences") {
  std::mt19937_64 rng(4);
  nn::Sequential<double> conv;
  conv.add<nn::Conv2d<double>>(2, 3, 3, rng);
  CHECK(gradient_check(conv, random_input({2, 2, 6, 7}, 5), 6) <= 1e-6);

  nn::Sequential<double> deconv;
  deconv.add<nn::Deconv2d<double>>(3, 2, 3, rng);
  CHECK(gradient_check(deconv, random_input({2, 3, 4, 5}, 7), 8) <= 1e-6);
}

TEST_CASE("batchnorm gradients match central differences") {
  std::mt19937_64 rng(9);
  nn::Sequential<double> net;
  net.add<nn::Dense<double>>(3, 6, rng);
  net.add<nn::BatchNorm<double>>(6);
  CHECK(gradient_check(net, random_input({8, 3}, 10), 11) <= 1e-6);
}

TEST_CASE("composite mlp with relu passes a gradient check") {
  std::mt19937_64 rng(12);
  nn::Sequential<double> net;
  net.add<nn::Dense<double>>(7, 16, rng);
  net.add<nn::ReLU<double>>();
  net.add<nn::Dense<double>>(16, 16, rng);
  net.add<nn::ReLU<double>>();
  net.add<nn::Dense<double>>(16, 5, rng);
  CHECK(gradient_check(net, random_input({4, 7}, 13), 14) <= 1e-6);
}

TEST_CASE("batchnorm normalizes per channel in train mode") {
  nn::BatchNorm<double> bn(3);
  Tensor<double> x = random_input({16, 3}, 20);
  Tensor<double> y = bn.forward(x, true);
  for (int ch = 0; ch < 3; ++ch) {
    double mean = 0.0, var = 0.0;
    for (int i = 0; i < 16; ++i) mean += y.d[size_t(i) * 3 + ch];
    mean /= 16.0;
    for (int i = 0; i < 16; ++i) {
      double d = y.d[size_t(i) * 3 + ch] - mean;
      var += d * d;
    }
    var /= 16.0;
    CHECK(std::abs(mean) <= 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));  // eps shifts variance
  }

  // Running stats start at (0, 1) and move 10% toward the batch stats.
  double bm = 0.0;
  for (int i = 0; i < 16; ++i) bm += x.d[size_t(i) * 3];
  bm /= 16.0;
  CHECK(bn.running_mean()[0] == doctest::Approx(0.1 * bm).epsilon(1e-12));

  // Inference on a constant batch uses running stats, not batch stats.
  Tensor<double> ones({4, 3});
  std::fill(ones.d.begin(), ones.d.end(), 1.0);
  Tensor<double> ye = bn.forward(ones, false);
  double expect = (1.0 - bn.running_mean()[1]) /
                  std::sqrt(bn.running_var()[1] + 1e-5);
  CHECK(ye.d[1] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("adam converges on a quadratic") {
  nn::Param<double> p;
  p.resize("w", {2});
  p.w = {5.0, -4.0};
  nn::Adam<double> opt({&p}, 0.05);
  for (int t = 0; t < 2000; ++t) {
    p.zero_grad();
    p.g[0] = 2.0 * (p.w[0] - 3.0);
    p.g[1] = 2.0 * (p.w[1] + 1.0);
    opt.step();
  }
  CHECK(p.w[0] == doctest::Approx(3.0).epsilon(1e-4));
  CHECK(p.w[1] == doctest::Approx(-1.0).epsilon(1e-4));
}

TEST_CASE("reshape round-trips and dense rejects bad input") {
  std::mt19937_64 rng(30);
  nn::Reshape<double> rs({2, 3});
  Tensor<double> x = random_input({4, 6}, 31);
  Tensor<double> y = rs.forward(x, true);
  CHECK(y.shape == std::vector<int>{4, 2, 3});
  Tensor<double> gx = rs.backward(y);
  CHECK(gx.shape == x.shape);
  CHECK(gx.d == x.d);

  nn::Dense<double> dense(5, 2, rng);
  CHECK_THROWS_AS(dense.forward(random_input({1, 4}, 32), true),
                  std::runtime_error);
}

TEST_CASE("relu tracks the smallest pre-activation margin") {
  nn::Sequential<double> net;
  auto* relu = net.add<nn::ReLU<double>>();
  Tensor<double> x({1, 3});
  x.d = {0.5, -0.01, 2.0};
  Tensor<double> y = net.forward(x, true);
  CHECK(y.d == std::vector<double>{0.5, 0.0, 2.0});
  CHECK(relu->min_margin() == doctest::Approx(0.01));
  CHECK(net.min_relu_margin() == doctest::Approx(0.01));
}
