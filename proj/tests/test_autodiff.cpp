#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pvqml/autodiff.hpp"
#include "pvqml/error.hpp"

using namespace pvqml;
using namespace pvqml::ad;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.value().begin(), t.value().end()}; }
std::vector<double> grads(const Tensor& t) { return {t.grad().begin(), t.grad().end()}; }

}  // namespace

TEST_CASE("affine examples") {
  Tape t;
  auto x = t.leaf({3, 4});
  auto W = t.leaf({1, 0, 0, 1}, {2, 2});
  auto b = t.leaf({0, 0});
  auto y = affine(x, W, b);
  CHECK(vals(y) == std::vector<double>{3, 4});

  // out . out / 2 with identity W gives grad x = x
  auto loss = mul_const(dot(y, y), {0.5});
  t.backward(loss);
  CHECK(grads(x) == std::vector<double>{3, 4});
  CHECK(grads(b) == std::vector<double>{3, 4});

  Tape t2;
  auto y2 = affine(t2.constant({2, 3}), t2.constant({1, 1}, {1, 2}), t2.constant({1}));
  CHECK(vals(y2) == std::vector<double>{6});

  Tape t3;
  CHECK_THROWS_AS(affine(t3.constant({1, 2, 3}), t3.constant({1, 1}, {1, 2}), t3.constant({1})),
                  ShapeError);
}

TEST_CASE("activation examples") {
  Tape t;
  auto x = t.leaf({0.0});
  auto s = sigmoid(x);
  CHECK(s.item() == 0.5);
  CHECK(tanh(x).item() == 0.0);
  CHECK(activation(x, Activation::Identity).id() == x.id());
  t.backward(s);
  CHECK(x.grad()[0] == 0.25);
}

TEST_CASE("combine ops") {
  Tape t;
  auto a = t.leaf({1, 2});
  auto b = t.leaf({3, 4});
  CHECK(vals(add(a, b)) == std::vector<double>{4, 6});
  CHECK(vals(mul(a, b)) == std::vector<double>{3, 8});

  auto v = t.leaf({1, 2, 3, 4});
  auto parts = split(v, 4);
  REQUIRE(parts.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(parts[k].size() == 1);
    CHECK(parts[k].item() == static_cast<double>(k + 1));
  }
  CHECK_THROWS_AS(split(v, 3), ShapeError);
  CHECK_THROWS_AS(slice(v, 3, 2), ShapeError);
  CHECK_THROWS_AS(add(a, v), ShapeError);

  std::vector<Tensor> ab{a, b};
  auto c = concat(ab);
  CHECK(vals(c) == std::vector<double>{1, 2, 3, 4});
  t.backward(sum(c));
  CHECK(grads(a) == std::vector<double>{1, 1});
  CHECK(grads(b) == std::vector<double>{1, 1});
}

TEST_CASE("backward seeds and contracts") {
  Tape t;
  auto x = t.leaf({2.5});
  t.backward(x);
  CHECK(x.grad()[0] == 1.0);

  Tape t2;
  auto v = t2.leaf({1, 2});
  CHECK_THROWS_AS(t2.backward(v), ContractError);

  Tape t3;
  auto s = sum(t3.leaf({1.0}));
  t3.backward(s);
  CHECK_THROWS_AS(t3.backward(s), ContractError);
}

TEST_CASE("mse loss and gradient") {
  Tape t;
  auto p = t.leaf({0, 1});
  const std::vector<double> y{1, 1};
  auto l = mse(p, y);
  CHECK(l.item() == 0.5);
  Tape t2;
  auto p2 = t2.leaf({2});
  const std::vector<double> y2{0};
  auto l2 = mse(p2, y2);
  t2.backward(l2);
  CHECK(p2.grad()[0] == 4.0);
}

TEST_CASE("composite graphs match central finite differences") {
  // loss = sum( tanh(W2 * sigmoid(W1 x + b1) + b2) * (W1 x + b1)[0:m2] ) + (Wx).(Wx)/2
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd(0.0, 0.7);
  for (int seed = 0; seed < 50; ++seed) {
    ParamRegistry reg;
    reg.add("W1", {4, 3});
    reg.add("b1", {4});
    reg.add("W2", {2, 4});
    reg.add("b2", {2});
    for (auto& v : reg.values()) v = nd(rng);
    const std::vector<double> x{nd(rng), nd(rng), nd(rng)};

    auto loss_of = [&](const ParamRegistry& r, Tape& t) {
      auto xt = t.constant(x);
      auto h = affine(xt, t.param("W1"), t.param("b1"));
      auto s = sigmoid(h);
      auto o = tanh(affine(s, t.param("W2"), t.param("b2")));
      auto head = slice(h, 1, 2);  // node h consumed by two ops
      auto l1 = sum(mul(o, head));
      auto l2 = mul_const(dot(h, h), {0.5});
      (void)r;
      return add(l1, l2);
    };

    Tape t(reg);
    auto loss = loss_of(reg, t);
    t.backward(loss);
    const auto g = t.param_grad();

    auto f = [&](const std::vector<double>& flat) {
      ParamRegistry r2 = reg;
      r2.assign(flat);
      Tape tt(r2);
      return loss_of(r2, tt).item();
    };
    const std::vector<double> flat(reg.values().begin(), reg.values().end());
    const auto fd = oracle::central_diff(f, flat);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < fd.size(); ++k) {
      num = std::max(num, std::abs(g[k] - fd[k]));
      den = std::max(den, std::abs(fd[k]));
    }
    CHECK(num / std::max(den, 1e-12) <= 1e-4);
  }
}

TEST_CASE("a node consumed k times receives the sum of contributions") {
  Tape t;
  auto x = t.leaf({1.5});
  auto y = add(add(x, x), mul(x, x));  // 2x + x^2 -> 2 + 2x
  t.backward(y);
  CHECK(x.grad()[0] == doctest::Approx(5.0));
}

TEST_CASE("replaying a tape is bit-identical") {
  ParamRegistry reg;
  reg.add("W", {3, 3});
  reg.add("b", {3});
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  for (auto& v : reg.values()) v = nd(rng);
  auto run = [&]() {
    Tape t(reg);
    auto y = tanh(affine(t.constant({0.1, 0.2, 0.3}), t.param("W"), t.param("b")));
    auto l = dot(y, y);
    t.backward(l);
    return std::make_pair(l.item(), t.param_grad());
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("registry layout") {
  ParamRegistry reg;
  CHECK(reg.add("a", {2, 3}) == 0);
  CHECK(reg.add("b", {4}) == 1);
  CHECK(reg.size() == 10);
  CHECK(reg.segment(1).offset == 6);
  CHECK_THROWS_AS(reg.add("a", {1}), ConfigError);
  CHECK_THROWS_AS(reg.find("zzz"), ConfigError);
  const std::vector<double> wrong(3);
  CHECK_THROWS_AS(reg.assign(wrong), ShapeError);
}
