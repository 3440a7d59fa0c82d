#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pvqml/error.hpp"
#include "pvqml/layers.hpp"

using namespace pvqml;
using namespace pvqml::layers;
using qsim::Pauli;
using std::numbers::pi;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.value().begin(), t.value().end()}; }

void randomize(ParamRegistry& reg, std::mt19937_64& rng, double scale = 0.8) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& v : reg.values()) v = u(rng);
}

// Max-abs error relative to the largest finite-difference component.
double grad_rel_err(const std::vector<double>& a, const std::vector<double>& fd) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < fd.size(); ++k) {
    num = std::max(num, std::abs(a[k] - fd[k]));
    den = std::max(den, std::abs(fd[k]));
  }
  return num / std::max(den, 1e-6);  // floor: some inputs have exactly zero gradient
}

// Checks d(loss)/d(params) and d(loss)/d(input) of a builder against central
// differences; `build` returns the loss tensor given a tape and an input leaf.
void check_layer_gradients(ParamRegistry& reg, std::vector<double> input,
                           const std::function<Tensor(Tape&, const Tensor&)>& build) {
  Tape t(reg);
  auto x = t.leaf(input);
  auto loss = build(t, x);
  t.backward(loss);
  const auto gp = t.param_grad();
  const std::vector<double> gx(x.grad().begin(), x.grad().end());

  auto fp = [&](const std::vector<double>& flat) {
    ParamRegistry r2 = reg;
    r2.assign(flat);
    Tape tt(r2);
    return build(tt, tt.constant(input)).item();
  };
  auto fx = [&](const std::vector<double>& xin) {
    Tape tt(reg);
    return build(tt, tt.constant(xin)).item();
  };
  const std::vector<double> flat(reg.values().begin(), reg.values().end());
  CHECK(grad_rel_err(gp, oracle::central_diff(fp, flat)) <= 1e-4);
  CHECK(grad_rel_err(gx, oracle::central_diff(fx, input)) <= 1e-4);
}

}  // namespace

TEST_CASE("fc_forward") {
  ParamRegistry reg;
  auto l = Linear::create(reg, "fc", 3, 3);
  auto w = reg.values(l.weight_seg);
  w[0] = w[4] = w[8] = 1.0;
  Tape t(reg);
  auto y = fc_forward(t, l, t.constant({0.3, -1.0, 2.0}));
  CHECK(vals(y) == std::vector<double>{0.3, -1.0, 2.0});
  CHECK_THROWS_AS(fc_forward(t, l, t.constant({1.0})), ShapeError);

  ParamRegistry big;
  CHECK(Linear::create(big, "fc", 120, 17).param_count() == 2057);
  CHECK(big.size() == 2057);
}

TEST_CASE("vvrq_forward examples") {
  VvrqConfig cfg;
  cfg.qubits = 3;
  cfg.depth = 2;
  const std::vector<double> w(cfg.param_count(), 0.0), x(3, 0.0);
  const auto out = vvrq_forward(cfg, w, x);
  REQUIRE(out.size() == 3);
  for (double v : out) CHECK(v == doctest::Approx(1.0));

  VvrqConfig one;
  one.qubits = 1;
  one.depth = 1;
  const std::vector<double> w1{0.0}, x1{pi};
  CHECK(vvrq_forward(one, w1, x1)[0] == doctest::Approx(-1.0));

  VvrqConfig def;  // defaults: q=8, d=7, X embed, basic, Z readout
  CHECK(def.param_count() == 56);
  CHECK(build_vvrq(def)->circuit.n_params() == 56);
  def.entanglement = Entanglement::Strong;
  CHECK(def.param_count() == 3 * 56);

  CHECK_THROWS_AS(vvrq_forward(cfg, w, std::vector<double>(2)), ShapeError);
}

TEST_CASE("vvrq without variational blocks reduces to the embedding") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-pi, pi);
  VvrqConfig cfg;
  cfg.qubits = 4;
  cfg.depth = 0;
  std::vector<double> x(4);
  for (auto& v : x) v = u(rng);
  struct Case { Pauli embed, measure; std::function<double(double)> f; };
  const std::vector<Case> cases = {
      {Pauli::X, Pauli::Z, [](double a) { return std::cos(a); }},
      {Pauli::Y, Pauli::Z, [](double a) { return std::cos(a); }},
      {Pauli::Y, Pauli::X, [](double a) { return std::sin(a); }},
      {Pauli::X, Pauli::Y, [](double a) { return -std::sin(a); }},
  };
  for (const auto& c : cases) {
    cfg.embedding = c.embed;
    cfg.measure = c.measure;
    const auto out = vvrq_forward(cfg, {}, x);
    for (int j = 0; j < 4; ++j) CHECK(out[j] == doctest::Approx(c.f(x[j])).epsilon(1e-12));
  }
}

TEST_CASE("vvrq outputs stay in [-1, 1]") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-2 * pi, 2 * pi);
  VvrqConfig cfg;
  cfg.qubits = 5;
  cfg.depth = 3;
  cfg.entanglement = Entanglement::Strong;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> w(cfg.param_count()), x(5);
    for (auto& v : w) v = u(rng);
    for (auto& v : x) v = u(rng);
    for (double v : vvrq_forward(cfg, w, x)) {
      CHECK(v >= -1.0 - 1e-12);
      CHECK(v <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("qdi_forward examples") {
  QdiConfig cfg;  // q=4, D=4, scalar Y, consecutive groups
  CHECK(cfg.feature_count() == 16);
  CHECK(cfg.param_count() == 20);
  const std::vector<double> w(20, 0.0), x(16, 0.0);
  const auto out = qdi_forward(cfg, w, x);
  REQUIRE(out.size() == 1);
  CHECK(std::abs(out[0]) < 1e-15);

  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-2 * pi, 2 * pi);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> wr(20), xr(16);
    for (auto& v : wr) v = u(rng);
    for (auto& v : xr) v = u(rng);
    const double y = qdi_forward(cfg, wr, xr)[0];
    CHECK(y >= -1.0 - 1e-12);
    CHECK(y <= 1.0 + 1e-12);
  }

  CHECK_THROWS_AS(qdi_forward(cfg, w, std::vector<double>(4)), ShapeError);
  QdiConfig re = cfg;
  re.reupload = true;
  CHECK(re.feature_count() == 4);
  CHECK(build_qdi(re)->circuit.feature_occurrences(0) == 4);
}

TEST_CASE("qdi scalar readout is 2pi-periodic in every weight") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-pi, pi);
  QdiConfig cfg;
  std::vector<double> w(20), x(16);
  for (auto& v : w) v = u(rng);
  for (auto& v : x) v = u(rng);
  const double base = qdi_forward(cfg, w, x)[0];
  for (int k = 0; k < 20; ++k) {
    auto w2 = w;
    w2[k] += 2 * pi;
    CHECK(qdi_forward(cfg, w2, x)[0] == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("lstm_cell_step") {
  ParamRegistry reg;
  auto cell = LstmCell::create(reg, "lstm", 5, 21);
  CHECK(cell.param_count() == 2352);
  CHECK(reg.size() == 2352);

  SUBCASE("zero parameters map any input to zero state") {
    Tape t(reg);
    auto s = cell.step(t, t.constant({1, -2, 3, 0.5, 9}), lstm_zero_state(t, 21));
    for (double v : s.h.value()) CHECK(v == 0.0);
    for (double v : s.c.value()) CHECK(v == 0.0);
  }
  SUBCASE("forget-gate saturation keeps the cell state") {
    ParamRegistry r;
    auto c = LstmCell::create(r, "lstm", 2, 3);
    auto bih = r.values(c.b_ih);
    for (int j = 0; j < 3; ++j) {
      bih[j] = -10.0;     // input gate closed
      bih[3 + j] = 10.0;  // forget gate open
    }
    Tape t(r);
    LstmState prev{t.constant({0.4, -0.7, 0.1}), t.constant({0.9, -0.3, 0.5})};
    auto s = c.step(t, t.constant({0.2, 0.3}), prev);
    const std::vector<double> expect{0.9, -0.3, 0.5};
    for (int j = 0; j < 3; ++j) CHECK(s.c.value()[j] == doctest::Approx(expect[j]).epsilon(1e-3));
  }
  SUBCASE("shape errors") {
    Tape t(reg);
    CHECK_THROWS_AS(cell.step(t, t.constant({1, 2}), lstm_zero_state(t, 21)), ShapeError);
  }
}

TEST_CASE("hq_lstm_cell_step") {
  QdiConfig qdi;
  qdi.qubits = 4;
  qdi.depth = 3;
  qdi.readout = QdiReadout::VectorZ;
  qdi.reupload = true;
  ParamRegistry reg;
  auto cell = HqLstmCell::create(reg, "hq", 5, 20, qdi);
  CHECK(cell.param_count() == reg.size());
  CHECK(qdi.param_count() == 16);

  SUBCASE("zero weights give a zero hidden state") {
    Tape t(reg);
    auto s = cell.step(t, t.constant({0.1, 0.9, 0.3, 0.4, 0.5}), lstm_zero_state(t, 20));
    for (double v : s.h.value()) CHECK(v == 0.0);
  }
  SUBCASE("combined pre-quantum vector is 4 x n_q") {
    CHECK(cell.input_map.out == 16);
    CHECK(cell.hidden_map.out == 16);
  }
  SUBCASE("dh/dx matches finite differences") {
    std::mt19937_64 rng(77);
    randomize(reg, rng);
    std::vector<double> x{0.2, 0.5, 0.1, 0.7, 0.3};
    const std::vector<double> h0{0.1, -0.2, 0.05, 0.3, 0.0, 0.1, -0.1, 0.2, 0.0, 0.1,
                                 0.2, -0.3, 0.1, 0.0, 0.05, 0.1, 0.2, -0.1, 0.0, 0.3};
    check_layer_gradients(reg, x, [&](Tape& t, const Tensor& xt) {
      LstmState prev{t.constant(h0), t.constant(std::vector<double>(20, 0.1))};
      auto s = cell.step(t, xt, prev);
      return ad::sum(s.h);
    });
  }
}

TEST_CASE("layer backward passes agree with finite differences over 20 seeds") {
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto rv = [&](std::size_t n) {
      std::vector<double> v(n);
      for (auto& e : v) e = u(rng);
      return v;
    };
    const auto weights = rv(64);

    {  // fc + tanh
      ParamRegistry reg;
      auto l = Linear::create(reg, "fc", 6, 4, Activation::Tanh);
      randomize(reg, rng);
      check_layer_gradients(reg, rv(6), [&](Tape& t, const Tensor& x) {
        auto y = l.forward(t, x);
        return ad::dot(y, y);
      });
    }
    {  // lstm over three steps
      ParamRegistry reg;
      auto cell = LstmCell::create(reg, "lstm", 3, 4);
      randomize(reg, rng);
      check_layer_gradients(reg, rv(3), [&](Tape& t, const Tensor& x) {
        auto s = lstm_zero_state(t, 4);
        for (int k = 0; k < 3; ++k) s = cell.step(t, x, s);
        return ad::dot(s.h, t.constant({1, -2, 0.5, 3}));
      });
    }
    {  // vvrq with strong entanglement
      VvrqConfig cfg;
      cfg.qubits = 3;
      cfg.depth = 2;
      cfg.entanglement = Entanglement::Strong;
      cfg.embedding = static_cast<Pauli>(seed % 3);
      auto layer = build_vvrq(cfg);
      ParamRegistry reg;
      const auto ws = reg.add("w", {static_cast<std::size_t>(cfg.param_count())});
      randomize(reg, rng, pi);
      check_layer_gradients(reg, rv(3), [&](Tape& t, const Tensor& x) {
        auto y = quantum_forward(t, layer, t.param(ws), x);
        return ad::dot(y, t.constant({0.3, -1.2, 0.8}));
      });
    }
    {  // qdi scalar
      QdiConfig cfg;
      cfg.qubits = 3;
      cfg.depth = 2;
      auto layer = build_qdi(cfg);
      ParamRegistry reg;
      const auto ws = reg.add("w", {static_cast<std::size_t>(cfg.param_count())});
      randomize(reg, rng, pi);
      check_layer_gradients(reg, rv(6), [&](Tape& t, const Tensor& x) {
        auto y = quantum_forward(t, layer, t.param(ws), x);
        return ad::mse(y, std::vector<double>{0.25});
      });
    }
    (void)weights;
  }
}
