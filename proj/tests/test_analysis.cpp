#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "pvqml/analysis.hpp"
#include "pvqml/error.hpp"

using namespace pvqml;
using namespace pvqml::analysis;
using qsim::AngleSource;
using qsim::Circuit;

namespace {

constexpr double kPi = std::numbers::pi;

// Outcome probabilities straight from the simulator.
std::vector<double> probabilities(const Circuit& c, std::span<const double> theta,
                                  std::span<const double> x) {
  const auto s = qsim::run_circuit(c, theta, x);
  std::vector<double> p;
  for (auto a : s.amplitudes()) p.push_back(std::norm(a));
  return p;
}

// sum_y dP_i dP_j / P with central-difference derivatives.
std::vector<double> fd_fisher(const Circuit& c, std::vector<double> theta, std::span<const double> x) {
  const std::size_t n = theta.size();
  const double h = 1e-6;
  const auto p0 = probabilities(c, theta, x);
  std::vector<std::vector<double>> dp(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t0 = theta[k];
    theta[k] = t0 + h;
    const auto pp = probabilities(c, theta, x);
    theta[k] = t0 - h;
    const auto pm = probabilities(c, theta, x);
    theta[k] = t0;
    for (std::size_t y = 0; y < p0.size(); ++y) dp[k].push_back((pp[y] - pm[y]) / (2 * h));
  }
  std::vector<double> f(n * n, 0.0);
  for (std::size_t y = 0; y < p0.size(); ++y) {
    if (p0[y] <= 1e-14) continue;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) f[i * n + j] += dp[i][y] * dp[j][y] / p0[y];
  }
  return f;
}

Circuit small_circuit() {
  Circuit c(3, 6, 3);
  for (int q = 0; q < 3; ++q) c.rx(q, AngleSource::feature(q));
  for (int q = 0; q < 3; ++q) c.ry(q, AngleSource::param(q));
  c.cnot(0, 1).cnot(1, 2);
  for (int q = 0; q < 3; ++q) c.rz(q, AngleSource::param(3 + q));
  c.ry(0, AngleSource::feature(1));
  return c;
}

layers::QuantumCircuitLayer single_rx_layer(int encodings) {
  Circuit c(1, 0, 1);
  for (int k = 0; k < encodings; ++k) c.rx(0, AngleSource::feature(0));
  return {c, {qsim::Observable::single(0, qsim::Pauli::Z)}};
}

}  // namespace

TEST_CASE("single RX has unit Fisher information") {
  Circuit c(1, 1, 0);
  c.rx(0, AngleSource::param(0));
  for (double t : {0.3, 1.0, 2.5}) {
    const auto f = fim_at(c, std::vector<double>{t}, {});
    REQUIRE(f.size() == 1);
    CHECK(f[0] == doctest::Approx(1.0).epsilon(1e-12));
  }
  FimOptions o;
  o.theta_draws = 5;
  o.x_draws = 2;
  const auto r = fim_estimate(c, o);
  CHECK(r.eigenvalues[0] >= 0.0);
  CHECK(r.rank == 1);
}

TEST_CASE("a theta-independent circuit has exactly zero FIM") {
  Circuit c(1, 1, 0);
  c.rz(0, AngleSource::param(0));
  FimOptions o;
  o.theta_draws = 7;
  const auto r = fim_estimate(c, o);
  CHECK(r.matrix[0] == 0.0);
  CHECK(r.rank == 0);
}

TEST_CASE("forward-mode FIM matches the finite-difference oracle") {
  const auto c = small_circuit();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 2 * kPi);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> theta(6), x(3);
    for (auto& v : theta) v = u(rng);
    for (auto& v : x) v = u(rng);
    const auto f = fim_at(c, theta, x);
    const auto g = fd_fisher(c, theta, x);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      err = std::max(err, std::abs(f[i] - g[i]));
      scale = std::max(scale, std::abs(g[i]));
    }
    CHECK(err / scale < 1e-6);
  }
}

TEST_CASE("FIM is symmetric positive semidefinite") {
  const auto c = small_circuit();
  for (std::size_t draws : {1u, 3u, 12u}) {
    FimOptions o;
    o.theta_draws = draws;
    o.x_draws = draws;
    o.seed = draws;
    const auto r = fim_estimate(c, o);
    for (std::size_t i = 0; i < r.n_params; ++i)
      for (std::size_t j = 0; j < r.n_params; ++j) CHECK(std::abs(r.at(i, j) - r.at(j, i)) <= 1e-10);
    CHECK(r.eigenvalues.back() >= -1e-10);
    CHECK(std::is_sorted(r.eigenvalues.rbegin(), r.eigenvalues.rend()));
    CHECK(r.rank <= r.n_params);
  }
}

TEST_CASE("FIM estimate is independent of the worker count") {
  const auto c = small_circuit();
  FimOptions o;
  o.theta_draws = 6;
  o.x_draws = 3;
  const auto a = fim_estimate(c, o);
  o.workers = 3;
  const auto b = fim_estimate(c, o);
  CHECK(a.matrix == b.matrix);
}

TEST_CASE("rank curve") {
  FimOptions o;
  o.theta_draws = 4;
  o.x_draws = 4;
  const std::vector<int> depths{1, 2, 3};
  const auto curve = fim_rank_curve(
      [](int d) {
        layers::VvrqConfig cfg;
        cfg.qubits = 3;
        cfg.depth = d;
        return layers::build_vvrq(cfg)->circuit;
      },
      depths, o);
  REQUIRE(curve.size() == 3);
  for (std::size_t i = 0; i < curve.size(); ++i) {
    CHECK(curve[i].rank <= curve[i].n_params);
    if (i) CHECK(curve[i].rank >= curve[i - 1].rank);
  }
  const std::vector<int> bad{2, 1};
  CHECK_THROWS_AS(fim_rank_curve([](int) { return Circuit(1, 1, 0); }, bad, o), ContractError);
  CHECK(numerical_rank(std::vector<double>{1.0, 1e-5, 1e-11}, 1e-10) == 2);
  CHECK(numerical_rank(std::vector<double>{0.0, 0.0}, 1e-10) == 0);
}

TEST_CASE("eigenspectrum histogram") {
  FimResult f;
  f.eigenvalues = {2.0, 2.0, 2.0};
  auto h = fim_eigenspectrum(f, 5);
  CHECK(h.mass[0] == doctest::Approx(1.0));
  CHECK(std::count_if(h.mass.begin(), h.mass.end(), [](double m) { return m > 0; }) == 1);
  CHECK(h.near_zero_fraction == 0.0);

  f.eigenvalues = {4.0, 3.0, 1.0, 0.0};
  h = fim_eigenspectrum(f, 4);
  double total = 0.0;
  for (double m : h.mass) total += m;
  CHECK(total == doctest::Approx(1.0));
  CHECK(h.mass[3] == doctest::Approx(0.5));
  CHECK(h.near_zero_fraction == doctest::Approx(0.25));
  CHECK_THROWS_AS(fim_eigenspectrum(f, 0), ContractError);
}

TEST_CASE("single RX spectrum is cos x") {
  FourierOptions o;
  o.dims = {0};
  o.theta_draws = 3;
  const auto s = fourier_spectrum(single_rx_layer(1), o);
  REQUIRE(s.size() == 3);
  CHECK(s.frequencies[0] == std::vector<int>{-1});
  CHECK(s.frequencies[2] == std::vector<int>{1});
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(std::abs(s.coefficient(t, 0) - Complex(0.5, 0)) < 1e-12);
    CHECK(std::abs(s.coefficient(t, 1)) < 1e-12);
    CHECK(std::abs(s.coefficient(t, 2) - Complex(0.5, 0)) < 1e-12);
  }
  CHECK(s.nonzero == 0);  // nothing varies without trainable parameters

  const auto s2 = fourier_spectrum(single_rx_layer(2), o);
  REQUIRE(s2.degrees == std::vector<int>{2});
  const std::vector<int> w2{2}, w1{1};
  CHECK(std::abs(s2.coefficient(0, s2.index_of(w2)) - Complex(0.5, 0)) < 1e-12);
  CHECK(std::abs(s2.coefficient(0, s2.index_of(w1))) < 1e-12);
}

TEST_CASE("QDI spectrum: brute-force DFT, symmetry, band limit") {
  layers::QdiConfig cfg;
  cfg.depth = 2;
  cfg.reupload = true;
  const auto layer = layers::build_qdi(cfg);
  FourierOptions o;
  o.dims = {0, 2};
  o.theta_draws = 4;
  o.fixed_features = {0.0, 0.7, 0.0, -0.3};
  const auto s = fourier_spectrum(*layer, o);
  REQUIRE(s.degrees == std::vector<int>{2, 2});
  REQUIRE(s.size() == 25);
  CHECK(s.components == 49);

  const std::size_t np = static_cast<std::size_t>(cfg.param_count());
  for (std::size_t t = 0; t < s.theta_draws; ++t) {
    const std::span<const double> theta(s.thetas.data() + t * np, np);
    // naive double sum over the 5 x 5 grid
    for (std::size_t k = 0; k < s.size(); ++k) {
      Complex c = 0.0;
      for (int a = 0; a < 5; ++a) {
        for (int b = 0; b < 5; ++b) {
          auto x = o.fixed_features;
          x[0] = 2 * kPi * a / 5.0;
          x[2] = 2 * kPi * b / 5.0;
          const double f = layer->evaluate(theta, x)[0];
          c += f * std::polar(1.0, -(s.frequencies[k][0] * x[0] + s.frequencies[k][1] * x[2]));
        }
      }
      c /= 25.0;
      CHECK(std::abs(c - s.coefficient(t, k)) < 1e-12);
      const std::vector<int> neg{-s.frequencies[k][0], -s.frequencies[k][1]};
      CHECK(std::abs(s.coefficient(t, s.index_of(neg)) - std::conj(s.coefficient(t, k))) < 1e-12);
    }
    // off-grid reconstruction
    std::mt19937_64 rng(t);
    std::uniform_real_distribution<double> u(-3.0, 9.0);
    for (int r = 0; r < 5; ++r) {
      auto x = o.fixed_features;
      x[0] = u(rng);
      x[2] = u(rng);
      const double direct = layer->evaluate(theta, x)[0];
      const std::vector<double> xs{x[0], x[2]};
      CHECK(std::abs(fourier_evaluate(s, t, xs) - direct) < 1e-8);
    }
  }
}

TEST_CASE("Fourier contract errors") {
  layers::QdiConfig cfg;
  cfg.depth = 4;
  cfg.reupload = true;
  const auto layer = layers::build_qdi(cfg);
  FourierOptions o;
  o.dims = {0, 1, 2, 3};
  o.max_grid = 1000;  // 9^4 = 6561
  o.theta_draws = 1;
  CHECK_THROWS_AS(fourier_spectrum(*layer, o), ContractError);
  o.dims = {0, 0};
  CHECK_THROWS_AS(fourier_spectrum(*layer, o), ContractError);
  o.dims = {7};
  CHECK_THROWS_AS(fourier_spectrum(*layer, o), ContractError);
  o.dims = {1};
  o.fixed_features = {1.0};
  CHECK_THROWS_AS(fourier_spectrum(*layer, o), ShapeError);
}

TEST_CASE("CSV exports") {
  FimResult f;
  f.n_params = 2;
  f.matrix = {1.0, 0.5, 0.5, 2.0};
  f.eigenvalues = {2.25, 0.75};
  CHECK(eigenvalues_csv(f) == "index,eigenvalue\n0,2.25\n1,0.75\n");
  CHECK(fim_matrix_csv(f) == "1,0.5\n0.5,2\n");
  const std::vector<RankPoint> curve{{1, 8, 8, 0.5}};
  CHECK(rank_curve_csv(curve) == "depth,n_params,rank,max_eigenvalue\n1,8,8,0.5\n");

  FourierOptions o;
  o.dims = {0};
  o.theta_draws = 1;
  const auto s = fourier_spectrum(single_rx_layer(1), o);
  const auto csv = fourier_csv(s);
  CHECK(csv.rfind("omega_0,mean_re,mean_im,stddev,nonzero\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  const auto draws = fourier_draws_csv(s);
  CHECK(draws.rfind("draw,omega_0,re,im,abs\n", 0) == 0);
}
