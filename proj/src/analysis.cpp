#include "pvqml/analysis.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "parallel.hpp"
#include "pvqml/error.hpp"

namespace pvqml::analysis {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string num(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

// Upper triangle of sum_y P(y) g g^T / P(y)^2 = g g^T / P for one state.
void accumulate_fisher(const qsim::StateJacobian& sj, std::size_t n, double min_p,
                       std::vector<double>& acc) {
  const auto psi = sj.state.amplitudes();
  std::vector<double> g(n);
  for (std::size_t y = 0; y < psi.size(); ++y) {
    const double p = std::norm(psi[y]);
    if (p <= min_p) continue;
    for (std::size_t k = 0; k < n; ++k) g[k] = 2.0 * std::real(std::conj(psi[y]) * sj.d_params[k][y]);
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = g[i] / p;
      if (gi == 0.0) continue;
      for (std::size_t j = i; j < n; ++j) acc[i * n + j] += gi * g[j];
    }
  }
}

std::vector<double> sorted_eigenvalues(const std::vector<double>& m, std::size_t n) {
  if (n == 0) return {};
  Eigen::MatrixXd a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = m[i * n + j];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + n);
  std::sort(ev.begin(), ev.end(), std::greater<>());
  return ev;
}

// Length-M DFT along one axis of a row-major grid with the given shape.
void dft_axis(std::vector<Complex>& a, const std::vector<std::size_t>& shape, std::size_t axis,
              int degree) {
  const std::size_t m = shape[axis];
  std::size_t stride = 1;
  for (std::size_t i = axis + 1; i < shape.size(); ++i) stride *= shape[i];
  const std::size_t outer = a.size() / (m * stride);

  std::vector<Complex> tw(m * m);
  for (std::size_t k = 0; k < m; ++k) {
    const double w = static_cast<double>(static_cast<int>(k) - degree);
    for (std::size_t j = 0; j < m; ++j) {
      tw[k * m + j] = std::polar(1.0 / static_cast<double>(m),
                                 -w * kTwoPi * static_cast<double>(j) / static_cast<double>(m));
    }
  }
  std::vector<Complex> line(m);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t s = 0; s < stride; ++s) {
      const std::size_t base = o * m * stride + s;
      for (std::size_t j = 0; j < m; ++j) line[j] = a[base + j * stride];
      for (std::size_t k = 0; k < m; ++k) {
        Complex acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += tw[k * m + j] * line[j];
        a[base + k * stride] = acc;
      }
    }
  }
}

}  // namespace

std::vector<double> fim_at(const qsim::Circuit& circuit, std::span<const double> theta,
                           std::span<const double> x_samples, double min_probability) {
  const auto n = static_cast<std::size_t>(circuit.n_params());
  const auto nf = static_cast<std::size_t>(circuit.n_features());
  if (theta.size() != n) throw ShapeError("theta size does not match the circuit");
  const std::size_t samples = nf ? x_samples.size() / nf : 1;
  if (samples == 0 || (nf && x_samples.size() % nf)) throw ShapeError("x samples do not match the circuit");
  std::vector<double> f(n * n, 0.0);
  for (std::size_t r = 0; r < samples; ++r) {
    accumulate_fisher(qsim::state_jacobian(circuit, theta, x_samples.subspan(r * nf, nf)), n,
                      min_probability, f);
  }
  const double scale = 1.0 / static_cast<double>(samples);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      f[i * n + j] *= scale;
      f[j * n + i] = f[i * n + j];
    }
  }
  return f;
}

FimResult fim_estimate(const qsim::Circuit& circuit, const FimOptions& opts) {
  if (opts.theta_draws == 0 || opts.x_draws == 0) throw ContractError("FIM needs at least one draw");
  const auto n = static_cast<std::size_t>(circuit.n_params());
  const auto nf = static_cast<std::size_t>(circuit.n_features());

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> theta_dist(0.0, kTwoPi);
  std::normal_distribution<double> x_dist(0.0, 1.0);
  std::vector<double> thetas(opts.theta_draws * n);
  std::vector<double> xs(opts.theta_draws * opts.x_draws * nf);
  for (std::size_t t = 0; t < opts.theta_draws; ++t) {
    for (std::size_t k = 0; k < n; ++k) thetas[t * n + k] = theta_dist(rng);
    for (std::size_t r = 0; r < opts.x_draws * nf; ++r) xs[t * opts.x_draws * nf + r] = x_dist(rng);
  }

  std::vector<std::vector<double>> per_draw(opts.theta_draws);
  detail::parallel_for(opts.theta_draws, opts.workers, [&](std::size_t t) {
    const std::size_t block = opts.x_draws * nf;
    per_draw[t] = fim_at(circuit, std::span<const double>(thetas.data() + t * n, n),
                         nf ? std::span<const double>(xs.data() + t * block, block)
                            : std::span<const double>(),
                         opts.min_probability);
  });

  FimResult out;
  out.n_params = n;
  out.theta_draws = opts.theta_draws;
  out.x_draws = opts.x_draws;
  out.matrix.assign(n * n, 0.0);
  for (const auto& f : per_draw) {
    for (std::size_t i = 0; i < n * n; ++i) out.matrix[i] += f[i];
  }
  for (auto& v : out.matrix) v /= static_cast<double>(opts.theta_draws);
  out.eigenvalues = sorted_eigenvalues(out.matrix, n);
  out.rank = numerical_rank(out.eigenvalues, opts.tolerance);
  return out;
}

std::size_t numerical_rank(std::span<const double> eigenvalues, double tolerance) {
  if (eigenvalues.empty() || !(eigenvalues.front() > 0.0)) return 0;
  const double cut = tolerance * eigenvalues.front();
  return static_cast<std::size_t>(
      std::count_if(eigenvalues.begin(), eigenvalues.end(), [&](double v) { return v > cut; }));
}

std::vector<RankPoint> fim_rank_curve(const std::function<qsim::Circuit(int)>& family,
                                      std::span<const int> depths, const FimOptions& opts) {
  for (std::size_t i = 1; i < depths.size(); ++i) {
    if (depths[i] <= depths[i - 1]) throw ContractError("depths must be strictly increasing");
  }
  std::vector<RankPoint> curve;
  for (int d : depths) {
    const auto fim = fim_estimate(family(d), opts);
    curve.push_back({d, fim.n_params, fim.rank, fim.eigenvalues.empty() ? 0.0 : fim.eigenvalues[0]});
  }
  return curve;
}

Histogram fim_eigenspectrum(const FimResult& fim, std::size_t bins, double tolerance) {
  if (bins == 0) throw ContractError("histogram needs at least one bin");
  if (fim.eigenvalues.empty()) throw ContractError("empty eigenspectrum");
  const auto& ev = fim.eigenvalues;
  const double hi = ev.front(), lo = ev.back();
  const double width = (hi - lo) / static_cast<double>(bins);
  Histogram h;
  h.mass.assign(bins, 0.0);
  for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(lo + width * static_cast<double>(b));
  h.edges.back() = hi;
  const double w = 1.0 / static_cast<double>(ev.size());
  std::size_t near_zero = 0;
  for (double v : ev) {
    std::size_t b = 0;
    if (width > 0.0) b = std::min(bins - 1, static_cast<std::size_t>((v - lo) / width));
    h.mass[b] += w;
    if (v < tolerance * std::max(hi, 0.0) || hi <= 0.0) ++near_zero;
  }
  h.near_zero_fraction = static_cast<double>(near_zero) / static_cast<double>(ev.size());
  return h;
}

std::size_t FourierSpectrum::index_of(std::span<const int> omega) const {
  if (omega.size() != degrees.size()) return size();
  std::size_t idx = 0;
  for (std::size_t i = 0; i < omega.size(); ++i) {
    if (std::abs(omega[i]) > degrees[i]) return size();
    idx = idx * static_cast<std::size_t>(2 * degrees[i] + 1) +
          static_cast<std::size_t>(omega[i] + degrees[i]);
  }
  return idx;
}

FourierSpectrum fourier_spectrum(const layers::QuantumCircuitLayer& layer, const FourierOptions& opts) {
  const auto& circuit = layer.circuit;
  const auto nf = static_cast<std::size_t>(circuit.n_features());
  const auto np = static_cast<std::size_t>(circuit.n_params());
  if (opts.dims.empty()) throw ContractError("no dimensions to scan");
  if (opts.theta_draws == 0) throw ContractError("Fourier spectrum needs at least one draw");
  if (opts.observable >= layer.observables.size()) throw ContractError("observable index out of range");
  if (!opts.fixed_features.empty() && opts.fixed_features.size() != nf) {
    throw ShapeError("fixed_features must have one value per feature slot");
  }

  FourierSpectrum s;
  s.dims = opts.dims;
  std::set<int> seen;
  std::vector<std::size_t> shape;
  double grid = 1.0;
  for (int slot : opts.dims) {
    if (slot < 0 || static_cast<std::size_t>(slot) >= nf || !seen.insert(slot).second) {
      throw ContractError("scanned slots must be distinct feature slots");
    }
    const int d = circuit.feature_occurrences(slot);
    if (d == 0) throw ContractError("feature slot " + std::to_string(slot) + " is not encoded");
    s.degrees.push_back(d);
    shape.push_back(static_cast<std::size_t>(2 * d + 1));
    grid *= static_cast<double>(2 * d + 1);
  }
  if (grid > static_cast<double>(opts.max_grid)) {
    throw ContractError("Fourier grid of " + num(grid) + " points exceeds " +
                        std::to_string(opts.max_grid) + "; scan fewer dimensions at a time");
  }
  const auto total = static_cast<std::size_t>(grid);

  for (std::size_t g = 0; g < total; ++g) {
    std::vector<int> omega(shape.size());
    std::size_t rest = g;
    for (std::size_t i = shape.size(); i-- > 0;) {
      omega[i] = static_cast<int>(rest % shape[i]) - s.degrees[i];
      rest /= shape[i];
    }
    s.frequencies.push_back(std::move(omega));
  }

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> theta_dist(0.0, kTwoPi);
  std::vector<double> thetas(opts.theta_draws * np);
  for (auto& v : thetas) v = theta_dist(rng);

  s.theta_draws = opts.theta_draws;
  s.threshold = opts.threshold;
  s.thetas = thetas;
  s.coefficients.resize(opts.theta_draws * total);
  const auto& obs = layer.observables[opts.observable];
  detail::parallel_for(opts.theta_draws, opts.workers, [&](std::size_t t) {
    const std::span<const double> theta(thetas.data() + t * np, np);
    std::vector<double> x = opts.fixed_features.empty() ? std::vector<double>(nf, 0.0)
                                                        : opts.fixed_features;
    std::vector<Complex> a(total);
    for (std::size_t g = 0; g < total; ++g) {
      std::size_t rest = g;
      for (std::size_t i = shape.size(); i-- > 0;) {
        const auto j = rest % shape[i];
        rest /= shape[i];
        x[static_cast<std::size_t>(opts.dims[i])] =
            kTwoPi * static_cast<double>(j) / static_cast<double>(shape[i]);
      }
      a[g] = qsim::expectation(qsim::run_circuit(circuit, theta, x), obs);
    }
    for (std::size_t i = 0; i < shape.size(); ++i) dft_axis(a, shape, i, s.degrees[i]);
    std::copy(a.begin(), a.end(), s.coefficients.begin() + static_cast<std::ptrdiff_t>(t * total));
  });

  const double inv = 1.0 / static_cast<double>(opts.theta_draws);
  s.mean.assign(total, 0.0);
  s.stddev.assign(total, 0.0);
  s.re_stddev.assign(total, 0.0);
  s.im_stddev.assign(total, 0.0);
  for (std::size_t k = 0; k < total; ++k) {
    Complex m = 0.0;
    for (std::size_t t = 0; t < opts.theta_draws; ++t) m += s.coefficient(t, k);
    m *= inv;
    double vr = 0.0, vi = 0.0;
    for (std::size_t t = 0; t < opts.theta_draws; ++t) {
      const Complex d = s.coefficient(t, k) - m;
      vr += d.real() * d.real();
      vi += d.imag() * d.imag();
    }
    s.mean[k] = m;
    s.re_stddev[k] = std::sqrt(vr * inv);
    s.im_stddev[k] = std::sqrt(vi * inv);
    s.stddev[k] = std::sqrt((vr + vi) * inv);
    if (s.stddev[k] > opts.threshold) ++s.nonzero;

    const bool origin = std::all_of(s.frequencies[k].begin(), s.frequencies[k].end(),
                                    [](int w) { return w == 0; });
    ++s.components;
    if (s.re_stddev[k] > opts.threshold) ++s.nonzero_components;
    if (!origin) {
      ++s.components;
      if (s.im_stddev[k] > opts.threshold) ++s.nonzero_components;
    }
  }
  return s;
}

double fourier_evaluate(const FourierSpectrum& s, std::size_t draw, std::span<const double> x) {
  if (x.size() != s.degrees.size()) throw ShapeError("one coordinate per scanned dimension expected");
  if (draw >= s.theta_draws) throw ContractError("draw index out of range");
  Complex acc = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    double phase = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) phase += s.frequencies[k][i] * x[i];
    acc += s.coefficient(draw, k) * std::polar(1.0, phase);
  }
  return acc.real();
}

std::string eigenvalues_csv(const FimResult& fim) {
  std::ostringstream os;
  os << "index,eigenvalue\n";
  for (std::size_t i = 0; i < fim.eigenvalues.size(); ++i) os << i << ',' << num(fim.eigenvalues[i]) << '\n';
  return os.str();
}

std::string fim_matrix_csv(const FimResult& fim) {
  std::ostringstream os;
  for (std::size_t i = 0; i < fim.n_params; ++i) {
    for (std::size_t j = 0; j < fim.n_params; ++j) os << (j ? "," : "") << num(fim.at(i, j));
    os << '\n';
  }
  return os.str();
}

std::string rank_curve_csv(std::span<const RankPoint> curve) {
  std::ostringstream os;
  os << "depth,n_params,rank,max_eigenvalue\n";
  for (const auto& p : curve) os << p.depth << ',' << p.n_params << ',' << p.rank << ',' << num(p.max_eigenvalue) << '\n';
  return os.str();
}

std::string histogram_csv(const Histogram& h) {
  std::ostringstream os;
  os << "bin_low,bin_high,mass\n";
  for (std::size_t b = 0; b < h.mass.size(); ++b) {
    os << num(h.edges[b]) << ',' << num(h.edges[b + 1]) << ',' << num(h.mass[b]) << '\n';
  }
  return os.str();
}

namespace {

void omega_header(std::ostringstream& os, std::size_t dims) {
  for (std::size_t i = 0; i < dims; ++i) os << "omega_" << i << ',';
}

void omega_row(std::ostringstream& os, const std::vector<int>& w) {
  for (int v : w) os << v << ',';
}

}  // namespace

std::string fourier_csv(const FourierSpectrum& s) {
  std::ostringstream os;
  omega_header(os, s.degrees.size());
  os << "mean_re,mean_im,stddev,nonzero\n";
  for (std::size_t k = 0; k < s.size(); ++k) {
    omega_row(os, s.frequencies[k]);
    os << num(s.mean[k].real()) << ',' << num(s.mean[k].imag()) << ',' << num(s.stddev[k]) << ','
       << (s.stddev[k] > s.threshold ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string fourier_draws_csv(const FourierSpectrum& s) {
  std::ostringstream os;
  os << "draw,";
  omega_header(os, s.degrees.size());
  os << "re,im,abs\n";
  for (std::size_t t = 0; t < s.theta_draws; ++t) {
    for (std::size_t k = 0; k < s.size(); ++k) {
      const Complex c = s.coefficient(t, k);
      os << t << ',';
      omega_row(os, s.frequencies[k]);
      os << num(c.real()) << ',' << num(c.imag()) << ',' << num(std::abs(c)) << '\n';
    }
  }
  return os.str();
}

}  // namespace pvqml::analysis
