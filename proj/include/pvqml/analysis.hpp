#pragma once

// Circuit diagnostics: Fisher information over computational-basis outcomes
// and truncated Fourier spectra of a circuit output in its encoded features.

#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pvqml/layers.hpp"
#include "pvqml/qsim.hpp"

namespace pvqml::analysis {

struct FimOptions {
  std::size_t theta_draws = 20;
  std::size_t x_draws = 20;
  std::uint64_t seed = 1;
  /// Eigenvalues above tolerance * lambda_max count towards the rank.
  double tolerance = 1e-10;
  /// Outcomes at or below this probability are skipped.
  double min_probability = 1e-14;
  std::size_t workers = 1;
};

struct FimResult {
  std::size_t n_params = 0;
  std::vector<double> matrix;       // row-major n_params x n_params, mean over theta draws
  std::vector<double> eigenvalues;  // descending
  std::size_t rank = 0;
  std::size_t theta_draws = 0;
  std::size_t x_draws = 0;

  double at(std::size_t i, std::size_t j) const { return matrix[i * n_params + j]; }
};

/// Row-major FIM at fixed theta averaged over the given feature vectors
/// (x_samples holds n_samples * n_features values).
std::vector<double> fim_at(const qsim::Circuit& circuit, std::span<const double> theta,
                           std::span<const double> x_samples, double min_probability = 1e-14);

/// F = E_x sum_y P(y) grad log P(y) grad log P(y)^T with P(y) = |<y|psi>|^2,
/// theta ~ U[0, 2pi) per draw and x ~ N(0, 1) per feature, averaged over the
/// theta draws. The result is exactly symmetrised.
FimResult fim_estimate(const qsim::Circuit& circuit, const FimOptions& opts);

/// Count of eigenvalues (descending) above tolerance * eigenvalues[0].
std::size_t numerical_rank(std::span<const double> eigenvalues, double tolerance);

struct RankPoint {
  int depth = 0;
  std::size_t n_params = 0;
  std::size_t rank = 0;
  double max_eigenvalue = 0.0;
};

/// One FIM per depth; depths must be strictly increasing (ContractError).
std::vector<RankPoint> fim_rank_curve(const std::function<qsim::Circuit(int)>& family,
                                      std::span<const int> depths, const FimOptions& opts);

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<double> mass;   // sums to 1
  double near_zero_fraction = 0.0;
};

/// Eigenvalue histogram over [lambda_min, lambda_max] with unit total mass.
/// An eigenvalue is near zero when below tolerance * lambda_max.
Histogram fim_eigenspectrum(const FimResult& fim, std::size_t bins, double tolerance = 1e-10);

using Complex = std::complex<double>;

struct FourierOptions {
  std::vector<int> dims;              // feature slots to scan
  std::vector<double> fixed_features;  // values of the other slots (zeros when empty)
  std::size_t observable = 0;
  std::size_t theta_draws = 50;
  double threshold = 1e-4;
  std::uint64_t seed = 1;
  std::size_t max_grid = 1000000;
  std::size_t workers = 1;
};

struct FourierSpectrum {
  std::vector<int> dims;
  std::vector<int> degrees;                   // encoding occurrences per scanned slot
  std::vector<std::vector<int>> frequencies;  // omega vector per coefficient
  std::size_t theta_draws = 0;
  double threshold = 0.0;
  std::vector<double> thetas;  // theta_draws x n_params
  std::vector<Complex> coefficients;  // theta_draws x frequencies.size(), draw-major
  std::vector<Complex> mean;
  std::vector<double> stddev;     // sqrt(E|c - E c|^2)
  std::vector<double> re_stddev;
  std::vector<double> im_stddev;
  std::size_t nonzero = 0;  // complex coefficients with stddev above threshold
  /// Real degrees of freedom: Re c for every omega, Im c for omega != 0.
  std::size_t components = 0;
  std::size_t nonzero_components = 0;

  std::size_t size() const { return frequencies.size(); }
  Complex coefficient(std::size_t draw, std::size_t k) const {
    return coefficients[draw * frequencies.size() + k];
  }
  /// nonzero / size(): share of complex coefficients that vary across draws.
  double nonzero_fraction() const {
    return size() ? static_cast<double>(nonzero) / static_cast<double>(size()) : 0.0;
  }
  double component_fraction() const {
    return components ? static_cast<double>(nonzero_components) / static_cast<double>(components) : 0.0;
  }
  /// Index of the coefficient with the given omega, or size() when absent.
  std::size_t index_of(std::span<const int> omega) const;
};

/// Evaluates one observable on a (2 d_i + 1)-point grid per scanned slot over
/// [0, 2pi) and recovers c_omega of f(x) = sum c_omega exp(i omega . x) by a
/// separable DFT, once per theta draw. Throws ContractError when the grid
/// exceeds max_grid points or a slot is not encoded.
FourierSpectrum fourier_spectrum(const layers::QuantumCircuitLayer& layer, const FourierOptions& opts);

/// Truncated series of one draw at scanned coordinates x (real part).
double fourier_evaluate(const FourierSpectrum& s, std::size_t draw, std::span<const double> x);

std::string eigenvalues_csv(const FimResult& fim);
std::string fim_matrix_csv(const FimResult& fim);
std::string rank_curve_csv(std::span<const RankPoint> curve);
std::string histogram_csv(const Histogram& h);
/// omega columns, mean_re, mean_im, stddev, nonzero.
std::string fourier_csv(const FourierSpectrum& s);
/// Long format for violin plots: draw, omega columns, re, im, abs.
std::string fourier_draws_csv(const FourierSpectrum& s);

}  // namespace pvqml::analysis
