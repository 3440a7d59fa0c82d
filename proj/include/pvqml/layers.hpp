#pragma once

// Building-block layers. Each layer owns segment indices into a model's
// ParamRegistry and records its forward pass on a Tape.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pvqml/autodiff.hpp"
#include "pvqml/qsim.hpp"

namespace pvqml::layers {

using ad::Activation;
using ad::ParamRegistry;
using ad::Tape;
using ad::Tensor;

// ------------------------------------------------------------------ dense

struct Linear {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_seg = 0;  // [out x in], row-major
  std::size_t bias_seg = 0;    // [out]
  Activation act = Activation::Identity;

  static Linear create(ParamRegistry& reg, const std::string& name, std::size_t in,
                       std::size_t out, Activation act = Activation::Identity);

  std::size_t param_count() const { return in * out + out; }
  Tensor forward(Tape& tape, const Tensor& x) const;
};

inline Tensor fc_forward(Tape& tape, const Linear& layer, const Tensor& x) {
  return layer.forward(tape, x);
}

// ------------------------------------------------------------------ quantum

/// A fixed circuit plus the observables read out after it. The circuit's
/// params are the layer weights and its features are the layer input.
struct QuantumCircuitLayer {
  qsim::Circuit circuit;
  std::vector<qsim::Observable> observables;

  std::vector<double> evaluate(std::span<const double> weights,
                               std::span<const double> x) const;
};

/// Records a quantum layer node; backward runs one adjoint sweep with the
/// incoming cotangent and feeds both the weights and the input.
Tensor quantum_forward(Tape& tape, std::shared_ptr<const QuantumCircuitLayer> layer,
                       const Tensor& weights, const Tensor& x);

enum class Entanglement { Basic, Strong };

/// Angle embedding followed by `depth` variational blocks, per-qubit readout.
/// depth == 0 and qubits == 1 are accepted as diagnostic variants.
struct VvrqConfig {
  int qubits = 8;
  int depth = 7;
  qsim::Pauli embedding = qsim::Pauli::X;
  Entanglement entanglement = Entanglement::Basic;
  qsim::Pauli measure = qsim::Pauli::Z;

  int param_count() const;
  void validate() const;
};

std::shared_ptr<const QuantumCircuitLayer> build_vvrq(const VvrqConfig& cfg);
std::vector<double> vvrq_forward(const VvrqConfig& cfg, std::span<const double> weights,
                                 std::span<const double> x);

enum class QdiReadout { ScalarY, VectorZ };

/// Interleaved lattice: RY sub-layer + CNOT chain, then `depth` blocks of
/// (RZ encoding, RY sub-layer + CNOT chain). The scalar readout fans every
/// qubit into qubit 0 with CNOTs and measures Y there.
struct QdiConfig {
  int qubits = 4;
  int depth = 4;
  QdiReadout readout = QdiReadout::ScalarY;
  bool reupload = false;  // true: every block encodes the same q features

  int param_count() const { return qubits * (depth + 1); }
  int feature_count() const { return reupload ? qubits : qubits * depth; }
  int output_count() const { return readout == QdiReadout::ScalarY ? 1 : qubits; }
  void validate() const;
};

std::shared_ptr<const QuantumCircuitLayer> build_qdi(const QdiConfig& cfg);
std::vector<double> qdi_forward(const QdiConfig& cfg, std::span<const double> weights,
                                std::span<const double> x);

// ------------------------------------------------------------------ recurrent

struct LstmState {
  Tensor h;
  Tensor c;
};

/// Applies the classical gate algebra to pre-activations (i, f, g, o).
LstmState lstm_gate_update(const Tensor& i_pre, const Tensor& f_pre, const Tensor& g_pre,
                           const Tensor& o_pre, const Tensor& c_prev);

/// Zero (h, C) pair for the first step.
LstmState lstm_zero_state(Tape& tape, std::size_t hidden);

/// Classical LSTM cell with separate input and recurrent biases; gate order
/// inside the 4h blocks is (input, forget, cell, output).
struct LstmCell {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t w_ih = 0, w_hh = 0, b_ih = 0, b_hh = 0;

  static LstmCell create(ParamRegistry& reg, const std::string& prefix, std::size_t input_dim,
                         std::size_t hidden_dim);

  std::size_t param_count() const {
    return 4 * hidden_dim * (input_dim + hidden_dim) + 8 * hidden_dim;
  }
  LstmState step(Tape& tape, const Tensor& x, const LstmState& prev) const;
};

/// LSTM cell whose four gates each pass through their own QDI layer.
struct HqLstmCell {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  QdiConfig qdi;
  Linear input_map;   // x -> 4 n_q
  Linear hidden_map;  // h -> 4 n_q
  std::size_t qdi_weights[4] = {0, 0, 0, 0};
  Linear gate_maps[4];  // n_q -> hidden
  std::shared_ptr<const QuantumCircuitLayer> circuit;

  static HqLstmCell create(ParamRegistry& reg, const std::string& prefix, std::size_t input_dim,
                           std::size_t hidden_dim, const QdiConfig& qdi);

  std::size_t param_count() const;
  LstmState step(Tape& tape, const Tensor& x, const LstmState& prev) const;
};

}  // namespace pvqml::layers
