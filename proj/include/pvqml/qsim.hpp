#pragma once

// Dense state-vector simulation of small parameterized circuits.
//
// Conventions (fixed throughout the library):
//   * Rotations use the half-angle form R_A(theta) = exp(-i theta A / 2).
//   * Qubit 0 is the most significant bit of the amplitude index, so for an
//     n-qubit register qubit q toggles the bit with weight 2^(n-1-q).
//   * Gates are applied in place by stride iteration; no 2^n x 2^n matrix is
//     ever formed.

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace pvqml::qsim {

using Complex = std::complex<double>;

inline constexpr int kMaxQubits = 12;

enum class Pauli { X, Y, Z };
enum class GateKind { RX, RY, RZ, CNOT };

Pauli rotation_axis(GateKind kind);
GateKind rotation_gate(Pauli axis);
char pauli_char(Pauli axis);
Pauli parse_pauli(char c);

/// Where a gate's rotation angle comes from at run time.
struct AngleSource {
  enum class Kind { Param, Feature, Const };

  Kind kind = Kind::Const;
  int slot = 0;
  double value = 0.0;

  static AngleSource param(int slot) { return {Kind::Param, slot, 0.0}; }
  static AngleSource feature(int slot) { return {Kind::Feature, slot, 0.0}; }
  static AngleSource constant(double radians) { return {Kind::Const, 0, radians}; }

  bool is_bound() const { return kind != Kind::Const; }
};

struct GateOp {
  GateKind kind = GateKind::RX;
  int target = 0;
  int control = -1;  // CNOT only
  AngleSource angle;
};

class StateVector {
 public:
  /// |0...0> on n_qubits; throws ConfigError outside [1, kMaxQubits].
  explicit StateVector(int n_qubits);

  int n_qubits() const { return n_qubits_; }
  std::size_t dim() const { return amps_.size(); }

  std::span<const Complex> amplitudes() const { return amps_; }
  std::span<Complex> amplitudes() { return amps_; }
  const Complex& operator[](std::size_t i) const { return amps_[i]; }

  double norm_squared() const;

  void apply_rotation(Pauli axis, int target, double angle);
  void apply_cnot(int control, int target);
  /// Multiplies by a bare Pauli matrix (not unitary-rotation); used for
  /// observables and generators.
  void apply_pauli(Pauli axis, int target);

  /// Inner product <this|other>.
  Complex inner(const StateVector& other) const;

  /// Debug dump, one line per amplitude: index,re,im
  void write_csv(std::ostream& out) const;

 private:
  void check_qubit(int q) const;

  int n_qubits_;
  std::vector<Complex> amps_;
};

StateVector init_state(int n_qubits);

/// Applies one gate with an already-resolved angle (ignored for CNOT).
void apply_gate(StateVector& state, const GateOp& gate, double angle);

struct PauliTerm {
  int qubit = 0;
  Pauli axis = Pauli::Z;
};

/// Single Pauli or a tensor product of Paulis on distinct qubits.
class Observable {
 public:
  Observable() = default;
  explicit Observable(std::vector<PauliTerm> terms);

  static Observable single(int qubit, Pauli axis) { return Observable({{qubit, axis}}); }

  const std::vector<PauliTerm>& terms() const { return terms_; }
  void validate(int n_qubits) const;

  /// state <- O state
  void apply(StateVector& state) const;

 private:
  std::vector<PauliTerm> terms_;
};

/// Ordered gate list with bindings to trainable-parameter and feature slots.
/// Slots may be referenced by several gates (data re-uploading).
class Circuit {
 public:
  Circuit(int n_qubits, int n_params, int n_features);

  Circuit& add(const GateOp& gate);
  Circuit& rotation(Pauli axis, int target, AngleSource angle);
  Circuit& rx(int target, AngleSource angle) { return rotation(Pauli::X, target, angle); }
  Circuit& ry(int target, AngleSource angle) { return rotation(Pauli::Y, target, angle); }
  Circuit& rz(int target, AngleSource angle) { return rotation(Pauli::Z, target, angle); }
  Circuit& cnot(int control, int target);

  int n_qubits() const { return n_qubits_; }
  int n_params() const { return n_params_; }
  int n_features() const { return n_features_; }
  const std::vector<GateOp>& gates() const { return gates_; }

  /// Number of gates whose angle is bound to the given feature slot.
  int feature_occurrences(int slot) const;

  /// Per-gate angle after substituting params/features; length == gates().size().
  std::vector<double> resolve_angles(std::span<const double> params,
                                     std::span<const double> features) const;

 private:
  int n_qubits_;
  int n_params_;
  int n_features_;
  std::vector<GateOp> gates_;
};

StateVector run_circuit(const Circuit& circuit, std::span<const double> params,
                        std::span<const double> features);

/// Runs with explicit per-gate angles (as produced by resolve_angles).
StateVector run_with_angles(const Circuit& circuit, std::span<const double> angles);

double expectation(const StateVector& state, const Observable& obs);

struct Gradient {
  double value = 0.0;
  std::vector<double> params;
  std::vector<double> features;
};

/// Exact gradient of <O> by the adjoint method: one forward pass plus one
/// reverse sweep over the gates.
Gradient adjoint_gradient(const Circuit& circuit, std::span<const double> params,
                          std::span<const double> features, const Observable& obs);

struct VectorJacobianProduct {
  std::vector<double> values;  // <O_k> for every observable
  std::vector<double> params;  // sum_k cotangent_k * d<O_k>/dparams
  std::vector<double> features;
};

/// Adjoint sweep for the weighted observable sum_k cotangent_k O_k. With all
/// cotangents zero only the values are meaningful (gradients are zero).
VectorJacobianProduct adjoint_vjp(const Circuit& circuit, std::span<const double> params,
                                  std::span<const double> features,
                                  std::span<const Observable> observables,
                                  std::span<const double> cotangent);

std::vector<double> expectations(const Circuit& circuit, std::span<const double> params,
                                 std::span<const double> features,
                                 std::span<const Observable> observables);

/// Two-term parameter-shift rule applied per gate occurrence; reused slots
/// accumulate one shift pair per occurrence.
Gradient parameter_shift_gradient(const Circuit& circuit, std::span<const double> params,
                                  std::span<const double> features, const Observable& obs);

/// Final state plus d|psi>/d(param slot k) for every trainable slot, computed
/// by forward-mode propagation.
struct StateJacobian {
  StateVector state;
  std::vector<std::vector<Complex>> d_params;
};

StateJacobian state_jacobian(const Circuit& circuit, std::span<const double> params,
                             std::span<const double> features);

}  // namespace pvqml::qsim
