#include "pvqml/qsim.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "pvqml/error.hpp"

namespace pvqml::qsim {

namespace {

using Amps = std::span<Complex>;

constexpr Complex kI{0.0, 1.0};

std::size_t stride_of(int n_qubits, int q) {
  return std::size_t{1} << (n_qubits - 1 - q);
}

// Calls fn(i0, i1) for every amplitude pair differing only in qubit q.
template <class Fn>
void for_each_pair(std::size_t dim, std::size_t stride, Fn&& fn) {
  for (std::size_t block = 0; block < dim; block += 2 * stride) {
    for (std::size_t i = block; i < block + stride; ++i) fn(i, i + stride);
  }
}

void rotate(Amps a, int n, Pauli axis, int q, double angle) {
  const double c = std::cos(angle / 2);
  const double s = std::sin(angle / 2);
  const std::size_t st = stride_of(n, q);
  switch (axis) {
    case Pauli::X:
      for_each_pair(a.size(), st, [&](std::size_t i0, std::size_t i1) {
        const Complex a0 = a[i0], a1 = a[i1];
        a[i0] = c * a0 - kI * s * a1;
        a[i1] = -kI * s * a0 + c * a1;
      });
      break;
    case Pauli::Y:
      for_each_pair(a.size(), st, [&](std::size_t i0, std::size_t i1) {
        const Complex a0 = a[i0], a1 = a[i1];
        a[i0] = c * a0 - s * a1;
        a[i1] = s * a0 + c * a1;
      });
      break;
    case Pauli::Z: {
      const Complex p0{c, -s}, p1{c, s};
      for_each_pair(a.size(), st, [&](std::size_t i0, std::size_t i1) {
        a[i0] *= p0;
        a[i1] *= p1;
      });
      break;
    }
  }
}

void pauli(Amps a, int n, Pauli axis, int q) {
  const std::size_t st = stride_of(n, q);
  switch (axis) {
    case Pauli::X:
      for_each_pair(a.size(), st, [&](std::size_t i0, std::size_t i1) { std::swap(a[i0], a[i1]); });
      break;
    case Pauli::Y:
      for_each_pair(a.size(), st, [&](std::size_t i0, std::size_t i1) {
        const Complex a0 = a[i0], a1 = a[i1];
        a[i0] = -kI * a1;
        a[i1] = kI * a0;
      });
      break;
    case Pauli::Z:
      for_each_pair(a.size(), st, [&](std::size_t, std::size_t i1) { a[i1] = -a[i1]; });
      break;
  }
}

void cnot(Amps a, int n, int control, int target) {
  const std::size_t cmask = stride_of(n, control);
  const std::size_t tmask = stride_of(n, target);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((i & cmask) && !(i & tmask)) std::swap(a[i], a[i | tmask]);
  }
}

void apply_resolved(Amps a, int n, const GateOp& g, double angle) {
  if (g.kind == GateKind::CNOT) {
    cnot(a, n, g.control, g.target);
  } else {
    rotate(a, n, rotation_axis(g.kind), g.target, angle);
  }
}

void apply_inverse(Amps a, int n, const GateOp& g, double angle) {
  apply_resolved(a, n, g, -angle);  // CNOT is self-inverse; the angle is ignored
}

Complex inner(std::span<const Complex> bra, std::span<const Complex> ket) {
  Complex acc{};
  for (std::size_t i = 0; i < bra.size(); ++i) acc += std::conj(bra[i]) * ket[i];
  return acc;
}

void check_lengths(const Circuit& c, std::span<const double> params,
                   std::span<const double> features) {
  if (params.size() != static_cast<std::size_t>(c.n_params())) {
    throw ShapeError("circuit expects " + std::to_string(c.n_params()) + " params, got " +
                     std::to_string(params.size()));
  }
  if (features.size() != static_cast<std::size_t>(c.n_features())) {
    throw ShapeError("circuit expects " + std::to_string(c.n_features()) +
                     " features, got " + std::to_string(features.size()));
  }
}

void check_differentiable(const Circuit& c) {
  for (const auto& g : c.gates()) {
    if (g.kind == GateKind::CNOT && g.angle.is_bound()) {
      throw UnsupportedCircuitError("CNOT gate carries a bound angle; it has no generator");
    }
  }
}

}  // namespace

Pauli rotation_axis(GateKind kind) {
  switch (kind) {
    case GateKind::RX: return Pauli::X;
    case GateKind::RY: return Pauli::Y;
    case GateKind::RZ: return Pauli::Z;
    case GateKind::CNOT: break;
  }
  throw UnsupportedCircuitError("CNOT has no rotation axis");
}

GateKind rotation_gate(Pauli axis) {
  switch (axis) {
    case Pauli::X: return GateKind::RX;
    case Pauli::Y: return GateKind::RY;
    case Pauli::Z: return GateKind::RZ;
  }
  return GateKind::RX;
}

char pauli_char(Pauli axis) {
  switch (axis) {
    case Pauli::X: return 'X';
    case Pauli::Y: return 'Y';
    case Pauli::Z: return 'Z';
  }
  return '?';
}

Pauli parse_pauli(char c) {
  switch (c) {
    case 'X': case 'x': return Pauli::X;
    case 'Y': case 'y': return Pauli::Y;
    case 'Z': case 'z': return Pauli::Z;
    default: throw ConfigError(std::string("unknown Pauli axis '") + c + "'");
  }
}

// ---------------------------------------------------------------- StateVector

StateVector::StateVector(int n_qubits) : n_qubits_(n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits) {
    throw ConfigError("qubit count " + std::to_string(n_qubits) + " outside [1, " +
                      std::to_string(kMaxQubits) + "]");
  }
  amps_.assign(std::size_t{1} << n_qubits, Complex{});
  amps_[0] = 1.0;
}

double StateVector::norm_squared() const {
  double acc = 0.0;
  for (const auto& a : amps_) acc += std::norm(a);
  return acc;
}

void StateVector::check_qubit(int q) const {
  if (q < 0 || q >= n_qubits_) {
    throw ConfigError("qubit index " + std::to_string(q) + " out of range for " +
                      std::to_string(n_qubits_) + " qubits");
  }
}

void StateVector::apply_rotation(Pauli axis, int target, double angle) {
  check_qubit(target);
  rotate(amps_, n_qubits_, axis, target, angle);
}

void StateVector::apply_cnot(int control, int target) {
  check_qubit(control);
  check_qubit(target);
  if (control == target) throw ConfigError("CNOT control equals target");
  cnot(amps_, n_qubits_, control, target);
}

void StateVector::apply_pauli(Pauli axis, int target) {
  check_qubit(target);
  pauli(amps_, n_qubits_, axis, target);
}

Complex StateVector::inner(const StateVector& other) const {
  if (other.dim() != dim()) throw ShapeError("inner product of mismatched registers");
  return qsim::inner(amps_, other.amps_);
}

void StateVector::write_csv(std::ostream& out) const {
  const auto old = out.precision(17);
  out << "index,re,im\n";
  for (std::size_t i = 0; i < amps_.size(); ++i) {
    out << i << ',' << amps_[i].real() << ',' << amps_[i].imag() << '\n';
  }
  out.precision(old);
}

StateVector init_state(int n_qubits) { return StateVector(n_qubits); }

void apply_gate(StateVector& state, const GateOp& gate, double angle) {
  if (gate.kind == GateKind::CNOT) {
    state.apply_cnot(gate.control, gate.target);
  } else {
    state.apply_rotation(rotation_axis(gate.kind), gate.target, angle);
  }
}

// ---------------------------------------------------------------- Observable

Observable::Observable(std::vector<PauliTerm> terms) : terms_(std::move(terms)) {
  if (terms_.empty()) throw ConfigError("observable needs at least one Pauli term");
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    for (std::size_t j = i + 1; j < terms_.size(); ++j) {
      if (terms_[i].qubit == terms_[j].qubit) {
        throw ConfigError("observable repeats qubit " + std::to_string(terms_[i].qubit));
      }
    }
  }
}

void Observable::validate(int n_qubits) const {
  if (terms_.empty()) throw ConfigError("empty observable");
  for (const auto& t : terms_) {
    if (t.qubit < 0 || t.qubit >= n_qubits) {
      throw ConfigError("observable qubit " + std::to_string(t.qubit) + " out of range");
    }
  }
}

void Observable::apply(StateVector& state) const {
  for (const auto& t : terms_) state.apply_pauli(t.axis, t.qubit);
}

// ---------------------------------------------------------------- Circuit

Circuit::Circuit(int n_qubits, int n_params, int n_features)
    : n_qubits_(n_qubits), n_params_(n_params), n_features_(n_features) {
  if (n_qubits < 1 || n_qubits > kMaxQubits) {
    throw ConfigError("qubit count " + std::to_string(n_qubits) + " outside [1, " +
                      std::to_string(kMaxQubits) + "]");
  }
  if (n_params < 0 || n_features < 0) throw ConfigError("negative slot count");
}

Circuit& Circuit::add(const GateOp& g) {
  auto in_range = [&](int q) { return q >= 0 && q < n_qubits_; };
  if (!in_range(g.target)) throw ConfigError("gate target out of range");
  if (g.kind == GateKind::CNOT) {
    if (!in_range(g.control)) throw ConfigError("CNOT control out of range");
    if (g.control == g.target) throw ConfigError("CNOT control equals target");
  }
  if (g.angle.kind == AngleSource::Kind::Param &&
      (g.angle.slot < 0 || g.angle.slot >= n_params_)) {
    throw ConfigError("param slot " + std::to_string(g.angle.slot) + " out of range");
  }
  if (g.angle.kind == AngleSource::Kind::Feature &&
      (g.angle.slot < 0 || g.angle.slot >= n_features_)) {
    throw ConfigError("feature slot " + std::to_string(g.angle.slot) + " out of range");
  }
  gates_.push_back(g);
  return *this;
}

Circuit& Circuit::rotation(Pauli axis, int target, AngleSource angle) {
  return add(GateOp{rotation_gate(axis), target, -1, angle});
}

Circuit& Circuit::cnot(int control, int target) {
  return add(GateOp{GateKind::CNOT, target, control, AngleSource::constant(0.0)});
}

int Circuit::feature_occurrences(int slot) const {
  int n = 0;
  for (const auto& g : gates_) {
    if (g.angle.kind == AngleSource::Kind::Feature && g.angle.slot == slot) ++n;
  }
  return n;
}

std::vector<double> Circuit::resolve_angles(std::span<const double> params,
                                            std::span<const double> features) const {
  check_lengths(*this, params, features);
  std::vector<double> angles(gates_.size());
  for (std::size_t i = 0; i < gates_.size(); ++i) {
    const auto& src = gates_[i].angle;
    switch (src.kind) {
      case AngleSource::Kind::Param: angles[i] = params[src.slot]; break;
      case AngleSource::Kind::Feature: angles[i] = features[src.slot]; break;
      case AngleSource::Kind::Const: angles[i] = src.value; break;
    }
  }
  return angles;
}

// ---------------------------------------------------------------- evaluation

StateVector run_with_angles(const Circuit& circuit, std::span<const double> angles) {
  if (angles.size() != circuit.gates().size()) throw ShapeError("angle count != gate count");
  StateVector psi(circuit.n_qubits());
  const int n = circuit.n_qubits();
  for (std::size_t i = 0; i < angles.size(); ++i) {
    apply_resolved(psi.amplitudes(), n, circuit.gates()[i], angles[i]);
  }
  return psi;
}

StateVector run_circuit(const Circuit& circuit, std::span<const double> params,
                        std::span<const double> features) {
  return run_with_angles(circuit, circuit.resolve_angles(params, features));
}

double expectation(const StateVector& state, const Observable& obs) {
  obs.validate(state.n_qubits());
  StateVector o_psi = state;
  obs.apply(o_psi);
  return state.inner(o_psi).real();
}

std::vector<double> expectations(const Circuit& circuit, std::span<const double> params,
                                 std::span<const double> features,
                                 std::span<const Observable> observables) {
  const StateVector psi = run_circuit(circuit, params, features);
  std::vector<double> out;
  out.reserve(observables.size());
  for (const auto& o : observables) out.push_back(expectation(psi, o));
  return out;
}

VectorJacobianProduct adjoint_vjp(const Circuit& circuit, std::span<const double> params,
                                  std::span<const double> features,
                                  std::span<const Observable> observables,
                                  std::span<const double> cotangent) {
  if (cotangent.size() != observables.size()) {
    throw ShapeError("cotangent length must equal the observable count");
  }
  check_differentiable(circuit);
  const int n = circuit.n_qubits();
  const auto angles = circuit.resolve_angles(params, features);

  StateVector psi = run_with_angles(circuit, angles);

  VectorJacobianProduct out;
  out.values.reserve(observables.size());
  out.params.assign(params.size(), 0.0);
  out.features.assign(features.size(), 0.0);

  // lambda = sum_k c_k O_k |psi>
  StateVector lambda = psi;
  for (auto& a : lambda.amplitudes()) a = 0.0;
  for (std::size_t k = 0; k < observables.size(); ++k) {
    observables[k].validate(n);
    StateVector o_psi = psi;
    observables[k].apply(o_psi);
    out.values.push_back(psi.inner(o_psi).real());
    if (cotangent[k] == 0.0) continue;
    auto dst = lambda.amplitudes();
    auto src = o_psi.amplitudes();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += cotangent[k] * src[i];
  }

  std::vector<Complex> scratch(psi.dim());
  const auto& gates = circuit.gates();
  for (std::size_t idx = gates.size(); idx-- > 0;) {
    const GateOp& g = gates[idx];
    if (g.kind != GateKind::CNOT && g.angle.is_bound()) {
      // d<O>/dtheta = Im <lambda| G |psi_i>, G the rotation's Pauli generator
      auto ps = psi.amplitudes();
      std::copy(ps.begin(), ps.end(), scratch.begin());
      pauli(scratch, n, rotation_axis(g.kind), g.target);
      const double d = inner(lambda.amplitudes(), scratch).imag();
      if (g.angle.kind == AngleSource::Kind::Param) {
        out.params[g.angle.slot] += d;
      } else {
        out.features[g.angle.slot] += d;
      }
    }
    apply_inverse(psi.amplitudes(), n, g, angles[idx]);
    apply_inverse(lambda.amplitudes(), n, g, angles[idx]);
  }
  return out;
}

Gradient adjoint_gradient(const Circuit& circuit, std::span<const double> params,
                          std::span<const double> features, const Observable& obs) {
  const double one = 1.0;
  auto vjp = adjoint_vjp(circuit, params, features, std::span(&obs, 1), std::span(&one, 1));
  return Gradient{vjp.values[0], std::move(vjp.params), std::move(vjp.features)};
}

Gradient parameter_shift_gradient(const Circuit& circuit, std::span<const double> params,
                                  std::span<const double> features, const Observable& obs) {
  check_differentiable(circuit);
  auto angles = circuit.resolve_angles(params, features);
  Gradient out;
  out.value = expectation(run_with_angles(circuit, angles), obs);
  out.params.assign(params.size(), 0.0);
  out.features.assign(features.size(), 0.0);
  constexpr double shift = std::numbers::pi / 2;
  const auto& gates = circuit.gates();
  for (std::size_t i = 0; i < gates.size(); ++i) {
    if (gates[i].kind == GateKind::CNOT || !gates[i].angle.is_bound()) continue;
    const double base = angles[i];
    angles[i] = base + shift;
    const double plus = expectation(run_with_angles(circuit, angles), obs);
    angles[i] = base - shift;
    const double minus = expectation(run_with_angles(circuit, angles), obs);
    angles[i] = base;
    const double d = (plus - minus) / 2;
    if (gates[i].angle.kind == AngleSource::Kind::Param) {
      out.params[gates[i].angle.slot] += d;
    } else {
      out.features[gates[i].angle.slot] += d;
    }
  }
  return out;
}

StateJacobian state_jacobian(const Circuit& circuit, std::span<const double> params,
                             std::span<const double> features) {
  check_differentiable(circuit);
  const int n = circuit.n_qubits();
  const auto angles = circuit.resolve_angles(params, features);
  StateVector psi(n);
  std::vector<std::vector<Complex>> d(params.size(), std::vector<Complex>(psi.dim()));
  std::vector<Complex> scratch(psi.dim());
  const auto& gates = circuit.gates();
  for (std::size_t i = 0; i < gates.size(); ++i) {
    const GateOp& g = gates[i];
    apply_resolved(psi.amplitudes(), n, g, angles[i]);
    for (auto& dk : d) apply_resolved(dk, n, g, angles[i]);
    if (g.kind != GateKind::CNOT && g.angle.kind == AngleSource::Kind::Param) {
      // d(U psi)/dtheta = (-i/2) G U psi
      auto ps = psi.amplitudes();
      std::copy(ps.begin(), ps.end(), scratch.begin());
      pauli(scratch, n, rotation_axis(g.kind), g.target);
      auto& dk = d[g.angle.slot];
      for (std::size_t j = 0; j < scratch.size(); ++j) dk[j] += Complex{0.0, -0.5} * scratch[j];
    }
  }
  return StateJacobian{std::move(psi), std::move(d)};
}

}  // namespace pvqml::qsim
