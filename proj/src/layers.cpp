#include "pvqml/layers.hpp"

#include <string>

#include "pvqml/error.hpp"

namespace pvqml::layers {

using qsim::AngleSource;
using qsim::Circuit;
using qsim::Observable;
using qsim::Pauli;

Linear Linear::create(ParamRegistry& reg, const std::string& name, std::size_t in,
                      std::size_t out, Activation act) {
  if (in == 0 || out == 0) throw ConfigError("linear layer '" + name + "' has a zero dimension");
  Linear l;
  l.in = in;
  l.out = out;
  l.act = act;
  l.weight_seg = reg.add(name + ".weight", {out, in});
  l.bias_seg = reg.add(name + ".bias", {out});
  return l;
}

Tensor Linear::forward(Tape& tape, const Tensor& x) const {
  if (x.size() != in) {
    throw ShapeError("linear layer expects input of length " + std::to_string(in) + ", got " +
                     std::to_string(x.size()));
  }
  return ad::activation(ad::affine(x, tape.param(weight_seg), tape.param(bias_seg)), act);
}

// ---------------------------------------------------------------- quantum

std::vector<double> QuantumCircuitLayer::evaluate(std::span<const double> weights,
                                                  std::span<const double> x) const {
  return qsim::expectations(circuit, weights, x, observables);
}

Tensor quantum_forward(Tape& tape, std::shared_ptr<const QuantumCircuitLayer> layer,
                       const Tensor& weights, const Tensor& x) {
  if (weights.size() != static_cast<std::size_t>(layer->circuit.n_params())) {
    throw ShapeError("quantum layer expects " + std::to_string(layer->circuit.n_params()) +
                     " weights, got " + std::to_string(weights.size()));
  }
  if (x.size() != static_cast<std::size_t>(layer->circuit.n_features())) {
    throw ShapeError("quantum layer expects " + std::to_string(layer->circuit.n_features()) +
                     " inputs, got " + std::to_string(x.size()));
  }
  auto out = layer->evaluate(weights.value(), x.value());
  const std::size_t n_out = out.size();
  const int wi = weights.id(), xi = x.id();
  return tape.record(std::move(out), ad::Shape{n_out}, {wi, xi},
                     [layer = std::move(layer), wi, xi](Tape& tp, int self) {
                       auto g = tp.grad(self);
                       bool any = false;
                       for (double v : g) any = any || v != 0.0;
                       if (!any) return;
                       const auto vjp = qsim::adjoint_vjp(layer->circuit, tp.value(wi),
                                                          tp.value(xi), layer->observables, g);
                       if (tp.requires_grad(wi)) {
                         auto gw = tp.grad_mut(wi);
                         for (std::size_t k = 0; k < gw.size(); ++k) gw[k] += vjp.params[k];
                       }
                       if (tp.requires_grad(xi)) {
                         auto gx = tp.grad_mut(xi);
                         for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += vjp.features[k];
                       }
                     });
}

int VvrqConfig::param_count() const {
  return (entanglement == Entanglement::Basic ? 1 : 3) * qubits * depth;
}

void VvrqConfig::validate() const {
  if (qubits < 1 || qubits > qsim::kMaxQubits) throw ConfigError("VVRQ qubit count out of range");
  if (depth < 0) throw ConfigError("VVRQ depth must be non-negative");
}

std::shared_ptr<const QuantumCircuitLayer> build_vvrq(const VvrqConfig& cfg) {
  cfg.validate();
  const int q = cfg.qubits;
  Circuit c(q, cfg.param_count(), q);
  for (int j = 0; j < q; ++j) c.rotation(cfg.embedding, j, AngleSource::feature(j));
  int k = 0;
  for (int layer = 0; layer < cfg.depth; ++layer) {
    for (int j = 0; j < q; ++j) {
      if (cfg.entanglement == Entanglement::Basic) {
        c.rx(j, AngleSource::param(k++));
      } else {
        c.rz(j, AngleSource::param(k++));
        c.ry(j, AngleSource::param(k++));
        c.rz(j, AngleSource::param(k++));
      }
    }
    // ring; for two qubits this is CNOT(0,1) then CNOT(1,0)
    if (q > 1) {
      for (int j = 0; j < q; ++j) c.cnot(j, (j + 1) % q);
    }
  }
  std::vector<Observable> obs;
  for (int j = 0; j < q; ++j) obs.push_back(Observable::single(j, cfg.measure));
  return std::make_shared<const QuantumCircuitLayer>(QuantumCircuitLayer{std::move(c), std::move(obs)});
}

std::vector<double> vvrq_forward(const VvrqConfig& cfg, std::span<const double> weights,
                                 std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(cfg.qubits)) {
    throw ShapeError("VVRQ expects " + std::to_string(cfg.qubits) + " inputs");
  }
  if (weights.size() != static_cast<std::size_t>(cfg.param_count())) {
    throw ShapeError("VVRQ expects " + std::to_string(cfg.param_count()) + " weights");
  }
  return build_vvrq(cfg)->evaluate(weights, x);
}

void QdiConfig::validate() const {
  if (qubits < 1 || qubits > qsim::kMaxQubits) throw ConfigError("QDI qubit count out of range");
  if (depth < 1) throw ConfigError("QDI needs at least one encoding block");
}

std::shared_ptr<const QuantumCircuitLayer> build_qdi(const QdiConfig& cfg) {
  cfg.validate();
  const int q = cfg.qubits;
  Circuit c(q, cfg.param_count(), cfg.feature_count());
  int k = 0;
  auto variational = [&] {
    for (int j = 0; j < q; ++j) c.ry(j, AngleSource::param(k++));
    for (int j = 0; j + 1 < q; ++j) c.cnot(j, j + 1);
  };
  variational();
  for (int block = 0; block < cfg.depth; ++block) {
    for (int j = 0; j < q; ++j) {
      c.rz(j, AngleSource::feature(cfg.reupload ? j : block * q + j));
    }
    variational();
  }
  std::vector<Observable> obs;
  if (cfg.readout == QdiReadout::ScalarY) {
    for (int j = 1; j < q; ++j) c.cnot(j, 0);
    obs.push_back(Observable::single(0, Pauli::Y));
  } else {
    for (int j = 0; j < q; ++j) obs.push_back(Observable::single(j, Pauli::Z));
  }
  return std::make_shared<const QuantumCircuitLayer>(QuantumCircuitLayer{std::move(c), std::move(obs)});
}

std::vector<double> qdi_forward(const QdiConfig& cfg, std::span<const double> weights,
                                std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(cfg.feature_count())) {
    throw ShapeError("QDI expects " + std::to_string(cfg.feature_count()) + " inputs");
  }
  if (weights.size() != static_cast<std::size_t>(cfg.param_count())) {
    throw ShapeError("QDI expects " + std::to_string(cfg.param_count()) + " weights");
  }
  return build_qdi(cfg)->evaluate(weights, x);
}

// ---------------------------------------------------------------- recurrent

LstmState lstm_gate_update(const Tensor& i_pre, const Tensor& f_pre, const Tensor& g_pre,
                           const Tensor& o_pre, const Tensor& c_prev) {
  auto i = ad::sigmoid(i_pre);
  auto f = ad::sigmoid(f_pre);
  auto g = ad::tanh(g_pre);
  auto o = ad::sigmoid(o_pre);
  auto c = ad::add(ad::mul(f, c_prev), ad::mul(i, g));
  auto h = ad::mul(o, ad::tanh(c));
  return {h, c};
}

LstmState lstm_zero_state(Tape& tape, std::size_t hidden) {
  return {tape.constant(std::vector<double>(hidden, 0.0)),
          tape.constant(std::vector<double>(hidden, 0.0))};
}

LstmCell LstmCell::create(ParamRegistry& reg, const std::string& prefix, std::size_t input_dim,
                          std::size_t hidden_dim) {
  if (input_dim == 0 || hidden_dim == 0) throw ConfigError("LSTM cell has a zero dimension");
  LstmCell cell;
  cell.input_dim = input_dim;
  cell.hidden_dim = hidden_dim;
  cell.w_ih = reg.add(prefix + ".weight_ih", {4 * hidden_dim, input_dim});
  cell.w_hh = reg.add(prefix + ".weight_hh", {4 * hidden_dim, hidden_dim});
  cell.b_ih = reg.add(prefix + ".bias_ih", {4 * hidden_dim});
  cell.b_hh = reg.add(prefix + ".bias_hh", {4 * hidden_dim});
  return cell;
}

LstmState LstmCell::step(Tape& tape, const Tensor& x, const LstmState& prev) const {
  if (x.size() != input_dim || prev.h.size() != hidden_dim || prev.c.size() != hidden_dim) {
    throw ShapeError("LSTM step: expected x[" + std::to_string(input_dim) + "], h/C[" +
                     std::to_string(hidden_dim) + "]");
  }
  auto pre = ad::add(ad::affine(x, tape.param(w_ih), tape.param(b_ih)),
                     ad::affine(prev.h, tape.param(w_hh), tape.param(b_hh)));
  auto gates = ad::split(pre, 4);
  return lstm_gate_update(gates[0], gates[1], gates[2], gates[3], prev.c);
}

HqLstmCell HqLstmCell::create(ParamRegistry& reg, const std::string& prefix,
                              std::size_t input_dim, std::size_t hidden_dim,
                              const QdiConfig& qdi) {
  if (qdi.readout != QdiReadout::VectorZ || !qdi.reupload) {
    throw ConfigError("HQLSTM gates use re-uploading QDI layers with vector-Z readout");
  }
  HqLstmCell cell;
  cell.input_dim = input_dim;
  cell.hidden_dim = hidden_dim;
  cell.qdi = qdi;
  const std::size_t nq = static_cast<std::size_t>(qdi.qubits);
  cell.input_map = Linear::create(reg, prefix + ".input_map", input_dim, 4 * nq);
  cell.hidden_map = Linear::create(reg, prefix + ".hidden_map", hidden_dim, 4 * nq);
  static const char* names[4] = {"input", "forget", "cell", "output"};
  for (int k = 0; k < 4; ++k) {
    cell.qdi_weights[k] = reg.add(prefix + ".qdi_" + names[k],
                                  {static_cast<std::size_t>(qdi.param_count())});
  }
  for (int k = 0; k < 4; ++k) {
    cell.gate_maps[k] = Linear::create(reg, prefix + ".gate_" + names[k], nq, hidden_dim);
  }
  cell.circuit = build_qdi(qdi);
  return cell;
}

std::size_t HqLstmCell::param_count() const {
  std::size_t n = input_map.param_count() + hidden_map.param_count();
  for (int k = 0; k < 4; ++k) {
    n += static_cast<std::size_t>(qdi.param_count()) + gate_maps[k].param_count();
  }
  return n;
}

LstmState HqLstmCell::step(Tape& tape, const Tensor& x, const LstmState& prev) const {
  if (x.size() != input_dim || prev.h.size() != hidden_dim || prev.c.size() != hidden_dim) {
    throw ShapeError("HQLSTM step: expected x[" + std::to_string(input_dim) + "], h/C[" +
                     std::to_string(hidden_dim) + "]");
  }
  auto combined = ad::add(input_map.forward(tape, x), hidden_map.forward(tape, prev.h));
  auto groups = ad::split(combined, 4);
  Tensor pre[4];
  for (int k = 0; k < 4; ++k) {
    auto q = quantum_forward(tape, circuit, tape.param(qdi_weights[k]), groups[k]);
    pre[k] = gate_maps[k].forward(tape, q);
  }
  return lstm_gate_update(pre[0], pre[1], pre[2], pre[3], prev.c);
}

}  // namespace pvqml::layers
