#include "pvqml/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "pvqml/error.hpp"

namespace pvqml::ad {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// ---------------------------------------------------------------- registry

std::size_t ParamRegistry::add(std::string name, Shape shape) {
  for (const auto& s : segments_) {
    if (s.name == name) throw ConfigError("duplicate parameter segment '" + name + "'");
  }
  Segment seg{std::move(name), values_.size(), std::move(shape)};
  values_.resize(values_.size() + seg.size(), 0.0);
  segments_.push_back(std::move(seg));
  return segments_.size() - 1;
}

std::size_t ParamRegistry::find(const std::string& name) const {
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (segments_[i].name == name) return i;
  }
  throw ConfigError("no parameter segment named '" + name + "'");
}

std::span<double> ParamRegistry::values(std::size_t seg) {
  const auto& s = segments_.at(seg);
  return std::span<double>(values_).subspan(s.offset, s.size());
}

std::span<const double> ParamRegistry::values(std::size_t seg) const {
  const auto& s = segments_.at(seg);
  return std::span<const double>(values_).subspan(s.offset, s.size());
}

void ParamRegistry::assign(std::span<const double> flat) {
  if (flat.size() != values_.size()) {
    throw ShapeError("parameter vector length " + std::to_string(flat.size()) +
                     " != registry size " + std::to_string(values_.size()));
  }
  std::copy(flat.begin(), flat.end(), values_.begin());
}

// ---------------------------------------------------------------- tensor

const Shape& Tensor::shape() const { return tape_->shape(id_); }
std::size_t Tensor::size() const { return tape_->value(id_).size(); }
std::span<const double> Tensor::value() const { return tape_->value(id_); }
std::span<const double> Tensor::grad() const { return tape_->grad(id_); }

double Tensor::item() const {
  auto v = value();
  if (v.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return v[0];
}

// ---------------------------------------------------------------- tape

Tape::Tape(const ParamRegistry& registry)
    : registry_(&registry), param_nodes_(registry.segments().size(), -1) {}

int Tape::push(Node node) {
  if (node.value.size() != shape_size(node.shape)) {
    throw ShapeError("node value length does not match shape " + shape_str(node.shape));
  }
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor Tape::constant(std::vector<double> values, Shape shape) {
  return Tensor(this, push(Node{std::move(values), {}, std::move(shape), {}, {}, false}));
}

Tensor Tape::constant(std::vector<double> values) {
  Shape s{values.size()};
  return constant(std::move(values), std::move(s));
}

Tensor Tape::leaf(std::vector<double> values, Shape shape) {
  return Tensor(this, push(Node{std::move(values), {}, std::move(shape), {}, {}, true}));
}

Tensor Tape::leaf(std::vector<double> values) {
  Shape s{values.size()};
  return leaf(std::move(values), std::move(s));
}

Tensor Tape::param(std::size_t segment) {
  if (!registry_) throw ContractError("tape has no parameter registry bound");
  if (segment >= param_nodes_.size()) throw ConfigError("parameter segment out of range");
  if (param_nodes_[segment] < 0) {
    auto v = registry_->values(segment);
    param_nodes_[segment] =
        push(Node{std::vector<double>(v.begin(), v.end()), {},
                  registry_->segment(segment).shape, {}, {}, true});
  }
  return Tensor(this, param_nodes_[segment]);
}

Tensor Tape::param(const std::string& name) {
  if (!registry_) throw ContractError("tape has no parameter registry bound");
  return param(registry_->find(name));
}

Tensor Tape::record(std::vector<double> values, Shape shape, std::vector<int> inputs,
                    BackwardFn backward) {
  bool rg = false;
  for (int in : inputs) {
    if (in < 0 || in >= static_cast<int>(nodes_.size())) {
      throw ContractError("op input is not recorded on this tape");
    }
    rg = rg || nodes_[in].requires_grad;
  }
  return Tensor(this, push(Node{std::move(values), {}, std::move(shape), std::move(inputs),
                                rg ? std::move(backward) : BackwardFn{}, rg}));
}

std::span<double> Tape::grad_mut(int id) { return nodes_.at(id).grad; }

void Tape::backward(const Tensor& loss) {
  if (loss.tape() != this) throw ContractError("loss tensor belongs to another tape");
  if (loss.size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (backward_done_) throw ContractError("backward already ran on this tape");
  backward_done_ = true;
  const int root = loss.id();
  for (int i = 0; i <= root; ++i) {
    auto& n = nodes_[i];
    if (n.requires_grad) n.grad.assign(n.value.size(), 0.0);
  }
  if (!nodes_[root].requires_grad) return;
  nodes_[root].grad[0] = 1.0;
  for (int i = root; i >= 0; --i) {
    if (nodes_[i].backward) nodes_[i].backward(*this, i);
  }
}

std::vector<double> Tape::param_grad() const {
  std::vector<double> g(registry_ ? registry_->size() : 0, 0.0);
  accumulate_param_grad(g);
  return g;
}

void Tape::accumulate_param_grad(std::span<double> acc) const {
  if (!registry_) return;
  if (acc.size() != registry_->size()) throw ShapeError("gradient buffer length mismatch");
  for (std::size_t s = 0; s < param_nodes_.size(); ++s) {
    const int id = param_nodes_[s];
    if (id < 0 || nodes_[id].grad.empty()) continue;
    const auto off = registry_->segment(s).offset;
    const auto& g = nodes_[id].grad;
    for (std::size_t k = 0; k < g.size(); ++k) acc[off + k] += g[k];
  }
}

// ---------------------------------------------------------------- ops

namespace {

Tape& same_tape(const Tensor& a, const Tensor& b) {
  if (!a.valid() || a.tape() != b.tape()) throw ContractError("tensors live on different tapes");
  return *a.tape();
}

void require_same_size(const Tensor& a, const Tensor& b, const char* op) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " do not conform");
  }
}

// Accumulates `g` into the gradient of node `id` when it tracks one.
void accumulate(Tape& t, int id, std::size_t i, double g) {
  if (t.requires_grad(id)) t.grad_mut(id)[i] += g;
}

}  // namespace

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation '" + name + "'");
}

Tensor affine(const Tensor& x, const Tensor& W, const Tensor& b) {
  Tape& t = same_tape(x, W);
  same_tape(x, b);
  const auto& ws = W.shape();
  if (ws.size() != 2) throw ShapeError("affine weight must be a matrix");
  const std::size_t m = ws[0], n = ws[1];
  if (x.size() != n || b.size() != m) {
    throw ShapeError("affine: W " + shape_str(ws) + ", x " + shape_str(x.shape()) + ", b " +
                     shape_str(b.shape()));
  }
  auto xv = x.value();
  auto wv = W.value();
  auto bv = b.value();
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = bv[i];
    const double* row = wv.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * xv[j];
    out[i] = acc;
  }
  const int xi = x.id(), wi = W.id(), bi = b.id();
  return t.record(std::move(out), Shape{m}, {xi, wi, bi}, [=](Tape& tp, int self) {
    auto g = tp.grad(self);
    auto xv = tp.value(xi);
    auto wv = tp.value(wi);
    if (tp.requires_grad(bi)) {
      auto gb = tp.grad_mut(bi);
      for (std::size_t i = 0; i < m; ++i) gb[i] += g[i];
    }
    if (tp.requires_grad(wi)) {
      auto gw = tp.grad_mut(wi);
      for (std::size_t i = 0; i < m; ++i) {
        if (g[i] == 0.0) continue;
        double* row = gw.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) row[j] += g[i] * xv[j];
      }
    }
    if (tp.requires_grad(xi)) {
      auto gx = tp.grad_mut(xi);
      for (std::size_t i = 0; i < m; ++i) {
        if (g[i] == 0.0) continue;
        const double* row = wv.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) gx[j] += g[i] * row[j];
      }
    }
  });
}

Tensor activation(const Tensor& x, Activation kind) {
  switch (kind) {
    case Activation::Identity: return x;
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Tanh: return tanh(x);
  }
  return x;
}

Tensor sigmoid(const Tensor& x) {
  auto xv = x.value();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-xv[i]));
  const int xi = x.id();
  return x.tape()->record(std::move(out), x.shape(), {xi}, [xi](Tape& tp, int self) {
    auto g = tp.grad(self);
    auto y = tp.value(self);
    auto gx = tp.grad_mut(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Tensor tanh(const Tensor& x) {
  auto xv = x.value();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::tanh(xv[i]);
  const int xi = x.id();
  return x.tape()->record(std::move(out), x.shape(), {xi}, [xi](Tape& tp, int self) {
    auto g = tp.grad(self);
    auto y = tp.value(self);
    auto gx = tp.grad_mut(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tape& t = same_tape(a, b);
  require_same_size(a, b, "add");
  auto av = a.value();
  auto bv = b.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  const int ai = a.id(), bi = b.id();
  return t.record(std::move(out), a.shape(), {ai, bi}, [ai, bi](Tape& tp, int self) {
    auto g = tp.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) {
      accumulate(tp, ai, i, g[i]);
      accumulate(tp, bi, i, g[i]);
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tape& t = same_tape(a, b);
  require_same_size(a, b, "mul");
  auto av = a.value();
  auto bv = b.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  const int ai = a.id(), bi = b.id();
  return t.record(std::move(out), a.shape(), {ai, bi}, [ai, bi](Tape& tp, int self) {
    auto g = tp.grad(self);
    auto av = tp.value(ai);
    auto bv = tp.value(bi);
    for (std::size_t i = 0; i < g.size(); ++i) {
      accumulate(tp, ai, i, g[i] * bv[i]);
      accumulate(tp, bi, i, g[i] * av[i]);
    }
  });
}

Tensor mul_const(const Tensor& x, std::vector<double> factor) {
  if (factor.size() != x.size()) throw ShapeError("mul_const: factor length mismatch");
  auto xv = x.value();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * factor[i];
  const int xi = x.id();
  return x.tape()->record(std::move(out), x.shape(), {xi},
                          [xi, f = std::move(factor)](Tape& tp, int self) {
                            auto g = tp.grad(self);
                            auto gx = tp.grad_mut(xi);
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * f[i];
                          });
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  Tape& t = *parts[0].tape();
  std::vector<double> out;
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (p.tape() != &t) throw ContractError("tensors live on different tapes");
    offsets.push_back(out.size());
    auto v = p.value();
    out.insert(out.end(), v.begin(), v.end());
    ids.push_back(p.id());
  }
  const std::size_t total = out.size();
  return t.record(std::move(out), Shape{total}, ids,
                  [ids, offsets](Tape& tp, int self) {
                    auto g = tp.grad(self);
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      if (!tp.requires_grad(ids[k])) continue;
                      auto gk = tp.grad_mut(ids[k]);
                      for (std::size_t i = 0; i < gk.size(); ++i) gk[i] += g[offsets[k] + i];
                    }
                  });
}

Tensor slice(const Tensor& x, std::size_t offset, std::size_t length) {
  if (offset + length > x.size() || length == 0) {
    throw ShapeError("slice [" + std::to_string(offset) + ", " +
                     std::to_string(offset + length) + ") outside tensor of size " +
                     std::to_string(x.size()));
  }
  auto xv = x.value();
  std::vector<double> out(xv.begin() + offset, xv.begin() + offset + length);
  const int xi = x.id();
  return x.tape()->record(std::move(out), Shape{length}, {xi},
                          [xi, offset](Tape& tp, int self) {
                            auto g = tp.grad(self);
                            auto gx = tp.grad_mut(xi);
                            for (std::size_t i = 0; i < g.size(); ++i) gx[offset + i] += g[i];
                          });
}

std::vector<Tensor> split(const Tensor& x, std::size_t groups) {
  if (groups == 0 || x.size() % groups != 0) {
    throw ShapeError("cannot split size " + std::to_string(x.size()) + " into " +
                     std::to_string(groups) + " equal groups");
  }
  const std::size_t len = x.size() / groups;
  std::vector<Tensor> out;
  for (std::size_t k = 0; k < groups; ++k) out.push_back(slice(x, k * len, len));
  return out;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.value()) acc += v;
  const int xi = x.id();
  return x.tape()->record({acc}, Shape{1}, {xi}, [xi](Tape& tp, int self) {
    const double g = tp.grad(self)[0];
    for (auto& gx : tp.grad_mut(xi)) gx += g;
  });
}

Tensor dot(const Tensor& a, const Tensor& b) { return sum(mul(a, b)); }

Tensor mse(const Tensor& pred, std::span<const double> target) {
  if (pred.size() != target.size() || target.empty()) {
    throw ShapeError("mse: prediction length " + std::to_string(pred.size()) +
                     " vs target length " + std::to_string(target.size()));
  }
  auto pv = pred.value();
  const double n = static_cast<double>(pv.size());
  double acc = 0.0;
  std::vector<double> diff(pv.size());
  for (std::size_t i = 0; i < pv.size(); ++i) {
    diff[i] = pv[i] - target[i];
    acc += diff[i] * diff[i];
  }
  const int pi = pred.id();
  return pred.tape()->record({acc / n}, Shape{1}, {pi},
                             [pi, n, d = std::move(diff)](Tape& tp, int self) {
                               const double g = tp.grad(self)[0];
                               auto gp = tp.grad_mut(pi);
                               for (std::size_t i = 0; i < d.size(); ++i) gp[i] += g * 2.0 * d[i] / n;
                             });
}

}  // namespace pvqml::ad
