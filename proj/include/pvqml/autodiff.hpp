#pragma once

// Tape-based reverse-mode differentiation over dense float64 tensors.
//
// Only the vector/matrix operations the forecasting models need are provided.
// A Tensor is a handle (tape, node id); the tape owns values and gradients.
// Tapes are single-threaded and are meant to live for one forward/backward
// pass of one sample.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace pvqml::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Flat parameter vector partitioned into named segments.
class ParamRegistry {
 public:
  struct Segment {
    std::string name;
    std::size_t offset = 0;
    Shape shape;
    std::size_t size() const { return shape_size(shape); }
  };

  /// Appends a zero-initialised segment and returns its index.
  std::size_t add(std::string name, Shape shape);

  std::size_t size() const { return values_.size(); }
  const std::vector<Segment>& segments() const { return segments_; }
  const Segment& segment(std::size_t i) const { return segments_.at(i); }
  /// Index of the named segment; throws ConfigError if absent.
  std::size_t find(const std::string& name) const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values(std::size_t seg);
  std::span<const double> values(std::size_t seg) const;

  /// Replaces every value; throws ShapeError on length mismatch.
  void assign(std::span<const double> flat);

 private:
  std::vector<Segment> segments_;
  std::vector<double> values_;
};

class Tape;

class Tensor {
 public:
  Tensor() = default;
  Tensor(Tape* tape, int id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

  const Shape& shape() const;
  std::size_t size() const;
  std::span<const double> value() const;
  /// Empty until backward() has run.
  std::span<const double> grad() const;
  double item() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  /// Binds parameter leaves to a registry; gradients land in param_grad().
  explicit Tape(const ParamRegistry& registry);

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(std::vector<double> values, Shape shape);
  Tensor constant(std::vector<double> values);
  /// Free leaf whose gradient is kept on the tape.
  Tensor leaf(std::vector<double> values, Shape shape);
  Tensor leaf(std::vector<double> values);
  /// Leaf bound to a registry segment; created once per tape and cached.
  Tensor param(std::size_t segment);
  Tensor param(const std::string& name);

  /// Records an op node. `backward(tape, self)` reads grad(self) and accumulates
  /// into the grads of its inputs via grad_mut(). Inputs must already be on
  /// the tape; the rule is dropped when no input requires a gradient.
  Tensor record(std::vector<double> values, Shape shape, std::vector<int> inputs,
                BackwardFn backward);

  /// Reverse sweep from a scalar loss; throws ContractError otherwise.
  void backward(const Tensor& loss);

  /// Flat gradient aligned with the bound registry (zeros for unused segments).
  std::vector<double> param_grad() const;
  /// Adds param_grad() into `acc` without allocating.
  void accumulate_param_grad(std::span<double> acc) const;

  const ParamRegistry* registry() const { return registry_; }
  std::size_t node_count() const { return nodes_.size(); }

  const Shape& shape(int id) const { return nodes_.at(id).shape; }
  std::span<const double> value(int id) const { return nodes_.at(id).value; }
  std::span<const double> grad(int id) const { return nodes_.at(id).grad; }
  std::span<double> grad_mut(int id);
  bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }

 private:
  struct Node {
    std::vector<double> value;
    std::vector<double> grad;
    Shape shape;
    std::vector<int> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  int push(Node node);

  const ParamRegistry* registry_ = nullptr;
  std::vector<int> param_nodes_;  // per registry segment, -1 when unused
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

enum class Activation { Identity, Sigmoid, Tanh };

Activation parse_activation(const std::string& name);

/// out = W x + b with W [m x n], x [n], b [m].
Tensor affine(const Tensor& x, const Tensor& W, const Tensor& b);
Tensor activation(const Tensor& x, Activation kind);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// Elementwise product with a constant (e.g. a dropout mask).
Tensor mul_const(const Tensor& x, std::vector<double> factor);
Tensor concat(std::span<const Tensor> parts);
Tensor slice(const Tensor& x, std::size_t offset, std::size_t length);
std::vector<Tensor> split(const Tensor& x, std::size_t groups);
Tensor sum(const Tensor& x);
Tensor dot(const Tensor& a, const Tensor& b);
/// mean((pred - target)^2) as a scalar tensor; target is constant.
Tensor mse(const Tensor& pred, std::span<const double> target);

}  // namespace pvqml::ad
