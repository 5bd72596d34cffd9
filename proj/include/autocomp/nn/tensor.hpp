#pragma once

// Reverse-mode differentiable tensors.
//
// A Tensor is a shared handle to a Node holding an NCHW value buffer and a
// lazily allocated gradient. Operations that see a non-null Tape and at least
// one input requiring gradients push a backward step onto the tape; the tape
// replays those steps in reverse order.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "autocomp/error.hpp"

namespace autocomp::nn {

struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const noexcept { return static_cast<std::size_t>(n) * c * h * w; }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }
  std::string str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

template <class T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;

  std::vector<T>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    return grad;
  }
};

template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) throw DataError("negative tensor dimension");
    node_->shape = shape;
    node_->value.assign(shape.numel(), fill);
    node_->requires_grad = requires_grad;
  }
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
    if (values.size() != shape.numel())
      throw DataError("tensor data length " + std::to_string(values.size()) + " does not match shape " + shape.str());
    node_->shape = shape;
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
  }

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->value.size(); }

  std::span<T> data() { return node_->value; }
  std::span<const T> data() const { return node_->value; }

  // Empty until a backward pass reaches this tensor.
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> grad() { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  T item() const {
    if (numel() != 1) throw DataError("item() on a tensor with " + std::to_string(numel()) + " elements");
    return node_->value[0];
  }

  T& at(int n, int c, int y, int x) { return node_->value[offset(n, c, y, x)]; }
  T at(int n, int c, int y, int x) const { return node_->value[offset(n, c, y, x)]; }

  // Deep copy without autograd history.
  Tensor clone() const {
    Tensor out(shape(), std::vector<T>(node_->value), node_->requires_grad);
    return out;
  }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::size_t offset(int n, int c, int y, int x) const {
    const Shape& s = node_->shape;
    return ((static_cast<std::size_t>(n) * s.c + c) * s.h + y) * s.w + x;
  }

  std::shared_ptr<Node<T>> node_;
};

template <class T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> step) { steps_.push_back(std::move(step)); }

  // Seeds d(loss)/d(loss) = 1 and runs every recorded step in reverse.
  void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1) throw DataError("backward() needs a scalar loss");
    loss.node()->ensure_grad()[0] += T(1);
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    steps_.clear();
  }

  void clear() { steps_.clear(); }
  std::size_t size() const noexcept { return steps_.size(); }

 private:
  std::vector<std::function<void()>> steps_;
};

// Trainable tensor plus ADAM state.
template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  std::vector<T> first_moment;
  std::vector<T> second_moment;
  std::int64_t step = 0;

  Parameter(std::string param_name, Shape shape)
      : name(std::move(param_name)),
        value(shape, T(0), true),
        first_moment(shape.numel(), T(0)),
        second_moment(shape.numel(), T(0)) {}
};

// Owns parameters at stable addresses, in registration order.
template <class T>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  Parameter<T>* add(const std::string& name, Shape shape) {
    for (const auto& p : params_)
      if (p->name == name) throw DataError("duplicate parameter name: " + name);
    params_.push_back(std::make_unique<Parameter<T>>(name, shape));
    return params_.back().get();
  }

  std::size_t size() const noexcept { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

  Parameter<T>* find(const std::string& name) {
    for (auto& p : params_)
      if (p->name == name) return p.get();
    return nullptr;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.numel();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->value.zero_grad();
  }

  std::vector<Parameter<T>*> all() {
    std::vector<Parameter<T>*> out;
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
};

}  // namespace autocomp::nn
