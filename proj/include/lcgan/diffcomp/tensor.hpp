#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lcgan {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Raised for incompatible operand shapes; the message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

template <typename T>
struct Node;

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

// Receives the gradient of the node's output and adds the contributions into
// the gradients of the inputs that require one.
template <typename T>
using BackwardFn = std::function<void(const std::vector<T>& grad_out)>;

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<NodePtr<T>> inputs;
  BackwardFn<T> backward;

  // Gradient buffer of an input, allocated (zero-filled) on first use.
  std::vector<T>& grad_buffer() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    return grad;
  }
};

}  // namespace detail

/// Handle to a node of a dynamically built computation graph.
///
/// Copies share the underlying node. Values of non-leaf tensors are fixed once
/// the producing op returns; leaves (inputs and parameters) may be mutated in
/// place through mutable_data(), which is how optimizers update weights.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  // Builds the result of a differentiable op. When no input requires a
  // gradient the graph edge and the backward closure are dropped.
  static Tensor from_op(Shape shape, std::vector<T> data,
                        std::vector<Tensor> inputs,
                        detail::BackwardFn<T> backward);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::int64_t dim(std::size_t axis) const;
  std::int64_t numel() const;

  std::span<const T> data() const;
  std::span<T> mutable_data();
  T item() const;

  bool requires_grad() const;
  bool is_leaf() const;
  void set_requires_grad(bool value);

  bool has_grad() const;
  std::span<const T> grad() const;
  void zero_grad();

  /// Same values, cut from the graph.
  Tensor detach() const;
  /// Deep copy of the values into a fresh leaf.
  Tensor clone(bool requires_grad = false) const;

  /// Reverse-mode sweep from a scalar. Leaf gradients accumulate across calls;
  /// intermediate gradients hold the values of the latest sweep.
  void backward() const;

  const detail::NodePtr<T>& node() const { return node_; }

 private:
  explicit Tensor(detail::NodePtr<T> node) : node_(std::move(node)) {}
  const detail::Node<T>& checked() const;

  detail::NodePtr<T> node_;
};

template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& t, bool requires_grad = false) {
  std::vector<To> values(t.data().begin(), t.data().end());
  return Tensor<To>(t.shape(), std::move(values), requires_grad);
}

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace lcgan
