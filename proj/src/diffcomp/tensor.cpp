#include "lcgan/diffcomp/tensor.hpp"

#include <sstream>
#include <unordered_set>

namespace lcgan {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad) {
  for (auto d : shape) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
  }
  if (static_cast<std::int64_t>(data.size()) != shape_numel(shape)) {
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                     shape_string(shape));
  }
  node_ = std::make_shared<detail::Node<T>>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<T>(static_cast<std::size_t>(n), value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from_op(Shape shape, std::vector<T> data, std::vector<Tensor> inputs,
                             detail::BackwardFn<T> backward) {
  Tensor out(std::move(shape), std::move(data), false);
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (any) {
    out.node_->requires_grad = true;
    out.node_->leaf = false;
    out.node_->backward = std::move(backward);
    out.node_->inputs.reserve(inputs.size());
    for (auto& in : inputs) {
      if (in.requires_grad()) out.node_->inputs.push_back(in.node_);
    }
  }
  return out;
}

template <typename T>
const detail::Node<T>& Tensor<T>::checked() const {
  if (!node_) throw std::logic_error("use of an undefined tensor");
  return *node_;
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  return checked().shape;
}

template <typename T>
std::int64_t Tensor<T>::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_string(s));
  }
  return s[axis];
}

template <typename T>
std::int64_t Tensor<T>::numel() const {
  return static_cast<std::int64_t>(checked().data.size());
}

template <typename T>
std::span<const T> Tensor<T>::data() const {
  return checked().data;
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  checked();
  if (!node_->leaf) throw std::logic_error("only leaf tensors may be modified in place");
  return node_->data;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() requires a single element, got " + shape_string(shape()));
  return checked().data[0];
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return node_ && node_->requires_grad;
}

template <typename T>
bool Tensor<T>::is_leaf() const {
  return checked().leaf;
}

template <typename T>
void Tensor<T>::set_requires_grad(bool value) {
  checked();
  if (!node_->leaf) throw std::logic_error("requires_grad can only be changed on leaf tensors");
  node_->requires_grad = value;
  if (!value) node_->grad.clear();
}

template <typename T>
bool Tensor<T>::has_grad() const {
  return node_ && !node_->grad.empty();
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  return checked().grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
  checked();
  if (node_->grad.empty()) return;
  std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  const auto& n = checked();
  return Tensor(n.shape, n.data, false);
}

template <typename T>
Tensor<T> Tensor<T>::clone(bool requires_grad) const {
  const auto& n = checked();
  return Tensor(n.shape, n.data, requires_grad);
}

template <typename T>
void Tensor<T>::backward() const {
  const auto& root = checked();
  if (root.data.size() != 1) {
    throw ShapeError("backward() requires a scalar loss, got " + shape_string(root.shape));
  }
  if (!root.requires_grad) return;

  // Post-order DFS gives inputs before consumers.
  std::vector<detail::Node<T>*> order;
  std::unordered_set<detail::Node<T>*> visited;
  std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      auto* child = n->inputs[next++].get();
      if (visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    if (!n->leaf) n->grad.assign(n->data.size(), T(0));
  }
  node_->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* n = *it;
    if (!n->leaf && n->backward) n->backward(n->grad);
  }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace lcgan
