#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcgan/diffcomp/ops.hpp"
#include "lcgan/diffcomp/random.hpp"
#include "lcgan/diffcomp/tensor.hpp"

namespace lcgan::nn {

/// Ordered, named collection of a network's parameter leaves.
///
/// Entries marked frozen never require grad again; the trainable switch only
/// affects the others and is how a training loop parks one network while
/// stepping another.
template <typename T>
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    bool frozen = false;
  };

  Tensor<T> add(const std::string& name, const Shape& shape, std::vector<T> values);

  const std::vector<Entry>& entries() const { return entries_; }
  bool contains(const std::string& name) const;
  /// Throws std::out_of_range for an unknown name.
  const Tensor<T>& get(const std::string& name) const;

  /// Tensors that currently receive gradients, in registration order.
  std::vector<Tensor<T>> trainable() const;
  std::vector<std::string> trainable_names() const;

  /// Permanently freezes every entry whose name starts with `prefix`.
  void freeze(const std::string& prefix);
  void set_trainable(bool on);

  std::int64_t parameter_count() const;
  std::int64_t trainable_count() const;
  void zero_grad();

  /// FNV-1a over the raw bytes of matching entries, in order.
  std::uint64_t checksum(const std::string& prefix = "") const;

  /// Copies values entry by entry (shapes must agree), mapping names that start
  /// with `from_prefix` in `other` onto `to_prefix` here.
  template <typename U>
  void copy_values_from(const ParameterStore<U>& other, const std::string& from_prefix = "",
                        const std::string& to_prefix = "");

 private:
  Entry& find(const std::string& name);
  std::vector<Entry> entries_;
};

template <typename T>
struct ConvLayer {
  Tensor<T> kernel;
  Tensor<T> bias;  // undefined when the layer has none
  ops::ConvGeometry geometry;

  Tensor<T> operator()(const Tensor<T>& x) const { return ops::conv2d(x, kernel, bias, geometry); }
};

template <typename T>
struct ConvTransposeLayer {
  Tensor<T> kernel;
  Tensor<T> bias;
  int stride = 2;
  int padding = 1;

  Tensor<T> operator()(const Tensor<T>& x) const {
    return ops::conv_transpose2d(x, kernel, bias, stride, padding);
  }
};

/// Registers layers in a store with N(0, init_std) kernels and zero biases.
template <typename T>
class LayerFactory {
 public:
  LayerFactory(ParameterStore<T>& store, std::uint64_t seed, double init_std = 0.02)
      : store_(store), rng_(seed), init_std_(init_std) {}

  ConvLayer<T> conv(const std::string& name, int in_channels, int out_channels, int kernel,
                    ops::ConvGeometry geometry, bool bias);
  ConvTransposeLayer<T> conv_transpose(const std::string& name, int in_channels, int out_channels, int kernel,
                                       int stride, int padding, bool bias);

 private:
  Tensor<T> gaussian(const std::string& name, const Shape& shape);
  Tensor<T> zero(const std::string& name, const Shape& shape);

  ParameterStore<T>& store_;
  Rng rng_;
  double init_std_;
};

}  // namespace lcgan::nn
