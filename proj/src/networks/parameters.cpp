#include "lcgan/networks/parameters.hpp"

#include <cstring>
#include <stdexcept>

namespace lcgan::nn {

namespace {

bool starts_with(const std::string& s, const std::string& prefix) { return s.compare(0, prefix.size(), prefix) == 0; }

}  // namespace

template <typename T>
Tensor<T> ParameterStore<T>::add(const std::string& name, const Shape& shape, std::vector<T> values) {
  if (contains(name)) throw std::invalid_argument("parameter '" + name + "' registered twice");
  Tensor<T> t(shape, std::move(values), true);
  entries_.push_back({name, t, false});
  return t;
}

template <typename T>
bool ParameterStore<T>::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

template <typename T>
typename ParameterStore<T>::Entry& ParameterStore<T>::find(const std::string& name) {
  for (auto& e : entries_)
    if (e.name == name) return e;
  throw std::out_of_range("no parameter named '" + name + "'");
}

template <typename T>
const Tensor<T>& ParameterStore<T>::get(const std::string& name) const {
  return const_cast<ParameterStore<T>*>(this)->find(name).tensor;
}

template <typename T>
std::vector<Tensor<T>> ParameterStore<T>::trainable() const {
  std::vector<Tensor<T>> out;
  for (const auto& e : entries_)
    if (e.tensor.requires_grad()) out.push_back(e.tensor);
  return out;
}

template <typename T>
std::vector<std::string> ParameterStore<T>::trainable_names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_)
    if (e.tensor.requires_grad()) out.push_back(e.name);
  return out;
}

template <typename T>
void ParameterStore<T>::freeze(const std::string& prefix) {
  for (auto& e : entries_) {
    if (!starts_with(e.name, prefix)) continue;
    e.frozen = true;
    e.tensor.set_requires_grad(false);
  }
}

template <typename T>
void ParameterStore<T>::set_trainable(bool on) {
  for (auto& e : entries_)
    if (!e.frozen) e.tensor.set_requires_grad(on);
}

template <typename T>
std::int64_t ParameterStore<T>::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

template <typename T>
std::int64_t ParameterStore<T>::trainable_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries_)
    if (e.tensor.requires_grad()) n += e.tensor.numel();
  return n;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

template <typename T>
std::uint64_t ParameterStore<T>::checksum(const std::string& prefix) const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& e : entries_) {
    if (!starts_with(e.name, prefix)) continue;
    const auto d = e.tensor.data();
    const auto* bytes = reinterpret_cast<const unsigned char*>(d.data());
    for (std::size_t i = 0; i < d.size_bytes(); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

template <typename T>
template <typename U>
void ParameterStore<T>::copy_values_from(const ParameterStore<U>& other, const std::string& from_prefix,
                                         const std::string& to_prefix) {
  std::size_t copied = 0;
  for (const auto& src : other.entries()) {
    if (!starts_with(src.name, from_prefix)) continue;
    const auto name = to_prefix + src.name.substr(from_prefix.size());
    auto& dst = find(name);
    if (dst.tensor.shape() != src.tensor.shape()) {
      throw ShapeError("parameter '" + name + "' has shape " + shape_string(dst.tensor.shape()) +
                       " but the source has " + shape_string(src.tensor.shape()));
    }
    auto out = dst.tensor.mutable_data();
    const auto in = src.tensor.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(in[i]);
    ++copied;
  }
  if (copied == 0) throw std::invalid_argument("no parameters match prefix '" + from_prefix + "'");
}

template <typename T>
Tensor<T> LayerFactory<T>::gaussian(const std::string& name, const Shape& shape) {
  std::vector<T> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = static_cast<T>(rng_.normal(0.0, init_std_));
  return store_.add(name, shape, std::move(v));
}

template <typename T>
Tensor<T> LayerFactory<T>::zero(const std::string& name, const Shape& shape) {
  return store_.add(name, shape, std::vector<T>(static_cast<std::size_t>(shape_numel(shape)), T(0)));
}

template <typename T>
ConvLayer<T> LayerFactory<T>::conv(const std::string& name, int in_channels, int out_channels, int kernel,
                                   ops::ConvGeometry geometry, bool bias) {
  ConvLayer<T> layer;
  layer.kernel = gaussian(name + ".weight", {out_channels, in_channels, kernel, kernel});
  if (bias) layer.bias = zero(name + ".bias", {out_channels});
  layer.geometry = geometry;
  return layer;
}

template <typename T>
ConvTransposeLayer<T> LayerFactory<T>::conv_transpose(const std::string& name, int in_channels, int out_channels,
                                                      int kernel, int stride, int padding, bool bias) {
  ConvTransposeLayer<T> layer;
  layer.kernel = gaussian(name + ".weight", {in_channels, out_channels, kernel, kernel});
  if (bias) layer.bias = zero(name + ".bias", {out_channels});
  layer.stride = stride;
  layer.padding = padding;
  return layer;
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template class LayerFactory<float>;
template class LayerFactory<double>;
template void ParameterStore<float>::copy_values_from(const ParameterStore<float>&, const std::string&,
                                                      const std::string&);
template void ParameterStore<float>::copy_values_from(const ParameterStore<double>&, const std::string&,
                                                      const std::string&);
template void ParameterStore<double>::copy_values_from(const ParameterStore<float>&, const std::string&,
                                                       const std::string&);
template void ParameterStore<double>::copy_values_from(const ParameterStore<double>&, const std::string&,
                                                       const std::string&);

}  // namespace lcgan::nn
