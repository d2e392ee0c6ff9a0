#include <algorithm>
#include <cmath>

#include "lcgan/diffcomp/ops.hpp"
#include "op_util.hpp"

namespace lcgan::ops {

namespace {

template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const Tensor<T>& a, Fwd fwd, Deriv deriv) {
  const auto x = a.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  auto an = a.node();
  auto result = Tensor<T>::from_op(a.shape(), std::move(out), {a}, nullptr);
  if (!result.requires_grad()) return result;
  // The closure reads the output values through a weak reference to avoid a cycle.
  std::weak_ptr<detail::Node<T>> self = result.node();
  result.node()->backward = [an, self, deriv](const std::vector<T>& g) {
    auto out_node = self.lock();
    auto& ga = an->grad_buffer();
    const auto& xs = an->data;
    const auto& ys = out_node->data;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(xs[i], ys[i]);
  };
  return result;
}

enum class Broadcast { none, left, right };

template <typename T>
Broadcast broadcast_mode(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::none;
  if (a.numel() == 1) return Broadcast::left;
  if (b.numel() == 1) return Broadcast::right;
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                   shape_string(b.shape()));
}

// da(x, y) and db(x, y) are partial derivatives of f at (x, y).
template <typename T, typename F, typename DA, typename DB>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, const char* name, F f, DA da, DB db) {
  const auto mode = broadcast_mode(a, b, name);
  const auto xa = a.data();
  const auto xb = b.data();
  const Shape shape = mode == Broadcast::left ? b.shape() : a.shape();
  const std::size_t n = static_cast<std::size_t>(shape_numel(shape));
  const std::size_t sa = mode == Broadcast::left ? 0 : 1;
  const std::size_t sb = mode == Broadcast::right ? 0 : 1;
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(xa[i * sa], xb[i * sb]);
  auto an = a.node();
  auto bn = b.node();
  return Tensor<T>::from_op(shape, std::move(out), {a, b}, [an, bn, sa, sb, da, db](const std::vector<T>& g) {
    const auto& va = an->data;
    const auto& vb = bn->data;
    if (an->requires_grad) {
      auto& ga = an->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i * sa] += g[i] * da(va[i * sa], vb[i * sb]);
    }
    if (bn->requires_grad) {
      auto& gb = bn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i * sb] += g[i] * db(va[i * sa], vb[i * sb]);
    }
  });
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T) { return T(1); }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T) { return T(1); }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y) { return y; }, [](T x, T) { return x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      a, b, "div", [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
      [](T x, T y) { return -x / (y * y); });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  return unary(a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s) {
  return unary(a, [s](T x) { return x * s; }, [s](T, T) { return s; });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return mul_scalar(a, T(-1));
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  return unary(a, [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, T slope) {
  return unary(
      a, [slope](T x) { return x > T(0) ? x : slope * x; },
      [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
  return unary(a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return unary(
      a, [](T x) { return T(1) / (T(1) + std::exp(-x)); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
  return unary(
      a, [](T x) { return std::abs(x); },
      [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  return unary(a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& a) {
  return unary(
      a, [](T x) { return std::sqrt(x); }, [](T, T y) { return y > T(0) ? T(0.5) / y : T(0); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  return unary(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  return unary(a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = 0;
  for (T v : a.data()) total += v;
  auto an = a.node();
  return Tensor<T>::from_op(Shape{1}, {total}, {a}, [an](const std::vector<T>& g) {
    auto& ga = an->grad_buffer();
    for (auto& v : ga) v += g[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return mul_scalar(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> variance(const Tensor<T>& a, int correction) {
  const auto n = a.numel();
  if (n - correction <= 0) {
    throw ShapeError("variance: " + std::to_string(n) + " elements with correction " +
                     std::to_string(correction));
  }
  const auto x = a.data();
  T mu = 0;
  for (T v : x) mu += v;
  mu /= static_cast<T>(n);
  T ss = 0;
  for (T v : x) ss += (v - mu) * (v - mu);
  const T denom = static_cast<T>(n - correction);
  auto an = a.node();
  return Tensor<T>::from_op(Shape{1}, {ss / denom}, {a}, [an, mu, denom](const std::vector<T>& g) {
    auto& ga = an->grad_buffer();
    const auto& xs = an->data;
    const T scale = T(2) * g[0] / denom;
    for (std::size_t i = 0; i < xs.size(); ++i) ga[i] += scale * (xs[i] - mu);
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
  }
  auto an = a.node();
  std::vector<T> out(a.data().begin(), a.data().end());
  return Tensor<T>::from_op(std::move(shape), std::move(out), {a}, [an](const std::vector<T>& g) {
    auto& ga = an->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

template <typename T>
Tensor<T> batch_item(const Tensor<T>& a, std::int64_t index) {
  if (a.rank() < 1 || index < 0 || index >= a.dim(0)) {
    throw ShapeError("batch_item: index " + std::to_string(index) + " out of range for " +
                     shape_string(a.shape()));
  }
  Shape shape = a.shape();
  shape[0] = 1;
  const auto stride = static_cast<std::size_t>(shape_numel(shape));
  const auto offset = static_cast<std::size_t>(index) * stride;
  std::vector<T> out(a.data().begin() + offset, a.data().begin() + offset + stride);
  auto an = a.node();
  return Tensor<T>::from_op(std::move(shape), std::move(out), {a}, [an, offset](const std::vector<T>& g) {
    auto& ga = an->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) ga[offset + i] += g[i];
  });
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const auto& first = parts.front();
  detail::require_rank4(first, "concat_channels");
  const auto n = first.dim(0), h = first.dim(2), w = first.dim(3);
  std::int64_t channels = 0;
  for (const auto& p : parts) {
    detail::require_rank4(p, "concat_channels");
    if (p.dim(0) != n || p.dim(2) != h || p.dim(3) != w) {
      throw ShapeError("concat_channels: " + shape_string(p.shape()) + " does not match " +
                       shape_string(first.shape()) + " outside the channel axis");
    }
    channels += p.dim(1);
  }
  const auto plane = h * w;
  std::vector<T> out(static_cast<std::size_t>(n * channels * plane));
  std::vector<std::int64_t> offsets;
  std::int64_t c0 = 0;
  for (const auto& p : parts) {
    offsets.push_back(c0);
    const auto pc = p.dim(1);
    const auto src = p.data();
    for (std::int64_t b = 0; b < n; ++b) {
      std::copy_n(src.begin() + b * pc * plane, pc * plane, out.begin() + (b * channels + c0) * plane);
    }
    c0 += pc;
  }
  std::vector<detail::NodePtr<T>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return Tensor<T>::from_op(Shape{n, channels, h, w}, std::move(out), parts,
                            [nodes, offsets, n, channels, plane](const std::vector<T>& g) {
                              for (std::size_t k = 0; k < nodes.size(); ++k) {
                                const auto& node = nodes[k];
                                if (!node->requires_grad) continue;
                                auto& gp = node->grad_buffer();
                                const auto pc = node->shape[1];
                                for (std::int64_t b = 0; b < n; ++b) {
                                  const auto* src = g.data() + (b * channels + offsets[k]) * plane;
                                  auto* dst = gp.data() + b * pc * plane;
                                  for (std::int64_t i = 0; i < pc * plane; ++i) dst[i] += src[i];
                                }
                              }
                            });
}

template <typename T>
Tensor<T> channel_mean(const Tensor<T>& x) {
  detail::require_rank4(x, "channel_mean");
  const auto n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  const T count = static_cast<T>(n * plane);
  const auto v = x.data();
  std::vector<T> out(static_cast<std::size_t>(c), T(0));
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t i = 0; i < plane; ++i) out[ch] += v[(b * c + ch) * plane + i];
  for (auto& m : out) m /= count;
  auto xn = x.node();
  return Tensor<T>::from_op(Shape{c}, std::move(out), {x}, [xn, n, c, plane, count](const std::vector<T>& g) {
    auto& gx = xn->grad_buffer();
    for (std::int64_t b = 0; b < n; ++b)
      for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t i = 0; i < plane; ++i) gx[(b * c + ch) * plane + i] += g[ch] / count;
  });
}

template <typename T>
Tensor<T> channel_variance(const Tensor<T>& x) {
  detail::require_rank4(x, "channel_variance");
  const auto n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  const T count = static_cast<T>(n * plane);
  const auto v = x.data();
  std::vector<T> mu(static_cast<std::size_t>(c), T(0)), out(static_cast<std::size_t>(c), T(0));
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t i = 0; i < plane; ++i) mu[ch] += v[(b * c + ch) * plane + i];
  for (auto& m : mu) m /= count;
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t i = 0; i < plane; ++i) {
        const T d = v[(b * c + ch) * plane + i] - mu[ch];
        out[ch] += d * d;
      }
  for (auto& s : out) s /= count;
  auto xn = x.node();
  return Tensor<T>::from_op(Shape{c}, std::move(out), {x},
                            [xn, mu, n, c, plane, count](const std::vector<T>& g) {
                              auto& gx = xn->grad_buffer();
                              const auto& xs = xn->data;
                              for (std::int64_t b = 0; b < n; ++b)
                                for (std::int64_t ch = 0; ch < c; ++ch)
                                  for (std::int64_t i = 0; i < plane; ++i) {
                                    const auto k = (b * c + ch) * plane + i;
                                    gx[k] += g[ch] * T(2) * (xs[k] - mu[ch]) / count;
                                  }
                            });
}

template <typename T>
Tensor<T> log_softmax_channels(const Tensor<T>& x) {
  detail::require_rank4(x, "log_softmax_channels");
  const auto n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  const auto v = x.data();
  std::vector<T> out(v.size());
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t i = 0; i < plane; ++i) {
      T mx = v[b * c * plane + i];
      for (std::int64_t ch = 1; ch < c; ++ch) mx = std::max(mx, v[(b * c + ch) * plane + i]);
      T s = 0;
      for (std::int64_t ch = 0; ch < c; ++ch) s += std::exp(v[(b * c + ch) * plane + i] - mx);
      const T lse = mx + std::log(s);
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const auto k = (b * c + ch) * plane + i;
        out[k] = v[k] - lse;
      }
    }
  }
  auto xn = x.node();
  auto result = Tensor<T>::from_op(x.shape(), std::move(out), {x}, nullptr);
  if (!result.requires_grad()) return result;
  std::weak_ptr<detail::Node<T>> self = result.node();
  result.node()->backward = [xn, self, n, c, plane](const std::vector<T>& g) {
    auto out_node = self.lock();
    const auto& y = out_node->data;
    auto& gx = xn->grad_buffer();
    for (std::int64_t b = 0; b < n; ++b) {
      for (std::int64_t i = 0; i < plane; ++i) {
        T gs = 0;
        for (std::int64_t ch = 0; ch < c; ++ch) gs += g[(b * c + ch) * plane + i];
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const auto k = (b * c + ch) * plane + i;
          gx[k] += g[k] - std::exp(y[k]) * gs;
        }
      }
    }
  };
  return result;
}

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& x) {
  return exp(log_softmax_channels(x));
}

#define LCGAN_INSTANTIATE(T)                                                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                     \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                                     \
  template Tensor<T> neg(const Tensor<T>&);                                               \
  template Tensor<T> relu(const Tensor<T>&);                                              \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                     \
  template Tensor<T> tanh(const Tensor<T>&);                                              \
  template Tensor<T> sigmoid(const Tensor<T>&);                                           \
  template Tensor<T> abs(const Tensor<T>&);                                               \
  template Tensor<T> square(const Tensor<T>&);                                            \
  template Tensor<T> sqrt(const Tensor<T>&);                                              \
  template Tensor<T> exp(const Tensor<T>&);                                               \
  template Tensor<T> log(const Tensor<T>&);                                               \
  template Tensor<T> sum(const Tensor<T>&);                                               \
  template Tensor<T> mean(const Tensor<T>&);                                              \
  template Tensor<T> variance(const Tensor<T>&, int);                                     \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                    \
  template Tensor<T> batch_item(const Tensor<T>&, std::int64_t);                          \
  template Tensor<T> concat_channels(const std::vector<Tensor<T>>&);                      \
  template Tensor<T> channel_mean(const Tensor<T>&);                                      \
  template Tensor<T> channel_variance(const Tensor<T>&);                                  \
  template Tensor<T> softmax_channels(const Tensor<T>&);                                  \
  template Tensor<T> log_softmax_channels(const Tensor<T>&);

LCGAN_INSTANTIATE(float)
LCGAN_INSTANTIATE(double)

}  // namespace lcgan::ops
