#include <algorithm>
#include <cmath>

#include "lcgan/diffcomp/ops.hpp"
#include "op_util.hpp"

namespace lcgan::ops {

template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, T eps) {
  detail::require_rank4(x, "instance_norm");
  const auto planes = x.dim(0) * x.dim(1);
  const auto hw = x.dim(2) * x.dim(3);
  const auto v = x.data();
  std::vector<T> out(v.size());
  std::vector<T> inv_std(static_cast<std::size_t>(planes));
  for (std::int64_t p = 0; p < planes; ++p) {
    const T* src = v.data() + p * hw;
    T mu = 0;
    for (std::int64_t i = 0; i < hw; ++i) mu += src[i];
    mu /= static_cast<T>(hw);
    T var = 0;
    for (std::int64_t i = 0; i < hw; ++i) var += (src[i] - mu) * (src[i] - mu);
    var /= static_cast<T>(hw);
    const T inv = T(1) / std::sqrt(var + eps);
    inv_std[p] = inv;
    T* dst = out.data() + p * hw;
    for (std::int64_t i = 0; i < hw; ++i) dst[i] = (src[i] - mu) * inv;
  }
  auto xn = x.node();
  auto result = Tensor<T>::from_op(x.shape(), std::move(out), {x}, nullptr);
  if (!result.requires_grad()) return result;
  std::weak_ptr<detail::Node<T>> self = result.node();
  result.node()->backward = [xn, self, inv_std, planes, hw](const std::vector<T>& g) {
    auto out_node = self.lock();
    const auto& y = out_node->data;
    auto& gx = xn->grad_buffer();
    for (std::int64_t p = 0; p < planes; ++p) {
      const T* gp = g.data() + p * hw;
      const T* yp = y.data() + p * hw;
      T mean_g = 0, mean_gy = 0;
      for (std::int64_t i = 0; i < hw; ++i) {
        mean_g += gp[i];
        mean_gy += gp[i] * yp[i];
      }
      mean_g /= static_cast<T>(hw);
      mean_gy /= static_cast<T>(hw);
      T* dst = gx.data() + p * hw;
      for (std::int64_t i = 0; i < hw; ++i) dst[i] += inv_std[p] * (gp[i] - mean_g - yp[i] * mean_gy);
    }
  };
  return result;
}

template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& x) {
  detail::require_rank4(x, "avg_pool2");
  const auto planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h < 2 || w < 2) throw ShapeError("avg_pool2: input " + shape_string(x.shape()) + " smaller than 2x2");
  const auto oh = h / 2, ow = w / 2;
  const auto v = x.data();
  std::vector<T> out(static_cast<std::size_t>(planes * oh * ow));
  for (std::int64_t p = 0; p < planes; ++p) {
    const T* src = v.data() + p * h * w;
    T* dst = out.data() + p * oh * ow;
    for (std::int64_t y = 0; y < oh; ++y)
      for (std::int64_t xx = 0; xx < ow; ++xx) {
        const T* a = src + (2 * y) * w + 2 * xx;
        dst[y * ow + xx] = (a[0] + a[1] + a[w] + a[w + 1]) * T(0.25);
      }
  }
  auto xn = x.node();
  return Tensor<T>::from_op(Shape{x.dim(0), x.dim(1), oh, ow}, std::move(out), {x},
                            [xn, planes, h, w, oh, ow](const std::vector<T>& g) {
                              auto& gx = xn->grad_buffer();
                              for (std::int64_t p = 0; p < planes; ++p) {
                                T* dst = gx.data() + p * h * w;
                                const T* gp = g.data() + p * oh * ow;
                                for (std::int64_t y = 0; y < oh; ++y)
                                  for (std::int64_t xx = 0; xx < ow; ++xx) {
                                    const T q = gp[y * ow + xx] * T(0.25);
                                    T* a = dst + (2 * y) * w + 2 * xx;
                                    a[0] += q;
                                    a[1] += q;
                                    a[w] += q;
                                    a[w + 1] += q;
                                  }
                              }
                            });
}

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, int factor) {
  detail::require_rank4(x, "upsample_nearest");
  if (factor < 1) throw ShapeError("upsample_nearest: factor must be >= 1");
  const auto planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto oh = h * factor, ow = w * factor;
  const auto v = x.data();
  std::vector<T> out(static_cast<std::size_t>(planes * oh * ow));
  for (std::int64_t p = 0; p < planes; ++p)
    for (std::int64_t y = 0; y < oh; ++y)
      for (std::int64_t xx = 0; xx < ow; ++xx)
        out[(p * oh + y) * ow + xx] = v[(p * h + y / factor) * w + xx / factor];
  auto xn = x.node();
  return Tensor<T>::from_op(Shape{x.dim(0), x.dim(1), oh, ow}, std::move(out), {x},
                            [xn, planes, h, w, oh, ow, factor](const std::vector<T>& g) {
                              auto& gx = xn->grad_buffer();
                              for (std::int64_t p = 0; p < planes; ++p)
                                for (std::int64_t y = 0; y < oh; ++y)
                                  for (std::int64_t xx = 0; xx < ow; ++xx)
                                    gx[(p * h + y / factor) * w + xx / factor] += g[(p * oh + y) * ow + xx];
                            });
}

namespace {

struct Tap {
  std::int64_t lo, hi;
  double frac;
};

std::vector<Tap> bilinear_taps(std::int64_t in, std::int64_t out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::int64_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    auto lo = static_cast<std::int64_t>(std::floor(src));
    lo = std::min(lo, in - 1);
    const auto hi = std::min(lo + 1, in - 1);
    taps[i] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w) {
  detail::require_rank4(x, "upsample_bilinear");
  if (out_h < 1 || out_w < 1) throw ShapeError("upsample_bilinear: output size must be positive");
  const auto planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto ty = bilinear_taps(h, out_h);
  const auto tx = bilinear_taps(w, out_w);
  const auto v = x.data();
  std::vector<T> out(static_cast<std::size_t>(planes * out_h * out_w));
  for (std::int64_t p = 0; p < planes; ++p) {
    const T* src = v.data() + p * h * w;
    for (std::int64_t y = 0; y < out_h; ++y) {
      const auto& a = ty[y];
      const T fy = static_cast<T>(a.frac);
      for (std::int64_t xx = 0; xx < out_w; ++xx) {
        const auto& b = tx[xx];
        const T fx = static_cast<T>(b.frac);
        const T top = src[a.lo * w + b.lo] * (T(1) - fx) + src[a.lo * w + b.hi] * fx;
        const T bot = src[a.hi * w + b.lo] * (T(1) - fx) + src[a.hi * w + b.hi] * fx;
        out[(p * out_h + y) * out_w + xx] = top * (T(1) - fy) + bot * fy;
      }
    }
  }
  auto xn = x.node();
  return Tensor<T>::from_op(Shape{x.dim(0), x.dim(1), out_h, out_w}, std::move(out), {x},
                            [xn, ty, tx, planes, h, w, out_h, out_w](const std::vector<T>& g) {
                              auto& gx = xn->grad_buffer();
                              for (std::int64_t p = 0; p < planes; ++p) {
                                T* dst = gx.data() + p * h * w;
                                for (std::int64_t y = 0; y < out_h; ++y) {
                                  const auto& a = ty[y];
                                  const T fy = static_cast<T>(a.frac);
                                  for (std::int64_t xx = 0; xx < out_w; ++xx) {
                                    const auto& b = tx[xx];
                                    const T fx = static_cast<T>(b.frac);
                                    const T gv = g[(p * out_h + y) * out_w + xx];
                                    dst[a.lo * w + b.lo] += gv * (T(1) - fy) * (T(1) - fx);
                                    dst[a.lo * w + b.hi] += gv * (T(1) - fy) * fx;
                                    dst[a.hi * w + b.lo] += gv * fy * (T(1) - fx);
                                    dst[a.hi * w + b.hi] += gv * fy * fx;
                                  }
                                }
                              }
                            });
}

template <typename T>
Tensor<T> spatial_mean(const Tensor<T>& x) {
  detail::require_rank4(x, "spatial_mean");
  const auto planes = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
  const auto v = x.data();
  std::vector<T> out(static_cast<std::size_t>(planes));
  for (std::int64_t p = 0; p < planes; ++p) {
    T s = 0;
    for (std::int64_t i = 0; i < hw; ++i) s += v[p * hw + i];
    out[p] = s / static_cast<T>(hw);
  }
  auto xn = x.node();
  return Tensor<T>::from_op(Shape{x.dim(0), x.dim(1), 1, 1}, std::move(out), {x},
                            [xn, planes, hw](const std::vector<T>& g) {
                              auto& gx = xn->grad_buffer();
                              for (std::int64_t p = 0; p < planes; ++p) {
                                const T q = g[p] / static_cast<T>(hw);
                                for (std::int64_t i = 0; i < hw; ++i) gx[p * hw + i] += q;
                              }
                            });
}

template <typename T>
Tensor<T> broadcast_spatial(const Tensor<T>& x, std::int64_t h, std::int64_t w) {
  detail::require_rank4(x, "broadcast_spatial");
  if (x.dim(2) != 1 || x.dim(3) != 1) {
    throw ShapeError("broadcast_spatial: expected [N, C, 1, 1], got " + shape_string(x.shape()));
  }
  const auto planes = x.dim(0) * x.dim(1), hw = h * w;
  const auto v = x.data();
  std::vector<T> out(static_cast<std::size_t>(planes * hw));
  for (std::int64_t p = 0; p < planes; ++p) std::fill_n(out.begin() + p * hw, hw, v[p]);
  auto xn = x.node();
  return Tensor<T>::from_op(Shape{x.dim(0), x.dim(1), h, w}, std::move(out), {x},
                            [xn, planes, hw](const std::vector<T>& g) {
                              auto& gx = xn->grad_buffer();
                              for (std::int64_t p = 0; p < planes; ++p) {
                                T s = 0;
                                for (std::int64_t i = 0; i < hw; ++i) s += g[p * hw + i];
                                gx[p] += s;
                              }
                            });
}

#define LCGAN_INSTANTIATE(T)                                                             \
  template Tensor<T> instance_norm(const Tensor<T>&, T);                                 \
  template Tensor<T> avg_pool2(const Tensor<T>&);                                        \
  template Tensor<T> upsample_nearest(const Tensor<T>&, int);                            \
  template Tensor<T> upsample_bilinear(const Tensor<T>&, std::int64_t, std::int64_t);    \
  template Tensor<T> spatial_mean(const Tensor<T>&);                                     \
  template Tensor<T> broadcast_spatial(const Tensor<T>&, std::int64_t, std::int64_t);

LCGAN_INSTANTIATE(float)
LCGAN_INSTANTIATE(double)

}  // namespace lcgan::ops
