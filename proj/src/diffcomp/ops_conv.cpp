#include <Eigen/Core>

#include "lcgan/diffcomp/ops.hpp"
#include "op_util.hpp"

namespace lcgan::ops {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

// Eigen's vectorised kernels split work by pointer alignment, so products on
// heap buffers at arbitrary addresses round differently from run to run.
// Every operand and result of a product lives in an Eigen-owned matrix.
template <typename T>
RowMatrix<T> load(const T* p, std::int64_t rows, std::int64_t cols) {
  return ConstMatrixMap<T>(p, rows, cols);
}

template <typename T>
void store(const RowMatrix<T>& m, T* dst) {
  const T* src = m.data();
  for (std::int64_t i = 0; i < m.size(); ++i) dst[i] = src[i];
}

template <typename T>
void accumulate(const RowMatrix<T>& m, T* dst) {
  const T* src = m.data();
  for (std::int64_t i = 0; i < m.size(); ++i) dst[i] += src[i];
}

// Geometry of one sliding-window pass: an image of `channels` x in_h x in_w
// visited by a kh x kw window producing an out_h x out_w grid.
struct Window {
  std::int64_t channels, in_h, in_w, kh, kw, out_h, out_w;
  ConvGeometry geom;

  std::int64_t rows() const { return channels * kh * kw; }
  std::int64_t cols() const { return out_h * out_w; }
  bool is_pointwise() const {
    return kh == 1 && kw == 1 && geom.stride == 1 && geom.padding == 0 && out_h == in_h && out_w == in_w;
  }
};

// col[(c*kh + i)*kw + j][oy*out_w + ox] = image[c][oy*s - p + i*d][ox*s - p + j*d]
template <typename T>
void im2col(const T* image, const Window& w, T* col) {
  const auto s = w.geom.stride, p = w.geom.padding, d = w.geom.dilation;
  for (std::int64_t c = 0; c < w.channels; ++c) {
    const T* plane = image + c * w.in_h * w.in_w;
    for (std::int64_t i = 0; i < w.kh; ++i) {
      for (std::int64_t j = 0; j < w.kw; ++j) {
        T* row = col + ((c * w.kh + i) * w.kw + j) * w.cols();
        for (std::int64_t oy = 0; oy < w.out_h; ++oy) {
          const auto iy = oy * s - p + i * d;
          T* dst = row + oy * w.out_w;
          if (iy < 0 || iy >= w.in_h) {
            std::fill(dst, dst + w.out_w, T(0));
            continue;
          }
          const T* src = plane + iy * w.in_w;
          for (std::int64_t ox = 0; ox < w.out_w; ++ox) {
            const auto ix = ox * s - p + j * d;
            dst[ox] = (ix >= 0 && ix < w.in_w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds columns back into the image.
template <typename T>
void col2im(const T* col, const Window& w, T* image) {
  const auto s = w.geom.stride, p = w.geom.padding, d = w.geom.dilation;
  for (std::int64_t c = 0; c < w.channels; ++c) {
    T* plane = image + c * w.in_h * w.in_w;
    for (std::int64_t i = 0; i < w.kh; ++i) {
      for (std::int64_t j = 0; j < w.kw; ++j) {
        const T* row = col + ((c * w.kh + i) * w.kw + j) * w.cols();
        for (std::int64_t oy = 0; oy < w.out_h; ++oy) {
          const auto iy = oy * s - p + i * d;
          if (iy < 0 || iy >= w.in_h) continue;
          const T* src = row + oy * w.out_w;
          T* dst = plane + iy * w.in_w;
          for (std::int64_t ox = 0; ox < w.out_w; ++ox) {
            const auto ix = ox * s - p + j * d;
            if (ix >= 0 && ix < w.in_w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

void check_geometry(const ConvGeometry& g, const char* op) {
  if (g.stride < 1 || g.dilation < 1 || g.padding < 0) {
    throw ShapeError(std::string(op) + ": stride and dilation must be >= 1 and padding >= 0 (stride " +
                     std::to_string(g.stride) + ", padding " + std::to_string(g.padding) + ", dilation " +
                     std::to_string(g.dilation) + ")");
  }
}

template <typename T>
void check_bias(const Tensor<T>& bias, std::int64_t channels, const char* op) {
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != channels)) {
    throw ShapeError(std::string(op) + ": bias " + shape_string(bias.shape()) + " does not match " +
                     std::to_string(channels) + " output channels");
  }
}

}  // namespace

std::int64_t conv_output_size(std::int64_t in, int kernel, ConvGeometry g) {
  return (in + 2 * g.padding - g.dilation * (kernel - 1) - 1) / g.stride + 1;
}

std::int64_t conv_transpose_output_size(std::int64_t in, int kernel, int stride, int padding) {
  return (in - 1) * stride - 2 * padding + kernel;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias, ConvGeometry geom) {
  detail::require_rank4(input, "conv2d");
  detail::require_rank4(kernel, "conv2d kernel");
  check_geometry(geom, "conv2d");
  const auto n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const auto cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != cin) {
    throw ShapeError("conv2d: input " + shape_string(input.shape()) + " has " + std::to_string(cin) +
                     " channels but kernel " + shape_string(kernel.shape()) + " expects " +
                     std::to_string(kernel.dim(1)));
  }
  check_bias(bias, cout, "conv2d");
  const auto out_h = conv_output_size(h, static_cast<int>(kh), geom);
  const auto out_w = conv_output_size(w, static_cast<int>(kw), geom);
  if (out_h <= 0 || out_w <= 0) {
    throw ShapeError("conv2d: input " + shape_string(input.shape()) + " too small for kernel " +
                     shape_string(kernel.shape()));
  }
  const Window win{cin, h, w, kh, kw, out_h, out_w, geom};
  const bool pointwise = win.is_pointwise();

  std::vector<T> out(static_cast<std::size_t>(n * cout * win.cols()));
  RowMatrix<T> col(win.rows(), win.cols());
  RowMatrix<T> omat(cout, win.cols());
  const RowMatrix<T> wmat = load(kernel.data().data(), cout, win.rows());
  for (std::int64_t b = 0; b < n; ++b) {
    const T* img = input.data().data() + b * cin * h * w;
    if (pointwise) col = load(img, win.rows(), win.cols());
    else im2col(img, win, col.data());
    omat.noalias() = wmat * col;
    T* o = out.data() + b * cout * win.cols();
    store(omat, o);
    if (bias.defined()) {
      for (std::int64_t c = 0; c < cout; ++c)
        for (std::int64_t i = 0; i < win.cols(); ++i) o[c * win.cols() + i] += bias.data()[c];
    }
  }

  auto in_node = input.node();
  auto k_node = kernel.node();
  auto b_node = bias.defined() ? bias.node() : nullptr;
  std::vector<Tensor<T>> inputs{input, kernel};
  if (bias.defined()) inputs.push_back(bias);
  return Tensor<T>::from_op(
      Shape{n, cout, out_h, out_w}, std::move(out), inputs,
      [in_node, k_node, b_node, win, n, cout, pointwise](const std::vector<T>& g) {
        const auto img_size = win.channels * win.in_h * win.in_w;
        RowMatrix<T> col(win.rows(), win.cols());
        RowMatrix<T> gw(cout, win.rows());
        const RowMatrix<T> wmat = load(k_node->data.data(), cout, win.rows());
        for (std::int64_t b = 0; b < n; ++b) {
          const T* gb_ptr = g.data() + b * cout * win.cols();
          const RowMatrix<T> gmat = load(gb_ptr, cout, win.cols());
          if (k_node->requires_grad) {
            const T* img = in_node->data.data() + b * img_size;
            if (pointwise) col = load(img, win.rows(), win.cols());
            else im2col(img, win, col.data());
            gw.noalias() = gmat * col.transpose();
            accumulate(gw, k_node->grad_buffer().data());
          }
          if (b_node && b_node->requires_grad) {
            auto& gb = b_node->grad_buffer();
            for (std::int64_t c = 0; c < cout; ++c) {
              T s = 0;
              for (std::int64_t i = 0; i < win.cols(); ++i) s += gb_ptr[c * win.cols() + i];
              gb[c] += s;
            }
          }
          if (in_node->requires_grad) {
            T* gimg = in_node->grad_buffer().data() + b * img_size;
            col.noalias() = wmat.transpose() * gmat;
            if (pointwise) accumulate(col, gimg);
            else col2im(col.data(), win, gimg);
          }
        }
      });
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias, int stride,
                           int padding) {
  detail::require_rank4(input, "conv_transpose2d");
  detail::require_rank4(kernel, "conv_transpose2d kernel");
  const ConvGeometry geom{stride, padding, 1};
  check_geometry(geom, "conv_transpose2d");
  const auto n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const auto cout = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(0) != cin) {
    throw ShapeError("conv_transpose2d: input " + shape_string(input.shape()) + " has " +
                     std::to_string(cin) + " channels but kernel " + shape_string(kernel.shape()) +
                     " expects " + std::to_string(kernel.dim(0)));
  }
  check_bias(bias, cout, "conv_transpose2d");
  const auto out_h = conv_transpose_output_size(h, static_cast<int>(kh), stride, padding);
  const auto out_w = conv_transpose_output_size(w, static_cast<int>(kw), stride, padding);
  if (out_h <= 0 || out_w <= 0) {
    throw ShapeError("conv_transpose2d: non-positive output size for input " + shape_string(input.shape()));
  }
  // The window runs over the output image; its grid is the input grid.
  const Window win{cout, out_h, out_w, kh, kw, h, w, geom};

  std::vector<T> out(static_cast<std::size_t>(n * cout * out_h * out_w), T(0));
  RowMatrix<T> col(win.rows(), win.cols());
  const RowMatrix<T> wmat = load(kernel.data().data(), cin, win.rows());
  for (std::int64_t b = 0; b < n; ++b) {
    const RowMatrix<T> xmat = load(input.data().data() + b * cin * h * w, cin, h * w);
    col.noalias() = wmat.transpose() * xmat;
    T* img = out.data() + b * cout * out_h * out_w;
    col2im(col.data(), win, img);
    if (bias.defined()) {
      for (std::int64_t c = 0; c < cout; ++c) {
        const T bc = bias.data()[c];
        for (std::int64_t i = 0; i < out_h * out_w; ++i) img[c * out_h * out_w + i] += bc;
      }
    }
  }

  auto in_node = input.node();
  auto k_node = kernel.node();
  auto b_node = bias.defined() ? bias.node() : nullptr;
  std::vector<Tensor<T>> inputs{input, kernel};
  if (bias.defined()) inputs.push_back(bias);
  return Tensor<T>::from_op(
      Shape{n, cout, out_h, out_w}, std::move(out), inputs,
      [in_node, k_node, b_node, win, n, cin, cout](const std::vector<T>& g) {
        const auto out_plane = win.in_h * win.in_w;
        const auto in_plane = win.out_h * win.out_w;
        RowMatrix<T> col(win.rows(), win.cols());
        RowMatrix<T> gx(cin, in_plane);
        RowMatrix<T> gw(cin, win.rows());
        const RowMatrix<T> wmat = load(k_node->data.data(), cin, win.rows());
        for (std::int64_t b = 0; b < n; ++b) {
          const T* gimg = g.data() + b * cout * out_plane;
          im2col(gimg, win, col.data());
          if (in_node->requires_grad) {
            gx.noalias() = wmat * col;
            accumulate(gx, in_node->grad_buffer().data() + b * cin * in_plane);
          }
          if (k_node->requires_grad) {
            const RowMatrix<T> xmat = load(in_node->data.data() + b * cin * in_plane, cin, in_plane);
            gw.noalias() = xmat * col.transpose();
            accumulate(gw, k_node->grad_buffer().data());
          }
          if (b_node && b_node->requires_grad) {
            auto& gb = b_node->grad_buffer();
            for (std::int64_t c = 0; c < cout; ++c) {
              T s = 0;
              for (std::int64_t i = 0; i < out_plane; ++i) s += gimg[c * out_plane + i];
              gb[c] += s;
            }
          }
        }
      });
}

template Tensor<float> conv2d(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, ConvGeometry);
template Tensor<double> conv2d(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&, ConvGeometry);
template Tensor<float> conv_transpose2d(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, int, int);
template Tensor<double> conv_transpose2d(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&, int,
                                         int);

}  // namespace lcgan::ops
