#include "lcgan/imagecore/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "lcgan/diffcomp/ops.hpp"

namespace lcgan::img {

namespace {

void check_size(int width, int height, std::size_t len, std::size_t channels, const char* what) {
  if (width <= 0 || height <= 0) throw std::invalid_argument(std::string(what) + ": non-positive size");
  if (len != static_cast<std::size_t>(width) * height * channels) {
    throw std::invalid_argument(std::string(what) + ": value count does not match " + std::to_string(width) +
                                "x" + std::to_string(height));
  }
}

struct Header {
  int width = 0;
  int height = 0;
};

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in, const std::filesystem::path& path) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  if (token.empty()) throw ImageIoError(path.string() + ": truncated header");
  return token;
}

int parse_int(const std::string& token, const std::filesystem::path& path, const char* field) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(token, &used);
    if (used != token.size() || v <= 0) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw ImageIoError(path.string() + ": malformed " + field + " '" + token + "'");
  }
}

Header read_header(std::istream& in, const std::filesystem::path& path, const char* magic) {
  const auto got = next_token(in, path);
  if (got != magic) throw ImageIoError(path.string() + ": expected magic " + magic + ", found '" + got + "'");
  Header h;
  h.width = parse_int(next_token(in, path), path, "width");
  h.height = parse_int(next_token(in, path), path, "height");
  const int maxval = parse_int(next_token(in, path), path, "maxval");
  if (maxval != 255) throw ImageIoError(path.string() + ": unsupported maxval " + std::to_string(maxval));
  // next_token consumed exactly one whitespace byte after maxval.
  return h;
}

std::vector<std::uint8_t> read_payload(std::istream& in, std::size_t bytes, const std::filesystem::path& path) {
  std::vector<std::uint8_t> buf(bytes);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes) {
    throw ImageIoError(path.string() + ": truncated payload (" + std::to_string(in.gcount()) + " of " +
                       std::to_string(bytes) + " bytes)");
  }
  return buf;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError(path.string() + ": cannot open for reading");
  return in;
}

void write_file(const std::filesystem::path& path, const char* magic, int w, int h,
                const std::vector<std::uint8_t>& payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError(path.string() + ": cannot open for writing");
  out << magic << '\n' << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!out) throw ImageIoError(path.string() + ": write failed");
}

}  // namespace

ImageRGB::ImageRGB(int width, int height, std::vector<float> values)
    : width_(width), height_(height), values_(std::move(values)) {
  check_size(width, height, values_.size(), 3, "ImageRGB");
  for (float v : values_) {
    if (!(v >= 0.0f && v <= 1.0f)) throw std::invalid_argument("ImageRGB: value outside [0, 1]");
  }
}

ImageRGB ImageRGB::filled(int width, int height, float r, float g, float b) {
  std::vector<float> v(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < v.size(); i += 3) {
    v[i] = r;
    v[i + 1] = g;
    v[i + 2] = b;
  }
  return ImageRGB(width, height, std::move(v));
}

void ImageRGB::set(int x, int y, int c, float v) {
  values_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c] = std::clamp(v, 0.0f, 1.0f);
}

MaskImage::MaskImage(int width, int height, std::vector<std::uint8_t> values)
    : width_(width), height_(height), values_(std::move(values)) {
  check_size(width, height, values_.size(), 1, "MaskImage");
  for (auto v : values_) {
    if (v > 1) throw std::invalid_argument("MaskImage: values must be 0 or 1");
  }
}

std::int64_t MaskImage::count() const {
  return std::count(values_.begin(), values_.end(), std::uint8_t{1});
}

GrayImage luminance(const ImageRGB& image) {
  GrayImage out{image.width(), image.height(), {}};
  const auto& v = image.values();
  out.values.resize(v.size() / 3);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = kLumaR * v[3 * i] + kLumaG * v[3 * i + 1] + kLumaB * v[3 * i + 2];
  }
  return out;
}

template <typename T>
Tensor<T> luminance(const Tensor<T>& rgb) {
  if (rgb.rank() != 4 || rgb.dim(1) != 3) {
    throw ShapeError("luminance: expected [N, 3, H, W], got " + shape_string(rgb.shape()));
  }
  const Tensor<T> weights(Shape{1, 3, 1, 1}, {T(kLumaR), T(kLumaG), T(kLumaB)});
  return ops::conv2d(rgb, weights, Tensor<T>());
}

GrayImage mean_pool2(const GrayImage& image) {
  GrayImage out{image.width / 2, image.height / 2, {}};
  out.values.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      out.values[static_cast<std::size_t>(y) * out.width + x] =
          (image.at(2 * x, 2 * y) + image.at(2 * x + 1, 2 * y) + image.at(2 * x, 2 * y + 1) +
           image.at(2 * x + 1, 2 * y + 1)) *
          0.25f;
    }
  return out;
}

namespace {
void check_pyramid_size(std::int64_t w, std::int64_t h, int levels) {
  if (levels < 0 || levels > 30 || std::min(w, h) < (std::int64_t{1} << levels)) {
    throw std::invalid_argument("build_pyramid: " + std::to_string(w) + "x" + std::to_string(h) +
                                " image is too small for " + std::to_string(levels) + " levels");
  }
}
}  // namespace

Pyramid build_pyramid(const GrayImage& image, int levels) {
  check_pyramid_size(image.width, image.height, levels);
  Pyramid p;
  p.levels.push_back(image);
  for (int i = 1; i <= levels; ++i) p.levels.push_back(mean_pool2(p.levels.back()));
  return p;
}

template <typename T>
std::vector<Tensor<T>> build_pyramid(const Tensor<T>& image, int levels) {
  if (image.rank() != 4) throw ShapeError("build_pyramid: expected NCHW, got " + shape_string(image.shape()));
  check_pyramid_size(image.dim(3), image.dim(2), levels);
  std::vector<Tensor<T>> out{image};
  for (int i = 1; i <= levels; ++i) out.push_back(ops::avg_pool2(out.back()));
  return out;
}

std::uint8_t quantize(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

ImageRGB read_ppm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const auto h = read_header(in, path, "P6");
  const auto bytes = read_payload(in, static_cast<std::size_t>(h.width) * h.height * 3, path);
  std::vector<float> v(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) v[i] = static_cast<float>(bytes[i]) / 255.0f;
  return ImageRGB(h.width, h.height, std::move(v));
}

void write_ppm(const std::filesystem::path& path, const ImageRGB& image) {
  std::vector<std::uint8_t> bytes(image.values().size());
  std::transform(image.values().begin(), image.values().end(), bytes.begin(), quantize);
  write_file(path, "P6", image.width(), image.height(), bytes);
}

GrayImage read_pgm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const auto h = read_header(in, path, "P5");
  const auto bytes = read_payload(in, static_cast<std::size_t>(h.width) * h.height, path);
  GrayImage g{h.width, h.height, std::vector<float>(bytes.size())};
  for (std::size_t i = 0; i < bytes.size(); ++i) g.values[i] = static_cast<float>(bytes[i]) / 255.0f;
  return g;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::vector<std::uint8_t> bytes(image.values.size());
  std::transform(image.values.begin(), image.values.end(), bytes.begin(), quantize);
  write_file(path, "P5", image.width, image.height, bytes);
}

MaskImage read_mask(const std::filesystem::path& path) {
  auto in = open_in(path);
  const auto h = read_header(in, path, "P5");
  auto bytes = read_payload(in, static_cast<std::size_t>(h.width) * h.height, path);
  for (auto& b : bytes) b = b >= 128 ? 1 : 0;
  return MaskImage(h.width, h.height, std::move(bytes));
}

void write_mask(const std::filesystem::path& path, const MaskImage& mask) {
  std::vector<std::uint8_t> bytes(mask.values().size());
  std::transform(mask.values().begin(), mask.values().end(), bytes.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
  write_file(path, "P5", mask.width(), mask.height(), bytes);
}

template <typename T>
Tensor<T> to_model_range(const std::vector<ImageRGB>& images) {
  if (images.empty()) throw std::invalid_argument("to_model_range: empty batch");
  const int w = images[0].width(), h = images[0].height();
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  std::vector<T> data(images.size() * 3 * plane);
  for (std::size_t b = 0; b < images.size(); ++b) {
    const auto& im = images[b];
    if (im.width() != w || im.height() != h) throw ShapeError("to_model_range: batch images differ in size");
    const auto& v = im.values();
    for (std::size_t i = 0; i < plane; ++i)
      for (std::size_t c = 0; c < 3; ++c) data[(b * 3 + c) * plane + i] = T(2) * T(v[3 * i + c]) - T(1);
  }
  return Tensor<T>(Shape{static_cast<std::int64_t>(images.size()), 3, h, w}, std::move(data));
}

template <typename T>
ImageRGB from_model_range(const Tensor<T>& tensor, std::int64_t index) {
  if (tensor.rank() != 4 || tensor.dim(1) != 3 || index < 0 || index >= tensor.dim(0)) {
    throw ShapeError("from_model_range: expected [N, 3, H, W] with item " + std::to_string(index) + ", got " +
                     shape_string(tensor.shape()));
  }
  const auto h = static_cast<int>(tensor.dim(2)), w = static_cast<int>(tensor.dim(3));
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  const auto src = tensor.data().subspan(static_cast<std::size_t>(index) * 3 * plane, 3 * plane);
  std::vector<float> v(3 * plane);
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c) {
      const T m = std::clamp(src[c * plane + i], T(-1), T(1));
      v[3 * i + c] = std::clamp(static_cast<float>((m + T(1)) / T(2)), 0.0f, 1.0f);
    }
  return ImageRGB(w, h, std::move(v));
}

template <typename T>
Tensor<T> mask_tensor(const std::vector<MaskImage>& masks) {
  if (masks.empty()) throw std::invalid_argument("mask_tensor: empty batch");
  const int w = masks[0].width(), h = masks[0].height();
  std::vector<T> data;
  data.reserve(masks.size() * static_cast<std::size_t>(w) * h);
  for (const auto& m : masks) {
    if (m.width() != w || m.height() != h) throw ShapeError("mask_tensor: batch masks differ in size");
    for (auto v : m.values()) data.push_back(T(v));
  }
  return Tensor<T>(Shape{static_cast<std::int64_t>(masks.size()), 1, h, w}, std::move(data));
}

template <typename T>
MaskImage mask_from_logits(const Tensor<T>& logits, std::int64_t index) {
  if (logits.rank() != 4 || logits.dim(1) < 2 || index < 0 || index >= logits.dim(0)) {
    throw ShapeError("mask_from_logits: expected [N, C>=2, H, W], got " + shape_string(logits.shape()));
  }
  const auto c = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
  const auto plane = h * w;
  const auto v = logits.data();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(plane));
  for (std::int64_t i = 0; i < plane; ++i) {
    std::int64_t best = 0;
    for (std::int64_t ch = 1; ch < c; ++ch) {
      if (v[(index * c + ch) * plane + i] > v[(index * c + best) * plane + i]) best = ch;
    }
    out[i] = best == 1 ? 1 : 0;
  }
  return MaskImage(static_cast<int>(w), static_cast<int>(h), std::move(out));
}

#define LCGAN_INSTANTIATE(T)                                                        \
  template Tensor<T> luminance(const Tensor<T>&);                                   \
  template std::vector<Tensor<T>> build_pyramid(const Tensor<T>&, int);             \
  template Tensor<T> to_model_range(const std::vector<ImageRGB>&);                  \
  template ImageRGB from_model_range(const Tensor<T>&, std::int64_t);               \
  template Tensor<T> mask_tensor(const std::vector<MaskImage>&);                    \
  template MaskImage mask_from_logits(const Tensor<T>&, std::int64_t);

LCGAN_INSTANTIATE(float)
LCGAN_INSTANTIATE(double)

}  // namespace lcgan::img
