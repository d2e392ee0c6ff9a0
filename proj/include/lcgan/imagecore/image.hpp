#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "lcgan/diffcomp/tensor.hpp"

namespace lcgan::img {

/// RGB image with values in [0, 1], stored interleaved row-major.
class ImageRGB {
 public:
  ImageRGB() = default;
  ImageRGB(int width, int height, std::vector<float> values);
  static ImageRGB filled(int width, int height, float r, float g, float b);

  int width() const { return width_; }
  int height() const { return height_; }
  float at(int x, int y, int c) const { return values_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c]; }
  void set(int x, int y, int c, float v);
  const std::vector<float>& values() const { return values_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> values_;
};

/// Single-channel image with values in [0, 1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Binary instrument mask: 1 = instrument, 0 = background.
class MaskImage {
 public:
  MaskImage() = default;
  MaskImage(int width, int height, std::vector<std::uint8_t> values);

  int width() const { return width_; }
  int height() const { return height_; }
  std::uint8_t at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  const std::vector<std::uint8_t>& values() const { return values_; }
  std::int64_t count() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> values_;
};

/// Luminance pyramid; level i is the 2x2 mean pool of level i-1.
struct Pyramid {
  std::vector<GrayImage> levels;
};

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// BT.601 luma weights.
inline constexpr float kLumaR = 0.299f;
inline constexpr float kLumaG = 0.587f;
inline constexpr float kLumaB = 0.114f;

GrayImage luminance(const ImageRGB& image);
/// [N, 3, H, W] -> [N, 1, H, W], differentiable.
template <typename T>
Tensor<T> luminance(const Tensor<T>& rgb);

GrayImage mean_pool2(const GrayImage& image);
/// Rejects images whose smaller side is below 2^levels.
Pyramid build_pyramid(const GrayImage& image, int levels);
/// Differentiable pyramid of an [N, C, H, W] tensor: levels + 1 entries.
template <typename T>
std::vector<Tensor<T>> build_pyramid(const Tensor<T>& image, int levels);

// Binary netpbm I/O (P6 colour, P5 grey), maxval 255, '#' comments allowed in
// the header. Values map linearly between [0, 255] and [0, 1].
ImageRGB read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const ImageRGB& image);
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
/// Grey levels >= 128 are instrument.
MaskImage read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const MaskImage& mask);

std::uint8_t quantize(float v);

/// Maps [0, 1] images to the [-1, 1] model coding as a [N, 3, H, W] tensor.
template <typename T>
Tensor<T> to_model_range(const std::vector<ImageRGB>& images);
template <typename T>
Tensor<T> to_model_range(const ImageRGB& image) {
  return to_model_range<T>(std::vector<ImageRGB>{image});
}
/// Inverse mapping of batch item `index`, clamped to [0, 1].
template <typename T>
ImageRGB from_model_range(const Tensor<T>& tensor, std::int64_t index = 0);

/// Masks as a [N, 1, H, W] tensor of 0/1.
template <typename T>
Tensor<T> mask_tensor(const std::vector<MaskImage>& masks);
/// Channel argmax of [N, C, H, W] logits for batch item `index`; class 1 = instrument.
template <typename T>
MaskImage mask_from_logits(const Tensor<T>& logits, std::int64_t index = 0);

}  // namespace lcgan::img
