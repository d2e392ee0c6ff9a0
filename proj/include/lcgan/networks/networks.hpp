#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lcgan/networks/parameters.hpp"

// Every network maps [N, C, H, W] tensors; images use the [-1, 1] coding.
namespace lcgan::nn {

/// ResNet translator: c7s1-w, two stride-2 downsamplings, residual blocks at
/// 4w, two stride-2 transposed convolutions, c7s1-out and tanh.
struct ResnetGeneratorConfig {
  int in_channels = 3;
  int out_channels = 3;
  int base_width = 16;
  int residual_blocks = 3;

  static ResnetGeneratorConfig desk() { return {}; }
  static ResnetGeneratorConfig full_scale() { return {3, 3, 64, 9}; }
};

/// Small DeepLabV3+-style segmentor: strided conv encoder with a low-level
/// tap, ASPP over the deepest features, concat decoder, 2-class logits.
struct SegmentorConfig {
  int in_channels = 3;
  std::vector<int> encoder_widths{16, 32, 32, 64, 64};
  std::vector<int> encoder_strides{1, 2, 1, 2, 1};
  int low_level_stage = 2;  // index into the encoder stages
  std::vector<int> aspp_rates{1, 2, 4};
  int aspp_width = 32;
  bool image_pooling = true;
  int low_level_width = 16;
  int decoder_width = 32;
  int num_classes = 2;

  static SegmentorConfig desk() { return {}; }
  /// Output stride 16 with the tap at stride 4: 208 -> 52 (tap) -> 13 (deep).
  static SegmentorConfig full_scale_reference();

  int tap_stride() const;
  int output_stride() const;
  /// Throws std::invalid_argument when the lists are inconsistent.
  void validate() const;
};

/// Generator built on a trained segmentor encoder (frozen). The decoder
/// upsamples from the tap resolution with stride-2 transposed convolutions.
struct BackboneGeneratorConfig {
  SegmentorConfig backbone;
  int decoder_width = 32;
  int out_channels = 3;

  static BackboneGeneratorConfig desk() { return {}; }
};

/// PatchGAN: k x k convolutions with the given strides; widths lists the
/// hidden layers, a final 1-channel layer uses the last stride.
struct DiscriminatorConfig {
  int in_channels = 3;
  std::vector<int> widths{16, 32, 64};
  std::vector<int> strides{2, 2, 1, 1};
  int kernel = 4;
  int padding = 1;
  double slope = 0.2;

  static DiscriminatorConfig desk() { return {}; }
  static DiscriminatorConfig full_scale() { return {3, {64, 128, 256, 512}, {2, 2, 2, 1, 1}, 4, 1, 0.2}; }
  void validate() const;
};

/// r <- r + (k - 1) * jump; jump <- jump * stride over every layer.
int receptive_field(const DiscriminatorConfig& config);
/// Receptive field measured on a linearized copy of the network (positive
/// constant kernels, no bias, no activation): the number of input columns and
/// rows whose perturbation reaches the central output. Returns {width, height}.
std::pair<int, int> probe_receptive_field(const DiscriminatorConfig& config, int input_size);

void to_json(nlohmann::json& j, const ResnetGeneratorConfig& c);
void from_json(const nlohmann::json& j, ResnetGeneratorConfig& c);
void to_json(nlohmann::json& j, const SegmentorConfig& c);
void from_json(const nlohmann::json& j, SegmentorConfig& c);
void to_json(nlohmann::json& j, const BackboneGeneratorConfig& c);
void from_json(const nlohmann::json& j, BackboneGeneratorConfig& c);
void to_json(nlohmann::json& j, const DiscriminatorConfig& c);
void from_json(const nlohmann::json& j, DiscriminatorConfig& c);

/// Common interface of the two translators.
template <typename T>
class Generator {
 public:
  virtual ~Generator() = default;
  virtual Tensor<T> forward(const Tensor<T>& x) const = 0;
  virtual ParameterStore<T>& parameters() = 0;
  virtual const ParameterStore<T>& parameters() const = 0;
  /// {"type": ..., "config": ...}
  virtual nlohmann::json architecture() const = 0;
};

template <typename T>
class ResnetGenerator final : public Generator<T> {
 public:
  ResnetGenerator(const ResnetGeneratorConfig& config, std::uint64_t seed);
  ResnetGenerator(const ResnetGenerator&) = delete;
  ResnetGenerator& operator=(const ResnetGenerator&) = delete;

  /// Height and width must be divisible by 4.
  Tensor<T> forward(const Tensor<T>& x) const override;
  ParameterStore<T>& parameters() override { return params_; }
  const ParameterStore<T>& parameters() const override { return params_; }
  nlohmann::json architecture() const override;
  const ResnetGeneratorConfig& config() const { return config_; }

 private:
  struct Block {
    ConvLayer<T> a, b;
  };
  ResnetGeneratorConfig config_;
  ParameterStore<T> params_;
  ConvLayer<T> head_, down1_, down2_, tail_;
  std::vector<Block> blocks_;
  ConvTransposeLayer<T> up1_, up2_;
};

template <typename T>
struct EncoderFeatures {
  Tensor<T> low_level;
  Tensor<T> deep;
};

/// Conv-IN-ReLU stages; parameters are registered under "enc.".
template <typename T>
class Encoder {
 public:
  Encoder() = default;
  Encoder(LayerFactory<T>& factory, const SegmentorConfig& config);
  EncoderFeatures<T> forward(const Tensor<T>& x) const;

 private:
  std::vector<ConvLayer<T>> stages_;
  int tap_ = 0;
};

/// Parallel atrous branches plus optional image pooling, projected by 1x1.
template <typename T>
class Aspp {
 public:
  Aspp() = default;
  Aspp(LayerFactory<T>& factory, const std::string& prefix, int in_channels, const std::vector<int>& rates,
       int width, bool image_pooling);
  Tensor<T> forward(const Tensor<T>& x) const;

 private:
  std::vector<ConvLayer<T>> branches_;
  ConvLayer<T> pool_;
  bool image_pooling_ = false;
  ConvLayer<T> project_;
};

template <typename T>
class Segmentor {
 public:
  Segmentor(const SegmentorConfig& config, std::uint64_t seed);
  Segmentor(const Segmentor&) = delete;
  Segmentor& operator=(const Segmentor&) = delete;

  /// Logits [N, num_classes, H, W] at input resolution.
  Tensor<T> forward(const Tensor<T>& x) const;
  ParameterStore<T>& parameters() { return params_; }
  const ParameterStore<T>& parameters() const { return params_; }
  nlohmann::json architecture() const;
  const SegmentorConfig& config() const { return config_; }

 private:
  SegmentorConfig config_;
  ParameterStore<T> params_;
  Encoder<T> encoder_;
  Aspp<T> aspp_;
  ConvLayer<T> low_, dec1_, dec2_, classifier_;
};

template <typename T>
class BackboneGenerator final : public Generator<T> {
 public:
  /// Copies the "enc." entries of a trained segmentor built from
  /// config.backbone and freezes them; the ASPP and decoder are initialized
  /// from `seed`. With no segmentor the frozen encoder keeps its random
  /// initialization and is expected to be overwritten from a checkpoint.
  BackboneGenerator(const BackboneGeneratorConfig& config, const ParameterStore<T>* trained, std::uint64_t seed);
  BackboneGenerator(const BackboneGenerator&) = delete;
  BackboneGenerator& operator=(const BackboneGenerator&) = delete;

  /// Height and width must be divisible by the tap stride.
  Tensor<T> forward(const Tensor<T>& x) const override;
  ParameterStore<T>& parameters() override { return params_; }
  const ParameterStore<T>& parameters() const override { return params_; }
  nlohmann::json architecture() const override;
  const BackboneGeneratorConfig& config() const { return config_; }

 private:
  BackboneGeneratorConfig config_;
  ParameterStore<T> params_;
  Encoder<T> encoder_;
  Aspp<T> aspp_;
  ConvLayer<T> low_, dec1_, dec2_, out_;
  std::vector<ConvTransposeLayer<T>> ups_;
};

template <typename T>
class PatchDiscriminator {
 public:
  PatchDiscriminator(const DiscriminatorConfig& config, std::uint64_t seed);
  PatchDiscriminator(const PatchDiscriminator&) = delete;
  PatchDiscriminator& operator=(const PatchDiscriminator&) = delete;

  /// 1-channel patch map, no output activation.
  Tensor<T> forward(const Tensor<T>& x) const;
  ParameterStore<T>& parameters() { return params_; }
  const ParameterStore<T>& parameters() const { return params_; }
  nlohmann::json architecture() const;
  const DiscriminatorConfig& config() const { return config_; }
  const std::vector<ConvLayer<T>>& layers() const { return layers_; }

 private:
  DiscriminatorConfig config_;
  ParameterStore<T> params_;
  std::vector<ConvLayer<T>> layers_;
};

/// Builds whichever translator an architecture record describes. A backbone
/// generator needs the trained segmentor parameters it was derived from.
template <typename T>
std::unique_ptr<Generator<T>> make_generator(const nlohmann::json& architecture, std::uint64_t seed,
                                             const ParameterStore<T>* backbone = nullptr);

}  // namespace lcgan::nn
