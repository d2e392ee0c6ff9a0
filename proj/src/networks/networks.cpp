#include "lcgan/networks/networks.hpp"

#include <algorithm>
#include <stdexcept>

namespace lcgan::nn {

namespace {

template <typename T>
Tensor<T> in_relu(const Tensor<T>& x) {
  return ops::relu(ops::instance_norm(x));
}

template <typename T>
void require_image(const Tensor<T>& x, int channels, int multiple, const char* who) {
  if (x.rank() != 4 || x.dim(1) != channels) {
    throw ShapeError(std::string(who) + ": expected [N, " + std::to_string(channels) + ", H, W], got " +
                     shape_string(x.shape()));
  }
  if (x.dim(2) % multiple != 0 || x.dim(3) % multiple != 0) {
    throw ShapeError(std::string(who) + ": height and width must be divisible by " + std::to_string(multiple) +
                     ", got " + shape_string(x.shape()));
  }
}

int log2_exact(int v, const char* what) {
  int k = 0;
  while ((1 << k) < v) ++k;
  if ((1 << k) != v) throw std::invalid_argument(std::string(what) + " must be a power of two");
  return k;
}

}  // namespace

SegmentorConfig SegmentorConfig::full_scale_reference() {
  SegmentorConfig c;
  c.encoder_widths = {32, 64, 64, 128, 256};
  c.encoder_strides = {2, 2, 1, 2, 2};
  c.low_level_stage = 2;
  c.aspp_rates = {1, 6, 12, 18};
  c.aspp_width = 64;
  c.low_level_width = 32;
  c.decoder_width = 64;
  return c;
}

int SegmentorConfig::tap_stride() const {
  int s = 1;
  for (int i = 0; i <= low_level_stage; ++i) s *= encoder_strides[i];
  return s;
}

int SegmentorConfig::output_stride() const {
  int s = 1;
  for (int v : encoder_strides) s *= v;
  return s;
}

void SegmentorConfig::validate() const {
  if (encoder_widths.empty() || encoder_widths.size() != encoder_strides.size()) {
    throw std::invalid_argument("segmentor: encoder widths and strides must be non-empty and equally long");
  }
  if (low_level_stage < 0 || low_level_stage >= static_cast<int>(encoder_widths.size())) {
    throw std::invalid_argument("segmentor: low-level stage out of range");
  }
  for (int s : encoder_strides)
    if (s != 1 && s != 2) throw std::invalid_argument("segmentor: encoder strides must be 1 or 2");
  for (int w : encoder_widths)
    if (w <= 0) throw std::invalid_argument("segmentor: widths must be positive");
  if (aspp_rates.empty()) throw std::invalid_argument("segmentor: need at least one ASPP rate");
  for (int r : aspp_rates)
    if (r <= 0) throw std::invalid_argument("segmentor: ASPP rates must be positive");
  if (in_channels <= 0 || aspp_width <= 0 || low_level_width <= 0 || decoder_width <= 0 || num_classes < 2) {
    throw std::invalid_argument("segmentor: invalid channel counts");
  }
}

void DiscriminatorConfig::validate() const {
  if (widths.empty() || strides.size() != widths.size() + 1) {
    throw std::invalid_argument("discriminator: need one stride per hidden layer plus one for the output layer");
  }
  if (kernel <= 0 || padding < 0) throw std::invalid_argument("discriminator: invalid kernel or padding");
  for (int s : strides)
    if (s <= 0) throw std::invalid_argument("discriminator: strides must be positive");
}

int receptive_field(const DiscriminatorConfig& config) {
  int r = 1, jump = 1;
  for (int s : config.strides) {
    r += (config.kernel - 1) * jump;
    jump *= s;
  }
  return r;
}

void to_json(nlohmann::json& j, const ResnetGeneratorConfig& c) {
  j = {{"in_channels", c.in_channels},
       {"out_channels", c.out_channels},
       {"base_width", c.base_width},
       {"residual_blocks", c.residual_blocks}};
}

void from_json(const nlohmann::json& j, ResnetGeneratorConfig& c) {
  c.in_channels = j.value("in_channels", c.in_channels);
  c.out_channels = j.value("out_channels", c.out_channels);
  c.base_width = j.value("base_width", c.base_width);
  c.residual_blocks = j.value("residual_blocks", c.residual_blocks);
}

void to_json(nlohmann::json& j, const SegmentorConfig& c) {
  j = {{"in_channels", c.in_channels},         {"encoder_widths", c.encoder_widths},
       {"encoder_strides", c.encoder_strides}, {"low_level_stage", c.low_level_stage},
       {"aspp_rates", c.aspp_rates},           {"aspp_width", c.aspp_width},
       {"image_pooling", c.image_pooling},     {"low_level_width", c.low_level_width},
       {"decoder_width", c.decoder_width},     {"num_classes", c.num_classes}};
}

void from_json(const nlohmann::json& j, SegmentorConfig& c) {
  c.in_channels = j.value("in_channels", c.in_channels);
  c.encoder_widths = j.value("encoder_widths", c.encoder_widths);
  c.encoder_strides = j.value("encoder_strides", c.encoder_strides);
  c.low_level_stage = j.value("low_level_stage", c.low_level_stage);
  c.aspp_rates = j.value("aspp_rates", c.aspp_rates);
  c.aspp_width = j.value("aspp_width", c.aspp_width);
  c.image_pooling = j.value("image_pooling", c.image_pooling);
  c.low_level_width = j.value("low_level_width", c.low_level_width);
  c.decoder_width = j.value("decoder_width", c.decoder_width);
  c.num_classes = j.value("num_classes", c.num_classes);
}

void to_json(nlohmann::json& j, const BackboneGeneratorConfig& c) {
  j = {{"backbone", c.backbone}, {"decoder_width", c.decoder_width}, {"out_channels", c.out_channels}};
}

void from_json(const nlohmann::json& j, BackboneGeneratorConfig& c) {
  if (j.contains("backbone")) c.backbone = j.at("backbone").get<SegmentorConfig>();
  c.decoder_width = j.value("decoder_width", c.decoder_width);
  c.out_channels = j.value("out_channels", c.out_channels);
}

void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
  j = {{"in_channels", c.in_channels}, {"widths", c.widths},   {"strides", c.strides},
       {"kernel", c.kernel},           {"padding", c.padding}, {"slope", c.slope}};
}

void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
  c.in_channels = j.value("in_channels", c.in_channels);
  c.widths = j.value("widths", c.widths);
  c.strides = j.value("strides", c.strides);
  c.kernel = j.value("kernel", c.kernel);
  c.padding = j.value("padding", c.padding);
  c.slope = j.value("slope", c.slope);
}

// ---- ResNet generator

template <typename T>
ResnetGenerator<T>::ResnetGenerator(const ResnetGeneratorConfig& config, std::uint64_t seed) : config_(config) {
  if (config.base_width <= 0 || config.residual_blocks < 0 || config.in_channels <= 0 || config.out_channels <= 0) {
    throw std::invalid_argument("resnet generator: invalid configuration");
  }
  LayerFactory<T> f(params_, seed);
  const int w = config.base_width;
  head_ = f.conv("head", config.in_channels, w, 7, {1, 3, 1}, false);
  down1_ = f.conv("down1", w, 2 * w, 3, {2, 1, 1}, false);
  down2_ = f.conv("down2", 2 * w, 4 * w, 3, {2, 1, 1}, false);
  for (int i = 0; i < config.residual_blocks; ++i) {
    const auto name = "res" + std::to_string(i);
    blocks_.push_back({f.conv(name + ".a", 4 * w, 4 * w, 3, {1, 1, 1}, false),
                       f.conv(name + ".b", 4 * w, 4 * w, 3, {1, 1, 1}, false)});
  }
  up1_ = f.conv_transpose("up1", 4 * w, 2 * w, 4, 2, 1, false);
  up2_ = f.conv_transpose("up2", 2 * w, w, 4, 2, 1, false);
  tail_ = f.conv("tail", w, config.out_channels, 7, {1, 3, 1}, true);
}

template <typename T>
Tensor<T> ResnetGenerator<T>::forward(const Tensor<T>& x) const {
  require_image(x, config_.in_channels, 4, "resnet generator");
  auto h = in_relu(head_(x));
  h = in_relu(down1_(h));
  h = in_relu(down2_(h));
  for (const auto& b : blocks_) h = ops::add(h, ops::instance_norm(b.b(in_relu(b.a(h)))));
  h = in_relu(up1_(h));
  h = in_relu(up2_(h));
  return ops::tanh(tail_(h));
}

template <typename T>
nlohmann::json ResnetGenerator<T>::architecture() const {
  return {{"type", "resnet_generator"}, {"config", config_}};
}

// ---- encoder and ASPP

template <typename T>
Encoder<T>::Encoder(LayerFactory<T>& factory, const SegmentorConfig& config) : tap_(config.low_level_stage) {
  int in = config.in_channels;
  for (std::size_t i = 0; i < config.encoder_widths.size(); ++i) {
    stages_.push_back(factory.conv("enc.conv" + std::to_string(i + 1), in, config.encoder_widths[i], 3,
                                   {config.encoder_strides[i], 1, 1}, false));
    in = config.encoder_widths[i];
  }
}

template <typename T>
EncoderFeatures<T> Encoder<T>::forward(const Tensor<T>& x) const {
  EncoderFeatures<T> out;
  auto h = x;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    h = in_relu(stages_[i](h));
    if (static_cast<int>(i) == tap_) out.low_level = h;
  }
  out.deep = h;
  return out;
}

template <typename T>
Aspp<T>::Aspp(LayerFactory<T>& factory, const std::string& prefix, int in_channels, const std::vector<int>& rates,
              int width, bool image_pooling)
    : image_pooling_(image_pooling) {
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const int r = rates[i];
    const auto name = prefix + ".branch" + std::to_string(i);
    branches_.push_back(r == 1 ? factory.conv(name, in_channels, width, 1, {1, 0, 1}, false)
                               : factory.conv(name, in_channels, width, 3, {1, r, r}, false));
  }
  int branches = static_cast<int>(rates.size());
  if (image_pooling) {
    pool_ = factory.conv(prefix + ".pool", in_channels, width, 1, {1, 0, 1}, true);
    ++branches;
  }
  project_ = factory.conv(prefix + ".project", branches * width, width, 1, {1, 0, 1}, false);
}

template <typename T>
Tensor<T> Aspp<T>::forward(const Tensor<T>& x) const {
  std::vector<Tensor<T>> parts;
  for (const auto& b : branches_) parts.push_back(in_relu(b(x)));
  if (image_pooling_) {
    // A 1x1 map has no spatial statistics to normalize.
    parts.push_back(ops::broadcast_spatial(ops::relu(pool_(ops::spatial_mean(x))), x.dim(2), x.dim(3)));
  }
  return in_relu(project_(ops::concat_channels(parts)));
}

// ---- segmentor

template <typename T>
Segmentor<T>::Segmentor(const SegmentorConfig& config, std::uint64_t seed) : config_(config) {
  config.validate();
  LayerFactory<T> f(params_, seed);
  encoder_ = Encoder<T>(f, config);
  aspp_ = Aspp<T>(f, "aspp", config.encoder_widths.back(), config.aspp_rates, config.aspp_width, config.image_pooling);
  low_ = f.conv("dec.low", config.encoder_widths[config.low_level_stage], config.low_level_width, 1, {1, 0, 1}, false);
  dec1_ = f.conv("dec.conv1", config.aspp_width + config.low_level_width, config.decoder_width, 3, {1, 1, 1}, false);
  dec2_ = f.conv("dec.conv2", config.decoder_width, config.decoder_width, 3, {1, 1, 1}, false);
  classifier_ = f.conv("dec.classifier", config.decoder_width, config.num_classes, 1, {1, 0, 1}, true);
}

template <typename T>
Tensor<T> Segmentor<T>::forward(const Tensor<T>& x) const {
  require_image(x, config_.in_channels, 1, "segmentor");
  const auto feats = encoder_.forward(x);
  const auto& low = feats.low_level;
  const auto context = ops::upsample_bilinear(aspp_.forward(feats.deep), low.dim(2), low.dim(3));
  auto h = ops::concat_channels<T>({context, in_relu(low_(low))});
  h = in_relu(dec2_(in_relu(dec1_(h))));
  auto logits = classifier_(h);
  if (logits.dim(2) != x.dim(2) || logits.dim(3) != x.dim(3)) {
    logits = ops::upsample_bilinear(logits, x.dim(2), x.dim(3));
  }
  return logits;
}

template <typename T>
nlohmann::json Segmentor<T>::architecture() const {
  return {{"type", "segmentor"}, {"config", config_}};
}

// ---- backbone generator

template <typename T>
BackboneGenerator<T>::BackboneGenerator(const BackboneGeneratorConfig& config, const ParameterStore<T>* trained,
                                        std::uint64_t seed)
    : config_(config) {
  const auto& bb = config.backbone;
  bb.validate();
  if (config.decoder_width <= 0 || config.out_channels <= 0) {
    throw std::invalid_argument("backbone generator: invalid decoder configuration");
  }
  const int ups = log2_exact(bb.tap_stride(), "backbone generator: tap stride");
  LayerFactory<T> f(params_, seed);
  encoder_ = Encoder<T>(f, bb);
  if (trained) params_.copy_values_from(*trained, "enc.", "enc.");
  params_.freeze("enc.");
  aspp_ = Aspp<T>(f, "aspp", bb.encoder_widths.back(), bb.aspp_rates, bb.aspp_width, bb.image_pooling);
  low_ = f.conv("dec.low", bb.encoder_widths[bb.low_level_stage], bb.low_level_width, 1, {1, 0, 1}, false);
  dec1_ = f.conv("dec.conv1", bb.aspp_width + bb.low_level_width, config.decoder_width, 3, {1, 1, 1}, false);
  dec2_ = f.conv("dec.conv2", config.decoder_width, config.decoder_width, 3, {1, 1, 1}, false);
  int width = config.decoder_width;
  for (int i = 0; i < ups; ++i) {
    const int next = std::max(width / 2, 8);
    ups_.push_back(f.conv_transpose("dec.up" + std::to_string(i + 1), width, next, 4, 2, 1, false));
    width = next;
  }
  out_ = f.conv("dec.out", width, config.out_channels, 7, {1, 3, 1}, true);
}

template <typename T>
Tensor<T> BackboneGenerator<T>::forward(const Tensor<T>& x) const {
  require_image(x, config_.backbone.in_channels, config_.backbone.tap_stride(), "backbone generator");
  const auto feats = encoder_.forward(x);
  const auto& low = feats.low_level;
  const auto context = ops::upsample_bilinear(aspp_.forward(feats.deep), low.dim(2), low.dim(3));
  auto h = ops::concat_channels<T>({context, in_relu(low_(low))});
  h = in_relu(dec2_(in_relu(dec1_(h))));
  for (const auto& up : ups_) h = in_relu(up(h));
  return ops::tanh(out_(h));
}

template <typename T>
nlohmann::json BackboneGenerator<T>::architecture() const {
  return {{"type", "backbone_generator"}, {"config", config_}};
}

// ---- discriminator

template <typename T>
PatchDiscriminator<T>::PatchDiscriminator(const DiscriminatorConfig& config, std::uint64_t seed) : config_(config) {
  config.validate();
  LayerFactory<T> f(params_, seed);
  int in = config.in_channels;
  const auto n = config.widths.size();
  for (std::size_t i = 0; i <= n; ++i) {
    const int out = i < n ? config.widths[i] : 1;
    // Layers followed by instance norm carry no bias.
    const bool bias = i == 0 || i == n;
    layers_.push_back(f.conv("conv" + std::to_string(i + 1), in, out, config.kernel,
                             {config.strides[i], config.padding, 1}, bias));
    in = out;
  }
}

template <typename T>
Tensor<T> PatchDiscriminator<T>::forward(const Tensor<T>& x) const {
  require_image(x, config_.in_channels, 1, "discriminator");
  const T slope = static_cast<T>(config_.slope);
  auto h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    if (i + 1 == layers_.size()) break;
    if (i > 0) h = ops::instance_norm(h);
    h = ops::leaky_relu(h, slope);
  }
  return h;
}

template <typename T>
nlohmann::json PatchDiscriminator<T>::architecture() const {
  return {{"type", "patch_discriminator"}, {"config", config_}};
}

template <typename T>
std::unique_ptr<Generator<T>> make_generator(const nlohmann::json& architecture, std::uint64_t seed,
                                             const ParameterStore<T>* backbone) {
  const auto type = architecture.at("type").get<std::string>();
  if (type == "resnet_generator") {
    return std::make_unique<ResnetGenerator<T>>(architecture.at("config").get<ResnetGeneratorConfig>(), seed);
  }
  if (type == "backbone_generator") {
    return std::make_unique<BackboneGenerator<T>>(architecture.at("config").get<BackboneGeneratorConfig>(), backbone,
                                                  seed);
  }
  throw std::invalid_argument("unknown generator type '" + type + "'");
}

#define LCGAN_INSTANTIATE(T)                                                                             \
  template class ResnetGenerator<T>;                                                                      \
  template class Encoder<T>;                                                                              \
  template class Aspp<T>;                                                                                 \
  template class Segmentor<T>;                                                                            \
  template class BackboneGenerator<T>;                                                                    \
  template class PatchDiscriminator<T>;                                                                   \
  template std::unique_ptr<Generator<T>> make_generator(const nlohmann::json&, std::uint64_t,            \
                                                        const ParameterStore<T>*);

LCGAN_INSTANTIATE(float)
LCGAN_INSTANTIATE(double)

std::pair<int, int> probe_receptive_field(const DiscriminatorConfig& config, int input_size) {
  PatchDiscriminator<double> d(config, 0);
  std::vector<ConvLayer<double>> linear;
  for (const auto& l : d.layers()) {
    ConvLayer<double> c = l;
    c.kernel = Tensor<double>::full(l.kernel.shape(), 0.01);
    c.bias = {};
    linear.push_back(c);
  }
  auto run = [&](const Tensor<double>& x) {
    auto h = x;
    for (const auto& l : linear) h = l(h);
    return h;
  };
  const std::int64_t n = input_size;
  const auto shape = run(Tensor<double>::zeros({1, config.in_channels, n, n})).shape();
  const auto oh = shape[2], ow = shape[3];
  const auto centre = (oh / 2) * ow + ow / 2;
  // A whole row or column of ones reaches the central output exactly when it
  // crosses that output's window.
  int width = 0, height = 0;
  for (std::int64_t p = 0; p < n; ++p) {
    for (int axis = 0; axis < 2; ++axis) {
      std::vector<double> v(static_cast<std::size_t>(config.in_channels * n * n), 0.0);
      for (std::int64_t c = 0; c < config.in_channels; ++c)
        for (std::int64_t q = 0; q < n; ++q) v[(c * n + (axis == 0 ? q : p)) * n + (axis == 0 ? p : q)] = 1.0;
      if (run(Tensor<double>({1, config.in_channels, n, n}, v)).data()[centre] > 0) ++(axis == 0 ? width : height);
    }
  }
  return {width, height};
}

}  // namespace lcgan::nn
