#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lcgan/diffcomp/gradcheck.hpp"
#include "lcgan/networks/checkpoint.hpp"
#include "lcgan/networks/networks.hpp"
#include "test_util.hpp"

using namespace lcgan;
using namespace lcgan::nn;
using lcgan::testing::random_tensor;
namespace fs = std::filesystem;

namespace {

// Layer-by-layer count of the ResNet translator.
std::int64_t resnet_count(const ResnetGeneratorConfig& c) {
  const std::int64_t w = c.base_width, in = c.in_channels, out = c.out_channels;
  return 49 * in * w + 9 * w * 2 * w + 9 * 2 * w * 4 * w + c.residual_blocks * 2 * 9 * 4 * w * 4 * w +
         16 * 4 * w * 2 * w + 16 * 2 * w * w + 49 * w * out + out;
}

std::int64_t segmentor_count(const SegmentorConfig& c) {
  std::int64_t n = 0, in = c.in_channels;
  for (int w : c.encoder_widths) {
    n += 9 * in * w;
    in = w;
  }
  const std::int64_t deep = c.encoder_widths.back(), a = c.aspp_width;
  std::int64_t branches = 0;
  for (int r : c.aspp_rates) {
    n += (r == 1 ? 1 : 9) * deep * a;
    ++branches;
  }
  if (c.image_pooling) {
    n += deep * a + a;
    ++branches;
  }
  n += branches * a * a;
  n += c.encoder_widths[c.low_level_stage] * c.low_level_width;
  n += 9 * (a + c.low_level_width) * c.decoder_width + 9 * c.decoder_width * c.decoder_width;
  n += c.decoder_width * c.num_classes + c.num_classes;
  return n;
}

std::int64_t discriminator_count(const DiscriminatorConfig& c) {
  std::int64_t n = 0, in = c.in_channels;
  const std::int64_t k2 = c.kernel * c.kernel;
  for (std::size_t i = 0; i < c.widths.size(); ++i) {
    n += k2 * in * c.widths[i] + (i == 0 ? c.widths[i] : 0);
    in = c.widths[i];
  }
  return n + k2 * in + 1;
}

bool all_in(const Tensor<float>& t, float lo, float hi) {
  for (float v : t.data())
    if (!(v >= lo && v <= hi)) return false;
  return true;
}

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("lcgan_test_networks_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("resnet generator") {
  const auto cfg = ResnetGeneratorConfig::desk();
  ResnetGenerator<float> f(cfg, 1);
  const auto x = random_tensor<float>({1, 3, 64, 64}, 2, -1, 1);
  const auto y = f.forward(x);
  CHECK(y.shape() == Shape{1, 3, 64, 64});
  CHECK(all_in(y, -1.f, 1.f));
  CHECK(f.parameters().parameter_count() == resnet_count(cfg));
  CHECK(resnet_count(ResnetGeneratorConfig::full_scale()) ==
        ResnetGenerator<float>(ResnetGeneratorConfig::full_scale(), 0).parameters().parameter_count());
  CHECK_THROWS_AS(f.forward(random_tensor<float>({1, 3, 62, 64}, 3, -1, 1)), ShapeError);
  CHECK_THROWS_AS(f.forward(random_tensor<float>({1, 1, 64, 64}, 3, -1, 1)), ShapeError);
  SUBCASE("deterministic") { CHECK(f.forward(x).data()[123] == y.data()[123]); }
  SUBCASE("same seed, same weights") {
    ResnetGenerator<float> g(cfg, 1), h(cfg, 2);
    CHECK(g.parameters().checksum() == f.parameters().checksum());
    CHECK(h.parameters().checksum() != f.parameters().checksum());
  }
}

TEST_CASE("parameter initialization") {
  ResnetGenerator<double> f(ResnetGeneratorConfig::desk(), 9);
  double sum = 0, sq = 0;
  std::int64_t n = 0;
  for (const auto& e : f.parameters().entries()) {
    if (e.name.ends_with(".bias")) {
      for (double v : e.tensor.data()) CHECK(v == 0.0);
      continue;
    }
    for (double v : e.tensor.data()) {
      sum += v;
      sq += v * v;
      ++n;
    }
  }
  const double mean = sum / n, sd = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean) < 1e-3);
  CHECK(sd == doctest::Approx(0.02).epsilon(0.02));
}

TEST_CASE("segmentor") {
  const auto cfg = SegmentorConfig::desk();
  Segmentor<float> s(cfg, 4);
  const auto logits = s.forward(random_tensor<float>({2, 3, 64, 64}, 5, -1, 1));
  CHECK(logits.shape() == Shape{2, 2, 64, 64});
  CHECK(s.parameters().parameter_count() == segmentor_count(cfg));

  SUBCASE("frozen segmentor passes gradient to its input only") {
    Segmentor<double> sd(cfg, 4);
    sd.parameters().set_trainable(false);
    CHECK(sd.parameters().trainable().empty());
    auto x = random_tensor({1, 3, 16, 16}, 6, -1, 1, true);
    ops::sum(ops::square(sd.forward(x))).backward();
    CHECK(x.has_grad());
    for (const auto& e : sd.parameters().entries()) CHECK_FALSE(e.tensor.has_grad());
  }
  SUBCASE("invalid configurations") {
    auto bad = cfg;
    bad.encoder_strides.pop_back();
    CHECK_THROWS_AS(Segmentor<float>(bad, 0), std::invalid_argument);
    bad = cfg;
    bad.low_level_stage = 9;
    CHECK_THROWS_AS(Segmentor<float>(bad, 0), std::invalid_argument);
  }
}

TEST_CASE("backbone generator") {
  const auto cfg = BackboneGeneratorConfig::desk();
  Segmentor<float> s(cfg.backbone, 7);
  BackboneGenerator<float> g(cfg, &s.parameters(), 8);
  const auto x = random_tensor<float>({1, 3, 64, 64}, 9, -1, 1);
  const auto y = g.forward(x);
  CHECK(y.shape() == Shape{1, 3, 64, 64});
  CHECK(all_in(y, -1.f, 1.f));

  SUBCASE("encoder is a frozen copy of the segmentor's") {
    CHECK(g.parameters().checksum("enc.") == s.parameters().checksum("enc."));
    for (const auto& name : g.parameters().trainable_names()) CHECK_FALSE(name.starts_with("enc."));
    g.parameters().set_trainable(true);
    for (const auto& name : g.parameters().trainable_names()) CHECK_FALSE(name.starts_with("enc."));
    CHECK(g.parameters().trainable_count() > 0);
    CHECK(g.parameters().trainable_count() < g.parameters().parameter_count());
  }
  SUBCASE("shape-incompatible segmentor is rejected") {
    auto other = cfg.backbone;
    other.encoder_widths[0] = 8;
    Segmentor<float> wrong(other, 1);
    CHECK_THROWS_AS(BackboneGenerator<float>(cfg, &wrong.parameters(), 1), ShapeError);
  }
  SUBCASE("input must be divisible by the tap stride") {
    CHECK_THROWS_AS(g.forward(random_tensor<float>({1, 3, 63, 64}, 1, -1, 1)), ShapeError);
  }
}

TEST_CASE("backbone generator gradients") {
  auto cfg = BackboneGeneratorConfig::desk();
  Segmentor<double> s(cfg.backbone, 3);
  BackboneGenerator<double> g(cfg, &s.parameters(), 4);
  const auto x = random_tensor({1, 3, 16, 16}, 5, -1, 1);
  auto& p = g.parameters();
  p.zero_grad();
  ops::mean(ops::square(g.forward(x))).backward();
  for (const auto& e : p.entries()) {
    if (e.name.starts_with("enc.")) {
      CHECK_FALSE(e.tensor.has_grad());
    } else {
      CHECK(e.tensor.has_grad());
    }
  }
  // Sampled central differences over the decoder.
  std::vector<NamedTensor> checked;
  for (const auto& name : {"aspp.branch1.weight", "dec.low.weight", "dec.up1.weight", "dec.out.weight",
                           "dec.out.bias"})
    checked.push_back({name, p.get(name)});
  GradCheckOptions opt;
  opt.max_entries_per_param = 6;
  const auto r = grad_check([&] { return ops::mean(ops::square(g.forward(x))); }, checked, 1e-4, opt);
  CHECK_MESSAGE(r.passed, r.max_relative_error);
}

TEST_CASE("full-scale reference generator shapes") {
  BackboneGeneratorConfig cfg;
  cfg.backbone = SegmentorConfig::full_scale_reference();
  cfg.decoder_width = 64;
  CHECK(cfg.backbone.output_stride() == 16);
  CHECK(cfg.backbone.tap_stride() == 4);
  ParameterStore<float> store;
  LayerFactory<float> factory(store, 1);
  const Encoder<float> enc(factory, cfg.backbone);
  const auto feats = enc.forward(Tensor<float>::zeros({1, 3, 208, 208}));
  CHECK(feats.deep.shape() == Shape{1, 256, 13, 13});
  CHECK(feats.low_level.shape() == Shape{1, 64, 52, 52});
  BackboneGenerator<float> g(cfg, nullptr, 2);
  CHECK(g.forward(random_tensor<float>({1, 3, 208, 208}, 1, -1, 1)).shape() == Shape{1, 3, 208, 208});
}

TEST_CASE("receptive field") {
  DiscriminatorConfig one;
  one.strides = {2};
  CHECK(receptive_field(one) == 4);
  one.strides = {2, 2};
  CHECK(receptive_field(one) == 10);
  CHECK(receptive_field(DiscriminatorConfig::full_scale()) == 70);
  CHECK(receptive_field(DiscriminatorConfig::desk()) == 34);
}

TEST_CASE("discriminator") {
  SUBCASE("desk") {
    const auto cfg = DiscriminatorConfig::desk();
    PatchDiscriminator<float> d(cfg, 3);
    const auto map = d.forward(random_tensor<float>({2, 3, 64, 64}, 1, -1, 1));
    CHECK(map.shape() == Shape{2, 1, 14, 14});
    CHECK(d.parameters().parameter_count() == discriminator_count(cfg));
  }
  SUBCASE("full scale on 256 gives a 30x30 map") {
    const auto cfg = DiscriminatorConfig::full_scale();
    std::int64_t size = 256;
    for (int s : cfg.strides) size = ops::conv_output_size(size, cfg.kernel, {s, cfg.padding, 1});
    CHECK(size == 30);
    PatchDiscriminator<float> d(cfg, 3);
    CHECK(d.forward(random_tensor<float>({1, 3, 256, 256}, 1, -1, 1)).shape() == Shape{1, 1, 30, 30});
    CHECK(d.parameters().parameter_count() == discriminator_count(cfg));
  }
  SUBCASE("perturbation probe matches the recurrence") {
    const auto cfg = DiscriminatorConfig::desk();
    const auto [w, h] = probe_receptive_field(cfg, 96);
    CHECK(w == receptive_field(cfg));
    CHECK(h == receptive_field(cfg));
    DiscriminatorConfig small{3, {4}, {2, 1}, 4, 1, 0.2};
    CHECK(probe_receptive_field(small, 24) == std::pair{receptive_field(small), receptive_field(small)});
  }
}

TEST_CASE("frozen parameters stay out of the trainable set") {
  PatchDiscriminator<float> d(DiscriminatorConfig::desk(), 1);
  d.parameters().set_trainable(false);
  CHECK(d.parameters().trainable_count() == 0);
  d.parameters().set_trainable(true);
  CHECK(d.parameters().trainable_count() == d.parameters().parameter_count());
}

TEST_CASE("precision conversion by name") {
  Segmentor<float> s(SegmentorConfig::desk(), 11);
  Segmentor<double> sd(SegmentorConfig::desk(), 12);
  sd.parameters().copy_values_from(s.parameters());
  const auto x = random_tensor({1, 3, 16, 16}, 1, -1, 1);
  const auto a = s.forward(cast<float>(x));
  const auto b = sd.forward(x);
  for (std::size_t i = 0; i < a.data().size(); ++i) CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-3));
}

TEST_CASE("checkpoint round trip") {
  const auto dir = scratch_dir("roundtrip");
  Segmentor<float> s(SegmentorConfig::desk(), 21);
  PatchDiscriminator<float> d(DiscriminatorConfig::desk(), 22);
  Checkpoint ck;
  ck.architecture = {{"S", s.architecture()}, {"D", d.architecture()}};
  ck.metadata = {{"iteration", 17}, {"note", "test"}};
  append_parameters(ck, s.parameters(), "S.");
  append_parameters(ck, d.parameters(), "D.");
  save_checkpoint(dir, ck);

  const auto back = load_checkpoint(dir);
  CHECK(back.metadata.at("iteration") == 17);
  CHECK(back.architecture == ck.architecture);
  const auto cfg = back.architecture.at("S").at("config").get<SegmentorConfig>();
  Segmentor<float> s2(cfg, 99);
  CHECK(s2.parameters().checksum() != s.parameters().checksum());
  restore_parameters(back, s2.parameters(), "S.");
  CHECK(s2.parameters().checksum() == s.parameters().checksum());
  const auto x = random_tensor<float>({1, 3, 32, 32}, 3, -1, 1);
  const auto a = s.forward(x), b = s2.forward(x);
  CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));

  SUBCASE("mismatches are reported") {
    PatchDiscriminator<float> wrong(DiscriminatorConfig::full_scale(), 1);
    CHECK_THROWS_AS(restore_parameters(back, wrong.parameters(), "D."), CheckpointError);
    CHECK_THROWS_AS(restore_parameters(back, s2.parameters(), "G."), CheckpointError);
  }
  SUBCASE("damaged files are rejected") {
    CHECK_THROWS_AS(load_checkpoint(dir / "nowhere"), CheckpointError);
    fs::resize_file(dir / "params.bin", fs::file_size(dir / "params.bin") - 4);
    CHECK_THROWS_AS(load_checkpoint(dir), CheckpointError);
    std::ofstream(dir / "manifest.json") << "{not json";
    CHECK_THROWS_AS(load_checkpoint(dir), CheckpointError);
  }
  fs::remove_all(dir);
}

TEST_CASE("generator factory") {
  Segmentor<float> s(SegmentorConfig::desk(), 1);
  BackboneGenerator<float> g(BackboneGeneratorConfig::desk(), &s.parameters(), 2);
  const auto rebuilt = make_generator<float>(g.architecture(), 3, &s.parameters());
  CHECK(rebuilt->parameters().parameter_count() == g.parameters().parameter_count());
  ResnetGenerator<float> r(ResnetGeneratorConfig::desk(), 2);
  CHECK(make_generator<float>(r.architecture(), 2)->parameters().checksum() == r.parameters().checksum());
  CHECK_THROWS_AS(make_generator<float>({{"type", "unet"}, {"config", {}}}, 1), std::invalid_argument);
}
