#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "lcgan/losses/losses.hpp"
#include "lcgan/networks/networks.hpp"

// Run configuration with the JSON sections data, model, loss, optim and run.
// Every field has a desk-scale default; a config file only needs to name the
// fields it changes.
namespace lcgan::train {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DataConfig {
  std::string root = "data";  // holds train/{X,Y} and test/{X,Y}
  int train_count = 400;      // per domain
  int test_count = 100;
  int image_size = 64;
  std::uint64_t seed = 1;
};

struct ModelConfig {
  nn::SegmentorConfig segmentor;
  nn::BackboneGeneratorConfig backbone_generator;
  nn::ResnetGeneratorConfig resnet_generator;
  nn::DiscriminatorConfig discriminator;
};

/// Which LC-GAN components are active; all off is the plain cycle GAN.
struct AblationFlags {
  bool ssim = true;
  bool seg = true;
  bool trained_backbone = true;

  /// "ssim+seg+backbone", "none", ...
  std::string label() const;
  bool operator==(const AblationFlags&) const = default;
};

struct OptimConfig {
  double lr = 8e-5;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  int buffer_capacity = 50;
  double seg_lr = 1e-3;
  double seg_beta1 = 0.9;
};

struct RunSettings {
  std::uint64_t seed = 1;
  std::int64_t iterations = 3000;
  int seg_epochs = 30;
  int seg_batch = 4;
  double validation_fraction = 0.1;
  int log_every = 50;
  int checkpoint_every = 500;
  int threads = 1;
};

struct RunConfig {
  DataConfig data;
  ModelConfig model;
  loss::LossConfig loss;
  AblationFlags flags;
  OptimConfig optim;
  RunSettings run;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
/// Overlays `j` on the defaults. Unknown sections or keys throw ConfigError.
RunConfig config_from_json(const nlohmann::json& j);
/// "default" yields the defaults; otherwise the file must exist.
RunConfig load_config(const std::string& path_or_default);
void write_config(const std::filesystem::path& path, const RunConfig& config);

/// The 8 flag combinations: none, each single component (ssim, seg,
/// backbone), each pair (ssim+seg, ssim+backbone, seg+backbone), then all.
std::vector<AblationFlags> ablation_grid();

}  // namespace lcgan::train
