#include "lcgan/training/config.hpp"

#include <fstream>

namespace lcgan::train {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("config: " + message);
}

void check_keys(const json& user, const json& defaults, const std::string& path) {
  require(user.is_object(), (path.empty() ? std::string("top level") : path) + " must be an object");
  for (const auto& [key, value] : user.items()) {
    const auto where = path.empty() ? key : path + "." + key;
    require(defaults.contains(key), "unknown key '" + where + "'");
    if (defaults[key].is_object()) check_keys(value, defaults[key], where);
  }
}

json loss_json(const loss::LossConfig& c, const AblationFlags& f) {
  return {{"lambda_cycle", c.lambda_cycle},
          {"lambda_ssim", c.lambda_ssim},
          {"lambda_seg", c.lambda_seg},
          {"scales", c.scales},
          {"gamma", c.gamma},
          {"epsilon", c.epsilon},
          {"flags", {{"ssim", f.ssim}, {"seg", f.seg}, {"trained_backbone", f.trained_backbone}}}};
}

}  // namespace

std::string AblationFlags::label() const {
  std::string out;
  auto append = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  append(ssim, "ssim");
  append(seg, "seg");
  append(trained_backbone, "backbone");
  return out.empty() ? "none" : out;
}

void RunConfig::validate() const {
  require(data.train_count >= 1, "data.train_count must be at least 1");
  require(data.test_count >= 1, "data.test_count must be at least 1");
  require(data.image_size >= 16, "data.image_size must be at least 16");
  require(data.image_size % 4 == 0, "data.image_size must be divisible by 4");
  try {
    loss.validate();
    model.segmentor.validate();
    model.backbone_generator.backbone.validate();
    model.discriminator.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  require(data.image_size % model.backbone_generator.backbone.tap_stride() == 0,
          "data.image_size must be divisible by the generator backbone's tap stride");
  const int coarse = data.image_size >> loss.scales;
  require(coarse * coarse >= 2, "data.image_size leaves fewer than 2 pixels at the coarsest pyramid level");
  require(optim.lr > 0 && optim.seg_lr > 0, "learning rates must be positive");
  require(optim.beta1 >= 0 && optim.beta1 < 1 && optim.seg_beta1 >= 0 && optim.seg_beta1 < 1,
          "beta1 must lie in [0, 1)");
  require(optim.beta2 >= 0 && optim.beta2 < 1, "optim.beta2 must lie in [0, 1)");
  require(optim.eps > 0, "optim.eps must be positive");
  require(optim.buffer_capacity >= 0, "optim.buffer_capacity must not be negative");
  require(run.iterations >= 1, "run.iterations must be at least 1");
  require(run.seg_epochs >= 1, "run.seg_epochs must be at least 1");
  require(run.seg_batch >= 1, "run.seg_batch must be at least 1");
  require(run.validation_fraction >= 0 && run.validation_fraction < 1, "run.validation_fraction must lie in [0, 1)");
  require(run.log_every >= 1, "run.log_every must be at least 1");
  require(run.checkpoint_every >= 0, "run.checkpoint_every must not be negative");
  require(run.threads >= 1, "run.threads must be at least 1");
}

json to_json(const RunConfig& c) {
  return {{"data",
           {{"root", c.data.root},
            {"train_count", c.data.train_count},
            {"test_count", c.data.test_count},
            {"image_size", c.data.image_size},
            {"seed", c.data.seed}}},
          {"model",
           {{"segmentor", c.model.segmentor},
            {"backbone_generator", c.model.backbone_generator},
            {"resnet_generator", c.model.resnet_generator},
            {"discriminator", c.model.discriminator}}},
          {"loss", loss_json(c.loss, c.flags)},
          {"optim",
           {{"lr", c.optim.lr},
            {"beta1", c.optim.beta1},
            {"beta2", c.optim.beta2},
            {"eps", c.optim.eps},
            {"buffer_capacity", c.optim.buffer_capacity},
            {"seg_lr", c.optim.seg_lr},
            {"seg_beta1", c.optim.seg_beta1}}},
          {"run",
           {{"seed", c.run.seed},
            {"iterations", c.run.iterations},
            {"seg_epochs", c.run.seg_epochs},
            {"seg_batch", c.run.seg_batch},
            {"validation_fraction", c.run.validation_fraction},
            {"log_every", c.run.log_every},
            {"checkpoint_every", c.run.checkpoint_every},
            {"threads", c.run.threads}}}};
}

RunConfig config_from_json(const json& user) {
  const json defaults = to_json(RunConfig{});
  check_keys(user, defaults, "");
  json j = defaults;
  j.merge_patch(user);

  RunConfig c;
  try {
    const auto& d = j.at("data");
    c.data.root = d.at("root").get<std::string>();
    c.data.train_count = d.at("train_count").get<int>();
    c.data.test_count = d.at("test_count").get<int>();
    c.data.image_size = d.at("image_size").get<int>();
    c.data.seed = d.at("seed").get<std::uint64_t>();

    const auto& m = j.at("model");
    c.model.segmentor = m.at("segmentor").get<nn::SegmentorConfig>();
    c.model.backbone_generator = m.at("backbone_generator").get<nn::BackboneGeneratorConfig>();
    c.model.resnet_generator = m.at("resnet_generator").get<nn::ResnetGeneratorConfig>();
    c.model.discriminator = m.at("discriminator").get<nn::DiscriminatorConfig>();

    const auto& l = j.at("loss");
    c.loss.lambda_cycle = l.at("lambda_cycle").get<double>();
    c.loss.lambda_ssim = l.at("lambda_ssim").get<double>();
    c.loss.lambda_seg = l.at("lambda_seg").get<double>();
    c.loss.scales = l.at("scales").get<int>();
    c.loss.gamma = l.at("gamma").get<std::vector<double>>();
    c.loss.epsilon = l.at("epsilon").get<double>();
    const auto& f = l.at("flags");
    c.flags.ssim = f.at("ssim").get<bool>();
    c.flags.seg = f.at("seg").get<bool>();
    c.flags.trained_backbone = f.at("trained_backbone").get<bool>();

    const auto& o = j.at("optim");
    c.optim.lr = o.at("lr").get<double>();
    c.optim.beta1 = o.at("beta1").get<double>();
    c.optim.beta2 = o.at("beta2").get<double>();
    c.optim.eps = o.at("eps").get<double>();
    c.optim.buffer_capacity = o.at("buffer_capacity").get<int>();
    c.optim.seg_lr = o.at("seg_lr").get<double>();
    c.optim.seg_beta1 = o.at("seg_beta1").get<double>();

    const auto& r = j.at("run");
    c.run.seed = r.at("seed").get<std::uint64_t>();
    c.run.iterations = r.at("iterations").get<std::int64_t>();
    c.run.seg_epochs = r.at("seg_epochs").get<int>();
    c.run.seg_batch = r.at("seg_batch").get<int>();
    c.run.validation_fraction = r.at("validation_fraction").get<double>();
    c.run.log_every = r.at("log_every").get<int>();
    c.run.checkpoint_every = r.at("checkpoint_every").get<int>();
    c.run.threads = r.at("threads").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path_or_default) {
  if (path_or_default == "default") return RunConfig{};
  std::ifstream in(path_or_default);
  if (!in) throw ConfigError("config: cannot open " + path_or_default);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config: " + path_or_default + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void write_config(const fs::path& path, const RunConfig& config) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << to_json(config).dump(2) << '\n';
  if (!out) throw std::runtime_error("config: cannot write " + path.string());
}

std::vector<AblationFlags> ablation_grid() {
  return {{false, false, false}, {true, false, false}, {false, true, false}, {false, false, true},
          {true, true, false},   {true, false, true},  {false, true, true},  {true, true, true}};
}

}  // namespace lcgan::train
