#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lcgan/losses/losses.hpp"
#include "lcgan/networks/checkpoint.hpp"
#include "lcgan/networks/networks.hpp"
#include "lcgan/synthdata/synth.hpp"
#include "lcgan/training/buffer.hpp"
#include "lcgan/training/config.hpp"
#include "lcgan/training/optim.hpp"
#include "lcgan/training/segmentor_training.hpp"

namespace lcgan::train {

/// Visits indices 0..n-1 in a fresh seeded permutation on every pass.
class Sampler {
 public:
  Sampler(std::size_t n, std::uint64_t seed);
  std::size_t next();

 private:
  void reshuffle();
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  Rng rng_;
};

/// One LC-GAN training run. Each step draws one x and one y, updates G and F
/// jointly on the generator objective, then D_Y and D_X on real images
/// against fakes drawn from the history buffers. S and G's backbone are
/// frozen.
///
/// With flags.trained_backbone off, G is a ResNet translator like F. The
/// segmentor checkpoint is required when seg or trained_backbone is on; G's
/// backbone then takes its configuration from the checkpoint.
class LcganTrainer {
 public:
  LcganTrainer(const synth::Dataset& x, const synth::Dataset& y, const nn::Checkpoint* segmentor,
               const RunConfig& config);

  /// Runs one iteration and returns its loss terms. Throws TrainingDiverged
  /// when a term is not finite, before the update that term would drive.
  loss::LossBreakdown step();

  std::int64_t iteration() const { return iteration_; }
  double current_lr() const { return schedule_.at(iteration_); }

  nn::Generator<float>& g() { return *g_; }
  nn::Generator<float>& f() { return *f_; }
  const nn::Generator<float>& f() const { return *f_; }
  nn::PatchDiscriminator<float>& d_x() { return d_x_; }
  nn::PatchDiscriminator<float>& d_y() { return d_y_; }
  const nn::Segmentor<float>* segmentor() const { return s_.get(); }

  /// Checksums of the frozen sets: "S" and, with a trained backbone, "G.enc".
  std::map<std::string, std::uint64_t> frozen_checksums() const;
  /// Throws std::logic_error when a frozen set changed since construction.
  void verify_frozen() const;

  /// Architectures, parameters under G., F., D_X., D_Y., optimizer state and
  /// run metadata.
  nn::Checkpoint checkpoint() const;

 private:
  const Tensor<float>& pseudo_target(std::size_t index);

  RunConfig config_;
  std::vector<Tensor<float>> x_, x_mask_, y_;
  std::vector<Tensor<float>> s_y_cache_;
  std::unique_ptr<nn::Segmentor<float>> s_;
  std::unique_ptr<nn::Generator<float>> g_, f_;
  nn::PatchDiscriminator<float> d_x_, d_y_;
  Adam<float> opt_gf_, opt_dx_, opt_dy_;
  ImageBuffer<float> buffer_x_, buffer_y_;
  Sampler sample_x_, sample_y_;
  LrSchedule schedule_;
  std::int64_t iteration_ = 0;
  std::map<std::string, std::uint64_t> frozen_;
};

struct LcganLogRow {
  std::int64_t step = 0;
  double lr = 0;
  loss::LossBreakdown terms;
};

struct LcganResult {
  nn::Checkpoint final;
  std::vector<LcganLogRow> log;
  std::map<std::string, std::uint64_t> frozen_start, frozen_end;
};

/// Runs config.run.iterations steps. With a non-empty `out_dir` it writes
/// log.csv every run.log_every steps and the checkpoint/ directory every
/// run.checkpoint_every steps and at the end.
LcganResult train_lcgan(const synth::Dataset& x, const synth::Dataset& y, const nn::Checkpoint* segmentor,
                        const RunConfig& config, const std::filesystem::path& out_dir = {});

}  // namespace lcgan::train
