#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "lcgan/networks/checkpoint.hpp"
#include "lcgan/networks/networks.hpp"
#include "lcgan/synthdata/synth.hpp"
#include "lcgan/training/config.hpp"

namespace lcgan::train {

/// A loss became NaN or infinite. Checkpoints written earlier are kept.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SegTrainOptions {
  nn::SegmentorConfig model;
  int epochs = 30;
  int batch = 4;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;
  std::filesystem::path log_path;  // CSV, skipped when empty
};

SegTrainOptions segmentor_options(const RunConfig& config);

struct SegEpochRecord {
  int epoch = 0;  // 1-based
  double lr = 0;
  double train_loss = 0;
  double val_dsc = 0;
  double val_iou = 0;
};

struct SegTrainResult {
  nn::Checkpoint best;  // "S." parameters, "adam.S." state
  int best_epoch = 0;
  double best_val_dsc = 0;
  std::vector<SegEpochRecord> history;
};

/// Pixel cross-entropy with Adam on images with masks. A seeded split of
/// validation_fraction of the images picks the best epoch by mDSC; without a
/// validation split the last epoch is returned. Throws std::invalid_argument
/// for an empty or unlabeled dataset and TrainingDiverged on a NaN loss.
SegTrainResult train_segmentor(const synth::Dataset& data, const SegTrainOptions& options);

/// Rebuilds the segmentor stored under "S." and its architecture record.
std::unique_ptr<nn::Segmentor<float>> load_segmentor(const nn::Checkpoint& checkpoint);

}  // namespace lcgan::train
