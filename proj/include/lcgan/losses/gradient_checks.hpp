#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcgan/diffcomp/gradcheck.hpp"
#include "lcgan/losses/losses.hpp"

// Finite-difference checks of every loss on random image-sized inputs.
namespace lcgan::loss {

struct LossGradientOptions {
  std::int64_t image_size = 64;
  std::int64_t entries_per_param = 48;  // 0 probes every entry
  double tolerance = 1e-4;
  LossConfig config;
};

struct LossGradientCheck {
  std::string loss;  // adversarial_G, adversarial_D, cycle, ssim, seg, total
  std::uint64_t seed = 0;
  GradCheckReport report;
};

/// One report per loss for inputs drawn from `seed`. The total objective is
/// differentiated through small 1x1 / 3x3 convolutional stand-ins for G, F,
/// D and S so every term depends on a parameter.
std::vector<LossGradientCheck> check_loss_gradients(std::uint64_t seed, const LossGradientOptions& options = {});

}  // namespace lcgan::loss
