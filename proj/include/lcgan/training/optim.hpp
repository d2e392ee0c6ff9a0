#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcgan/networks/checkpoint.hpp"
#include "lcgan/networks/parameters.hpp"

namespace lcgan::train {

/// lr0 up to step total/2, then linear to 0 at step total.
class LrSchedule {
 public:
  LrSchedule(double lr0, std::int64_t total);
  double at(std::int64_t step) const;
  double initial() const { return lr0_; }
  std::int64_t total() const { return total_; }

 private:
  double lr0_;
  std::int64_t total_;
};

struct AdamConfig {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over the trainable entries of one or more parameter stores, captured
/// when added. Parameters without a gradient buffer are skipped, and a
/// skipped step does not advance their bias correction.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}
  void add(const nn::ParameterStore<T>& store, const std::string& prefix = "");
  void add(const std::string& name, const Tensor<T>& param);

  void step(double lr);
  void zero_grad();

  std::size_t size() const { return slots_.size(); }
  std::int64_t steps(std::size_t slot) const { return slots_[slot].steps; }

  /// Moments as "<prefix>m.<name>" / "<prefix>v.<name>", step counts under
  /// metadata["optimizer"][prefix].
  void append_state(nn::Checkpoint& checkpoint, const std::string& prefix) const;
  void restore_state(const nn::Checkpoint& checkpoint, const std::string& prefix);

 private:
  struct Slot {
    std::string name;
    Tensor<T> param;
    std::vector<T> m, v;
    std::int64_t steps = 0;
  };
  AdamConfig config_;
  std::vector<Slot> slots_;
};

}  // namespace lcgan::train
