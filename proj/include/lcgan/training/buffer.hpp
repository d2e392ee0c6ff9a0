#pragma once

#include <cstdint>
#include <vector>

#include "lcgan/diffcomp/random.hpp"
#include "lcgan/diffcomp/tensor.hpp"

namespace lcgan::train {

/// History of generated images shown to a discriminator. Until it is full a
/// query stores and returns the newest fake; afterwards, with probability
/// 1/2, the newest fake replaces a random stored one and the stored one is
/// returned. Capacity 0 passes every fake straight through.
template <typename T>
class ImageBuffer {
 public:
  explicit ImageBuffer(std::size_t capacity = 50, std::uint64_t seed = 0) : capacity_(capacity), rng_(seed) {}

  Tensor<T> query(const Tensor<T>& fake) {
    auto newest = fake.detach();
    if (capacity_ == 0) return newest;
    if (stored_.size() < capacity_) {
      stored_.push_back(newest);
      return newest;
    }
    if (rng_.uniform() < 0.5) {
      const auto slot = static_cast<std::size_t>(rng_.below(stored_.size()));
      auto old = stored_[slot];
      stored_[slot] = newest;
      return old;
    }
    return newest;
  }

  std::size_t size() const { return stored_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  Rng rng_;
  std::vector<Tensor<T>> stored_;
};

}  // namespace lcgan::train
