#pragma once

#include <string>

#include "lcgan/diffcomp/tensor.hpp"

namespace lcgan::detail {

template <typename T>
void require_rank4(const Tensor<T>& t, const char* op) {
  if (t.rank() != 4) {
    throw ShapeError(std::string(op) + ": expected an NCHW tensor, got " + shape_string(t.shape()));
  }
}

}  // namespace lcgan::detail
