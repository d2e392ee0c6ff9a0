#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lcgan/diffcomp/tensor.hpp"

namespace lcgan {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::map<std::string, double> per_parameter_errors;
  bool passed = false;
  std::int64_t entries_checked = 0;
};

struct NamedTensor {
  std::string name;
  Tensor<double> tensor;
};

struct GradCheckOptions {
  double step = 1e-5;
  // Entries probed per parameter; 0 probes every entry. Sampled entries are
  // drawn deterministically from `seed`.
  std::int64_t max_entries_per_param = 0;
  std::uint64_t seed = 0;
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences. Relative error per entry is |a - n| / max(|a|, |n|, 1e-8).
/// Existing gradients on the parameters are cleared first; failures are
/// reported, never thrown.
GradCheckReport grad_check(const std::function<Tensor<double>()>& f, std::vector<NamedTensor> params,
                           double tolerance, GradCheckOptions options = {});

double relative_error(double analytic, double numeric);

}  // namespace lcgan
