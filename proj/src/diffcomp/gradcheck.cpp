#include "lcgan/diffcomp/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace lcgan {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

GradCheckReport grad_check(const std::function<Tensor<double>()>& f, std::vector<NamedTensor> params,
                           double tolerance, GradCheckOptions options) {
  for (auto& p : params) p.tensor.zero_grad();
  f().backward();

  GradCheckReport report;
  std::mt19937_64 rng(options.seed);
  for (auto& p : params) {
    const auto n = static_cast<std::size_t>(p.tensor.numel());
    std::vector<double> analytic(n, 0.0);
    if (p.tensor.has_grad()) std::copy(p.tensor.grad().begin(), p.tensor.grad().end(), analytic.begin());

    std::vector<std::size_t> entries(n);
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (options.max_entries_per_param > 0 && n > static_cast<std::size_t>(options.max_entries_per_param)) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(static_cast<std::size_t>(options.max_entries_per_param));
      std::sort(entries.begin(), entries.end());
    }

    double worst = 0.0;
    auto values = p.tensor.mutable_data();
    for (auto i : entries) {
      const double saved = values[i];
      values[i] = saved + options.step;
      const double up = f().item();
      values[i] = saved - options.step;
      const double down = f().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double err = relative_error(analytic[i], numeric);
      if (std::isnan(err)) {
        worst = std::numeric_limits<double>::infinity();
      } else {
        worst = std::max(worst, err);
      }
      ++report.entries_checked;
    }
    report.per_parameter_errors[p.name] = worst;
    report.max_relative_error = std::max(report.max_relative_error, worst);
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

}  // namespace lcgan
