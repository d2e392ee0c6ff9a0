#include "lcgan/losses/gradient_checks.hpp"

#include "lcgan/diffcomp/ops.hpp"
#include "lcgan/diffcomp/random.hpp"

namespace lcgan::loss {

namespace {

using D = Tensor<double>;

D uniform(Rng& rng, Shape shape, double lo, double hi, bool requires_grad = false) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& e : v) e = rng.uniform(lo, hi);
  return D(std::move(shape), std::move(v), requires_grad);
}

D mask(Rng& rng, Shape shape) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& e : v) e = rng.uniform() < 0.3 ? 1.0 : 0.0;
  return D(std::move(shape), std::move(v));
}

}  // namespace

std::vector<LossGradientCheck> check_loss_gradients(std::uint64_t seed, const LossGradientOptions& options) {
  Rng rng(seed);
  const auto s = options.image_size;
  const auto p = std::max<std::int64_t>(1, s / 8);  // patch map side
  const Shape image{1, 3, s, s};
  const auto& cfg = options.config;
  GradCheckOptions gc;
  gc.max_entries_per_param = options.entries_per_param;
  gc.seed = seed;
  std::vector<LossGradientCheck> out;
  auto run = [&](const std::string& name, const std::function<D()>& f, std::vector<NamedTensor> params) {
    out.push_back({name, seed, grad_check(f, std::move(params), options.tolerance, gc)});
  };

  const auto x = uniform(rng, image, -0.9, 0.9);
  const auto y = uniform(rng, image, -0.9, 0.9);
  const auto g_x = uniform(rng, image, -0.9, 0.9, true);
  const auto f_y = uniform(rng, image, -0.9, 0.9, true);
  const auto d_real = uniform(rng, {1, 1, p, p}, -1, 1.5, true);
  const auto d_fake = uniform(rng, {1, 1, p, p}, -1, 1.5, true);
  run("adversarial_G", [&] { return generator_adversarial(d_fake); }, {{"D(fake)", d_fake}});
  run("adversarial_D", [&] { return discriminator_adversarial(d_real, d_fake); },
      {{"D(real)", d_real}, {"D(fake)", d_fake}});
  run("cycle", [&] { return cycle_loss(x, g_x, y, f_y); }, {{"F(G(x))", g_x}, {"G(F(y))", f_y}});
  run("ssim", [&] { return ssim_loss(x, g_x, y, f_y, cfg); }, {{"G(x)", g_x}, {"F(y)", f_y}});

  const auto x_mask = mask(rng, {1, 1, s, s});
  const auto s_fgx = uniform(rng, {1, 2, s, s}, -2, 2, true);
  const auto s_y = uniform(rng, {1, 2, s, s}, -2, 2);
  const auto s_gfy = uniform(rng, {1, 2, s, s}, -2, 2, true);
  run("seg", [&] { return seg_consistency_loss(x_mask, s_fgx, s_y, s_gfy); },
      {{"S(F(G(x)))", s_fgx}, {"S(G(F(y)))", s_gfy}});

  const auto g_w = uniform(rng, {3, 3, 1, 1}, -0.5, 0.5, true);
  const auto f_w = uniform(rng, {3, 3, 1, 1}, -0.5, 0.5, true);
  const auto d_w = uniform(rng, {1, 3, 3, 3}, -0.3, 0.3);
  const auto s_w = uniform(rng, {2, 3, 1, 1}, -1, 1);
  auto G = [&](const D& t) { return ops::tanh(ops::conv2d(t, g_w, D(), {})); };
  auto F = [&](const D& t) { return ops::tanh(ops::conv2d(t, f_w, D(), {})); };
  auto Dn = [&](const D& t) { return ops::conv2d(t, d_w, D(), {2, 1, 1}); };
  auto S = [&](const D& t) { return ops::conv2d(t, s_w, D(), {}); };
  run(
      "total",
      [&] {
        ObjectiveInputs<double> in;
        in.x = x;
        in.y = y;
        in.x_mask = x_mask;
        in.g_x = G(x);
        in.f_y = F(y);
        in.f_g_x = F(in.g_x);
        in.g_f_y = G(in.f_y);
        in.d_y_fake = Dn(in.g_x);
        in.d_x_fake = Dn(in.f_y);
        in.s_f_g_x = S(in.f_g_x);
        in.s_y = S(y);
        in.s_g_f_y = S(in.g_f_y);
        return total_objective(in, cfg).generator_total;
      },
      {{"G.w", g_w}, {"F.w", f_w}});
  return out;
}

}  // namespace lcgan::loss
