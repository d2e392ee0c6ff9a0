#include "lcgan/losses/losses.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "lcgan/diffcomp/ops.hpp"
#include "lcgan/imagecore/image.hpp"

namespace lcgan::loss {

void LossConfig::validate() const {
  if (scales < 0) throw std::invalid_argument("loss: scales must be non-negative");
  if (gamma.size() != static_cast<std::size_t>(scales) + 1) {
    throw std::invalid_argument("loss: expected " + std::to_string(scales + 1) + " gamma weights, got " +
                                std::to_string(gamma.size()));
  }
  double total = 0;
  for (double g : gamma) {
    if (g < 0) throw std::invalid_argument("loss: gamma weights must be non-negative");
    total += g;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("loss: gamma weights sum to " + std::to_string(total) + ", expected 1");
  }
  if (!(epsilon > 0)) throw std::invalid_argument("loss: epsilon must be positive");
}

std::string LossBreakdown::csv_header() {
  return "step,lr,gan_G,gan_F,d_X,d_Y,cyc,ssim,seg,total_generator,total_discriminator";
}

std::string LossBreakdown::csv_row(long step, double lr) const {
  std::ostringstream os;
  os << std::setprecision(17) << step << ',' << lr << ',' << gan_G << ',' << gan_F << ',' << d_X << ',' << d_Y
     << ',' << cyc << ',' << ssim << ',' << seg << ',' << total_generator << ',' << total_discriminator;
  return os.str();
}

LossBreakdown compose(LossBreakdown t, const LossConfig& c) {
  t.total_generator = t.gan_G + t.gan_F + c.lambda_cycle * t.cyc + c.lambda_ssim * t.ssim + c.lambda_seg * t.seg;
  t.total_discriminator = t.d_X + t.d_Y;
  return t;
}

template <typename T>
Tensor<T> zncc(const Tensor<T>& a, const Tensor<T>& b, double epsilon) {
  if (a.shape() != b.shape()) {
    throw ShapeError("zncc: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) + " differ");
  }
  const auto m = a.numel();
  if (m < 2) throw std::invalid_argument("zncc: need at least 2 pixels, got " + std::to_string(m));
  const T norm = T(1) / static_cast<T>(m - 1);
  const T eps = static_cast<T>(epsilon);
  const auto da = ops::sub(a, ops::mean(a));
  const auto db = ops::sub(b, ops::mean(b));
  const auto cov = ops::mul_scalar(ops::sum(ops::mul(da, db)), norm);
  const auto var_a = ops::mul_scalar(ops::sum(ops::square(da)), norm);
  const auto var_b = ops::mul_scalar(ops::sum(ops::square(db)), norm);
  const auto sigma_ab = ops::sqrt(ops::mul(var_a, var_b));
  return ops::div(ops::add_scalar(cov, eps), ops::add_scalar(sigma_ab, eps));
}

namespace {

// [-1, 1] model coding back to [0, 1] luminance.
template <typename T>
Tensor<T> unit_luminance(const Tensor<T>& image) {
  return ops::add_scalar(ops::mul_scalar(img::luminance(image), T(0.5)), T(0.5));
}

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()) + " differ");
  }
}

}  // namespace

template <typename T>
Tensor<T> ssim_bracket(const Tensor<T>& real, const Tensor<T>& fake, const LossConfig& config) {
  require_same(real, fake, "ssim_loss");
  if (real.rank() == 4 && (real.dim(2) >> config.scales) * (real.dim(3) >> config.scales) < 2) {
    throw std::invalid_argument("ssim_loss: " + std::to_string(real.dim(3)) + "x" + std::to_string(real.dim(2)) +
                                " leaves fewer than 2 pixels at pyramid level " + std::to_string(config.scales));
  }
  const auto real_pyr = img::build_pyramid(unit_luminance(real), config.scales);
  const auto fake_pyr = img::build_pyramid(unit_luminance(fake), config.scales);
  const auto batch = real.dim(0);
  Tensor<T> total;
  for (std::int64_t n = 0; n < batch; ++n) {
    Tensor<T> weighted;
    for (int i = 0; i <= config.scales; ++i) {
      if (config.gamma[i] == 0.0) continue;
      const auto r = batch == 1 ? real_pyr[i] : ops::batch_item(real_pyr[i], n);
      const auto f = batch == 1 ? fake_pyr[i] : ops::batch_item(fake_pyr[i], n);
      auto term = ops::mul_scalar(zncc(r, f, config.epsilon), static_cast<T>(config.gamma[i]));
      weighted = weighted.defined() ? ops::add(weighted, term) : term;
    }
    auto bracket = weighted.defined() ? ops::add_scalar(ops::neg(weighted), T(1)) : Tensor<T>::scalar(T(1));
    total = total.defined() ? ops::add(total, bracket) : bracket;
  }
  return ops::mul_scalar(total, T(1) / static_cast<T>(batch));
}

template <typename T>
Tensor<T> ssim_loss(const Tensor<T>& x, const Tensor<T>& g_x, const Tensor<T>& y, const Tensor<T>& f_y,
                    const LossConfig& config) {
  return ops::add(ssim_bracket(x, g_x, config), ssim_bracket(y, f_y, config));
}

template <typename T>
Tensor<T> cycle_loss(const Tensor<T>& x, const Tensor<T>& f_g_x, const Tensor<T>& y, const Tensor<T>& g_f_y) {
  require_same(x, f_g_x, "cycle_loss");
  require_same(y, g_f_y, "cycle_loss");
  return ops::add(ops::mean(ops::abs(ops::sub(f_g_x, x))), ops::mean(ops::abs(ops::sub(g_f_y, y))));
}

template <typename T>
Tensor<T> generator_adversarial(const Tensor<T>& d_fake) {
  return ops::mean(ops::square(ops::add_scalar(d_fake, T(-1))));
}

template <typename T>
Tensor<T> discriminator_adversarial(const Tensor<T>& d_real, const Tensor<T>& d_fake) {
  return ops::add(ops::mean(ops::square(ops::add_scalar(d_real, T(-1)))), ops::mean(ops::square(d_fake)));
}

template <typename T>
GanTerms<T> gan_losses(const Tensor<T>& d_real, const Tensor<T>& d_fake) {
  return {generator_adversarial(d_fake), discriminator_adversarial(d_real, d_fake)};
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const Tensor<T>& target_mask) {
  if (logits.rank() != 4 || logits.dim(1) != 2 || target_mask.rank() != 4 || target_mask.dim(1) != 1 ||
      logits.dim(0) != target_mask.dim(0) || logits.dim(2) != target_mask.dim(2) ||
      logits.dim(3) != target_mask.dim(3)) {
    throw ShapeError("cross_entropy: logits " + shape_string(logits.shape()) + " do not match mask " +
                     shape_string(target_mask.shape()));
  }
  const auto n = logits.dim(0), plane = logits.dim(2) * logits.dim(3);
  const auto t = target_mask.data();
  std::vector<T> onehot(static_cast<std::size_t>(n * 2 * plane), T(0));
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t i = 0; i < plane; ++i) {
      const int cls = t[b * plane + i] > T(0.5) ? 1 : 0;
      onehot[(b * 2 + cls) * plane + i] = T(1);
    }
  const Tensor<T> selector(logits.shape(), std::move(onehot));
  const auto picked = ops::sum(ops::mul(ops::log_softmax_channels(logits), selector));
  return ops::mul_scalar(picked, T(-1) / static_cast<T>(n * plane));
}

template <typename T>
Tensor<T> pseudo_label(const Tensor<T>& logits) {
  if (logits.rank() != 4 || logits.dim(1) != 2) {
    throw ShapeError("pseudo_label: expected [N, 2, H, W], got " + shape_string(logits.shape()));
  }
  const auto n = logits.dim(0), plane = logits.dim(2) * logits.dim(3);
  const auto v = logits.data();
  std::vector<T> out(static_cast<std::size_t>(n * plane));
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t i = 0; i < plane; ++i)
      out[b * plane + i] = v[(b * 2 + 1) * plane + i] > v[b * 2 * plane + i] ? T(1) : T(0);
  return Tensor<T>(Shape{n, 1, logits.dim(2), logits.dim(3)}, std::move(out));
}

template <typename T>
Tensor<T> seg_consistency_loss(const Tensor<T>& x_mask, const Tensor<T>& s_f_g_x, const Tensor<T>& s_y,
                               const Tensor<T>& s_g_f_y) {
  if (s_y.shape() != s_g_f_y.shape()) {
    throw ShapeError("seg_consistency_loss: logits " + shape_string(s_y.shape()) + " and " +
                     shape_string(s_g_f_y.shape()) + " differ");
  }
  return ops::add(cross_entropy(s_f_g_x, x_mask), cross_entropy(s_g_f_y, pseudo_label(s_y)));
}

template <typename T>
Objective<T> total_objective(const ObjectiveInputs<T>& in, const LossConfig& config, TermSwitches switches) {
  LossBreakdown parts;
  const auto gan_g = generator_adversarial(in.d_y_fake);
  const auto gan_f = generator_adversarial(in.d_x_fake);
  const auto cyc = cycle_loss(in.x, in.f_g_x, in.y, in.g_f_y);
  auto total = ops::add(ops::add(gan_g, gan_f), ops::mul_scalar(cyc, static_cast<T>(config.lambda_cycle)));
  parts.gan_G = gan_g.item();
  parts.gan_F = gan_f.item();
  parts.cyc = cyc.item();
  if (switches.ssim) {
    const auto ssim = ssim_loss(in.x, in.g_x, in.y, in.f_y, config);
    total = ops::add(total, ops::mul_scalar(ssim, static_cast<T>(config.lambda_ssim)));
    parts.ssim = ssim.item();
  }
  if (switches.seg) {
    const auto seg = seg_consistency_loss(in.x_mask, in.s_f_g_x, in.s_y, in.s_g_f_y);
    total = ops::add(total, ops::mul_scalar(seg, static_cast<T>(config.lambda_seg)));
    parts.seg = seg.item();
  }
  if (!in.d_y_real.defined() || !in.d_x_real.defined()) return {total, {}, compose(parts, config)};
  const auto d_y = discriminator_adversarial(in.d_y_real, in.d_y_fake.detach());
  const auto d_x = discriminator_adversarial(in.d_x_real, in.d_x_fake.detach());
  parts.d_Y = d_y.item();
  parts.d_X = d_x.item();
  Objective<T> out{total, ops::add(d_x, d_y), compose(parts, config)};
  return out;
}

#define LCGAN_INSTANTIATE(T)                                                                                \
  template Tensor<T> zncc(const Tensor<T>&, const Tensor<T>&, double);                                     \
  template Tensor<T> ssim_bracket(const Tensor<T>&, const Tensor<T>&, const LossConfig&);                  \
  template Tensor<T> ssim_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                               const LossConfig&);                                                          \
  template Tensor<T> cycle_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);   \
  template GanTerms<T> gan_losses(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> generator_adversarial(const Tensor<T>&);                                               \
  template Tensor<T> discriminator_adversarial(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> cross_entropy(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> pseudo_label(const Tensor<T>&);                                                        \
  template Tensor<T> seg_consistency_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,            \
                                          const Tensor<T>&);                                                \
  template Objective<T> total_objective(const ObjectiveInputs<T>&, const LossConfig&, TermSwitches);

LCGAN_INSTANTIATE(float)
LCGAN_INSTANTIATE(double)

}  // namespace lcgan::loss
