#pragma once

#include <string>
#include <vector>

#include "lcgan/diffcomp/tensor.hpp"

// Terms of the LC-GAN objective. Image arguments are [N, 3, H, W] tensors in
// the [-1, 1] model coding; logits are [N, 2, H, W]; masks are [N, 1, H, W]
// tensors of 0/1.
namespace lcgan::loss {

struct LossConfig {
  double lambda_cycle = 5.0;
  double lambda_ssim = 1.0;
  double lambda_seg = 2.0;
  // Pyramid depth n_s; gamma holds n_s + 1 weights for levels 0..n_s.
  int scales = 4;
  std::vector<double> gamma{0.0, 0.05, 0.33, 0.35, 0.27};
  // ZNCC stabilizer, in units of [0, 1] luminance.
  double epsilon = 1e-4;

  /// Throws std::invalid_argument when gamma is not a convex combination of
  /// the right length or epsilon is not positive.
  void validate() const;
};

/// Scalar values of every term of one training step.
struct LossBreakdown {
  double gan_G = 0, gan_F = 0, d_X = 0, d_Y = 0;
  double cyc = 0, ssim = 0, seg = 0;
  double total_generator = 0, total_discriminator = 0;

  static std::string csv_header();
  /// "step,lr,<every term>" with full round-trip precision.
  std::string csv_row(long step, double lr) const;
};

/// Fills the two totals from the individual terms.
LossBreakdown compose(LossBreakdown terms, const LossConfig& config);

/// Zero-normalized cross-correlation (s_ab + eps) / (s_a s_b + eps) with
/// 1/(m-1) normalization throughout. Both tensors are read as flat signals.
template <typename T>
Tensor<T> zncc(const Tensor<T>& a, const Tensor<T>& b, double epsilon);

/// One bracket of the structural term: 1 - sum_i gamma_i C(real_i, fake_i)
/// over luminance pyramids, averaged over the batch.
template <typename T>
Tensor<T> ssim_bracket(const Tensor<T>& real, const Tensor<T>& fake, const LossConfig& config);

template <typename T>
Tensor<T> ssim_loss(const Tensor<T>& x, const Tensor<T>& g_x, const Tensor<T>& y, const Tensor<T>& f_y,
                    const LossConfig& config);

/// mean |F(G(x)) - x| + mean |G(F(y)) - y|.
template <typename T>
Tensor<T> cycle_loss(const Tensor<T>& x, const Tensor<T>& f_g_x, const Tensor<T>& y, const Tensor<T>& g_f_y);

template <typename T>
struct GanTerms {
  Tensor<T> generator;      // mean (D(fake) - 1)^2
  Tensor<T> discriminator;  // mean (D(real) - 1)^2 + mean D(fake)^2
};

/// Least-squares adversarial terms from discriminator patch maps. The caller
/// decides what the fake map is attached to: for the discriminator update it
/// must come from a detached fake image.
template <typename T>
GanTerms<T> gan_losses(const Tensor<T>& d_real, const Tensor<T>& d_fake);
template <typename T>
Tensor<T> generator_adversarial(const Tensor<T>& d_fake);
template <typename T>
Tensor<T> discriminator_adversarial(const Tensor<T>& d_real, const Tensor<T>& d_fake);

/// Mean over pixels of -log softmax(logits)[target].
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const Tensor<T>& target_mask);

/// Hard argmax labels of [N, 2, H, W] logits as a gradient-free mask tensor.
template <typename T>
Tensor<T> pseudo_label(const Tensor<T>& logits);

/// CE(x_m, S(F(G(x)))) + CE(argmax S(y), S(G(F(y)))).
template <typename T>
Tensor<T> seg_consistency_loss(const Tensor<T>& x_mask, const Tensor<T>& s_f_g_x, const Tensor<T>& s_y,
                               const Tensor<T>& s_g_f_y);

/// Which optional terms enter the generator objective.
struct TermSwitches {
  bool ssim = true;
  bool seg = true;
};

template <typename T>
struct ObjectiveInputs {
  Tensor<T> x, x_mask, y;
  Tensor<T> g_x, f_y, f_g_x, g_f_y;
  Tensor<T> d_y_real, d_y_fake;  // D_Y(y), D_Y(G(x))
  Tensor<T> d_x_real, d_x_fake;  // D_X(x), D_X(F(y))
  Tensor<T> s_f_g_x, s_y, s_g_f_y;  // segmentor logits; unused when seg is off
};

template <typename T>
struct Objective {
  Tensor<T> generator_total;
  Tensor<T> discriminator_total;
  LossBreakdown breakdown;
};

/// Full objective: the generators minimize
///   gan_G + gan_F + l1 cyc + l2 ssim + l3 seg,
/// the discriminators minimize their least-squares terms d_X + d_Y. Without
/// real maps the discriminator total is left undefined and d_X, d_Y are 0.
template <typename T>
Objective<T> total_objective(const ObjectiveInputs<T>& in, const LossConfig& config, TermSwitches switches = {});

}  // namespace lcgan::loss
