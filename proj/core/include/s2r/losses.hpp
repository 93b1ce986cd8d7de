#pragma once

#include "s2r/ad.hpp"
#include "s2r/tensor.hpp"

namespace s2r {

// Objective weights. lambda1/lambda2 weight the warp loss's L1 and SSIM
// terms internally; lambda3..5 weight the reconstruction, cycle, and
// adversarial blocks of the total generator objective.
struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 0.8;
  double lambda4 = 10.0;
  double lambda5 = 10.0;

  void validate() const;  // all weights >= 0
};

// Per-step scalars. adv_a/adv_b are the generator-side adversarial terms;
// total_d is the sum of both discriminators' losses from the D update.
struct LossBreakdown {
  double rec_aa = 0, rec_bb = 0;
  double cyc_aba = 0, cyc_bab = 0;
  double adv_a = 0, adv_b = 0;
  double warp = 0;
  double total_g = 0, total_d = 0;
};

// ---- differentiable builders (training path) ----------------------------

// Mean absolute difference over all elements.
ad::Var l1_node(ad::Tape& t, ad::Var a, ad::Var b);

// Logistic GAN losses on raw logits maps, realized with softplus for
// stability: D side mean(softplus(-real)) + mean(softplus(fake)); G side
// the non-saturating mean(softplus(-fake)).
ad::Var adversarial_d_node(ad::Tape& t, ad::Var real_logits,
                           ad::Var fake_logits);
ad::Var adversarial_g_node(ad::Tape& t, ad::Var fake_logits);

// Warp-consistency objective on a translated pair: warps left_ab by the
// ground-truth disparity and, on the warp-valid ∩ disparity-defined
// support, forms lambda1 * L1(right_ab, warped) + lambda2 * (1 - SSIM).
// NaN disparity pixels are excluded. The SSIM term requires at least one
// admissible 11x11 window; when the support is too small for any window
// the term is dropped. Empty support for the L1 term is an error.
ad::Var warp_loss_node(ad::Tape& t, ad::Var left_ab, ad::Var right_ab,
                       const ImageTensor& disp, int sign,
                       const LossWeights& w);

// ---- scalar conveniences (metrics, tests, eval) --------------------------

double reconstruction_loss(const ImageTensor& x, const ImageTensor& recon);
double cycle_loss(const ImageTensor& x, const ImageTensor& cycled);
double adversarial_d(const ImageTensor& real_logits,
                     const ImageTensor& fake_logits);
double adversarial_g(const ImageTensor& fake_logits);
double warp_loss(const ImageTensor& left_ab, const ImageTensor& right_ab,
                 const ImageTensor& disp, int sign, const LossWeights& w);

// Weighted composition: lambda3*(rec_aa+rec_bb) + lambda4*(cyc_aba+cyc_bab)
// + lambda5*(adv_a+adv_b) + warp. Throws NumericError naming the first
// non-finite component.
double total_generator_loss(const LossBreakdown& parts, const LossWeights& w);
double total_discriminator_loss(double adv_d_a, double adv_d_b);

}  // namespace s2r
