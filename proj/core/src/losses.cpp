#include "s2r/losses.hpp"

#include <cmath>
#include <string>

#include "s2r/errors.hpp"
#include "s2r/ssim.hpp"

namespace s2r {

void LossWeights::validate() const {
  auto need = [](double v, const char* field) {
    if (!(v >= 0.0)) {
      throw ConfigError(std::string(field) + " must be >= 0, got " +
                        std::to_string(v));
    }
  };
  need(lambda1, "lambda1");
  need(lambda2, "lambda2");
  need(lambda3, "lambda3");
  need(lambda4, "lambda4");
  need(lambda5, "lambda5");
}

ad::Var l1_node(ad::Tape& t, ad::Var a, ad::Var b) {
  return t.mean_all(t.abs_(t.sub(a, b)));
}

ad::Var adversarial_d_node(ad::Tape& t, ad::Var real_logits,
                           ad::Var fake_logits) {
  // -log sigmoid(x) == softplus(-x); -log(1 - sigmoid(x)) == softplus(x)
  const ad::Var real_term =
      t.mean_all(t.softplus(t.mul_scalar(real_logits, -1.0)));
  const ad::Var fake_term = t.mean_all(t.softplus(fake_logits));
  return t.add(real_term, fake_term);
}

ad::Var adversarial_g_node(ad::Tape& t, ad::Var fake_logits) {
  return t.mean_all(t.softplus(t.mul_scalar(fake_logits, -1.0)));
}

namespace {

ValidityMask defined_mask(const ImageTensor& disp) {
  ValidityMask m(disp.rows(), disp.cols(), false);
  for (int r = 0; r < disp.rows(); ++r) {
    for (int c = 0; c < disp.cols(); ++c) {
      m.set(r, c, std::isfinite(disp.at(0, r, c)));
    }
  }
  return m;
}

}  // namespace

ad::Var warp_loss_node(ad::Tape& t, ad::Var left_ab, ad::Var right_ab,
                       const ImageTensor& disp, int sign,
                       const LossWeights& w) {
  w.validate();
  const ad::Tensor& lv = left_ab.val();
  if (!lv.same_dims(right_ab.val())) {
    throw DimensionError("warp_loss: translated pair dims mismatch");
  }
  if (disp.channels() != 1 || disp.rows() != lv.h || disp.cols() != lv.w) {
    throw DimensionError("warp_loss: disparity dims mismatch");
  }
  ValidityMask warp_valid;
  const ad::Var warped = t.warp_horizontal(
      left_ab, ad::Tensor::from_image(disp), sign, &warp_valid);
  const ValidityMask support = warp_valid.intersect(defined_mask(disp));
  if (!support.any_true()) {
    throw EmptySupportError("warp_loss: no valid pixels (warp support does "
                            "not meet defined disparity)");
  }
  const ad::Var l1 = t.masked_mean(t.abs_(t.sub(right_ab, warped)), support);
  std::vector<std::pair<double, ad::Var>> terms{{w.lambda1, l1}};
  if (erode_to_windows(support, kSsimWindow).any_true()) {
    const ad::Var sim = ssim_index(t, right_ab, warped, support);
    terms.emplace_back(w.lambda2,
                       t.add_scalar(t.mul_scalar(sim, -1.0), 1.0));
  }
  return t.weighted_sum(terms);
}

namespace {

ad::Var lift(ad::Tape& t, const ImageTensor& img) {
  return t.input(ad::Tensor::from_image(img));
}

}  // namespace

double reconstruction_loss(const ImageTensor& x, const ImageTensor& recon) {
  if (!x.same_dims(recon)) {
    throw DimensionError("reconstruction_loss: dims mismatch");
  }
  ad::Tape t;
  t.set_grad_enabled(false);
  return l1_node(t, lift(t, x), lift(t, recon)).scalar();
}

double cycle_loss(const ImageTensor& x, const ImageTensor& cycled) {
  if (!x.same_dims(cycled)) {
    throw DimensionError("cycle_loss: dims mismatch");
  }
  ad::Tape t;
  t.set_grad_enabled(false);
  return l1_node(t, lift(t, x), lift(t, cycled)).scalar();
}

double adversarial_d(const ImageTensor& real_logits,
                     const ImageTensor& fake_logits) {
  ad::Tape t;
  t.set_grad_enabled(false);
  return adversarial_d_node(t, lift(t, real_logits), lift(t, fake_logits))
      .scalar();
}

double adversarial_g(const ImageTensor& fake_logits) {
  ad::Tape t;
  t.set_grad_enabled(false);
  return adversarial_g_node(t, lift(t, fake_logits)).scalar();
}

double warp_loss(const ImageTensor& left_ab, const ImageTensor& right_ab,
                 const ImageTensor& disp, int sign, const LossWeights& w) {
  ad::Tape t;
  t.set_grad_enabled(false);
  return warp_loss_node(t, lift(t, left_ab), lift(t, right_ab), disp, sign, w)
      .scalar();
}

namespace {

void check_finite(double v, const char* component) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string("non-finite loss component: ") + component);
  }
}

}  // namespace

double total_generator_loss(const LossBreakdown& parts, const LossWeights& w) {
  w.validate();
  check_finite(parts.rec_aa, "rec_aa");
  check_finite(parts.rec_bb, "rec_bb");
  check_finite(parts.cyc_aba, "cyc_aba");
  check_finite(parts.cyc_bab, "cyc_bab");
  check_finite(parts.adv_a, "adv_a");
  check_finite(parts.adv_b, "adv_b");
  check_finite(parts.warp, "warp");
  return w.lambda3 * (parts.rec_aa + parts.rec_bb) +
         w.lambda4 * (parts.cyc_aba + parts.cyc_bab) +
         w.lambda5 * (parts.adv_a + parts.adv_b) + parts.warp;
}

double total_discriminator_loss(double adv_d_a, double adv_d_b) {
  check_finite(adv_d_a, "adv_d_a");
  check_finite(adv_d_b, "adv_d_b");
  return adv_d_a + adv_d_b;
}

}  // namespace s2r
