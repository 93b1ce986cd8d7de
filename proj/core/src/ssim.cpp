#include "s2r/ssim.hpp"

#include <vector>

#include "s2r/errors.hpp"

namespace s2r {

ValidityMask erode_to_windows(const ValidityMask& mask, int win) {
  const int oh = mask.rows() - win + 1;
  const int ow = mask.cols() - win + 1;
  if (oh < 1 || ow < 1) return ValidityMask(0, 0);
  // integral image of the mask; window valid iff its sum is win*win
  const int rows = mask.rows(), cols = mask.cols();
  std::vector<int> integral(static_cast<size_t>(rows + 1) * (cols + 1), 0);
  auto I = [&](int r, int c) -> int& {
    return integral[static_cast<size_t>(r) * (cols + 1) + c];
  };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      I(r + 1, c + 1) =
          (mask.at(r, c) ? 1 : 0) + I(r, c + 1) + I(r + 1, c) - I(r, c);
    }
  }
  ValidityMask out(oh, ow, false);
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      const int s = I(r + win, c + win) - I(r, c + win) - I(r + win, c) +
                    I(r, c);
      out.set(r, c, s == win * win);
    }
  }
  return out;
}

ad::Var ssim_index(ad::Tape& t, ad::Var a, ad::Var b,
                   const ValidityMask& mask) {
  const ad::Tensor& av = a.val();
  const ad::Tensor& bv = b.val();
  if (!av.same_dims(bv)) throw DimensionError("ssim_index: dims mismatch");
  if (mask.rows() != av.h || mask.cols() != av.w) {
    throw DimensionError("ssim_index: mask dims mismatch");
  }
  const ValidityMask windows = erode_to_windows(mask, kSsimWindow);
  if (windows.count_true() == 0) {
    throw EmptySupportError("ssim_index: no admissible window");
  }
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  const ad::Tensor w = ad::gaussian_window(kSsimWindow, kSsimSigma);

  // remap Signed [-1,1] to [0,1] so the constants sit on dynamic range 1
  const ad::Var a01 = t.mul_scalar(t.add_scalar(a, 1.0), 0.5);
  const ad::Var b01 = t.mul_scalar(t.add_scalar(b, 1.0), 0.5);

  const ad::Var mu_a = t.window_filter(a01, w);
  const ad::Var mu_b = t.window_filter(b01, w);
  const ad::Var mu_aa = t.mul(mu_a, mu_a);
  const ad::Var mu_bb = t.mul(mu_b, mu_b);
  const ad::Var mu_ab = t.mul(mu_a, mu_b);
  const ad::Var var_a = t.sub(t.window_filter(t.mul(a01, a01), w), mu_aa);
  const ad::Var var_b = t.sub(t.window_filter(t.mul(b01, b01), w), mu_bb);
  const ad::Var cov = t.sub(t.window_filter(t.mul(a01, b01), w), mu_ab);

  const ad::Var num = t.mul(t.add_scalar(t.mul_scalar(mu_ab, 2.0), kC1),
                            t.add_scalar(t.mul_scalar(cov, 2.0), kC2));
  const ad::Var den = t.mul(t.add_scalar(t.add(mu_aa, mu_bb), kC1),
                            t.add_scalar(t.add(var_a, var_b), kC2));
  return t.masked_mean(t.div(num, den), windows);
}

}  // namespace s2r
