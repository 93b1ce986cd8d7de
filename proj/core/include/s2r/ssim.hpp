#pragma once

#include "s2r/ad.hpp"
#include "s2r/tensor.hpp"

namespace s2r {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

// Window admission rule shared by the metric and the training loss: a
// window contributes iff it lies fully inside the image and every pixel
// it covers is mask-true. Returns the (rows-win+1) x (cols-win+1) mask of
// admissible window positions; zero-sized when the image is smaller than
// the window.
ValidityMask erode_to_windows(const ValidityMask& mask, int win);

// Differentiable mean windowed SSIM of two Signed images on tape `t`
// (11x11 Gaussian window, sigma 1.5, C1=0.01^2, C2=0.03^2 after the
// internal [-1,1] -> [0,1] remap). Gradients flow into both images.
// Throws EmptySupportError when no window is admissible.
ad::Var ssim_index(ad::Tape& t, ad::Var a, ad::Var b,
                   const ValidityMask& mask);

}  // namespace s2r
