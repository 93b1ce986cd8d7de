#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "s2r/tensor.hpp"

namespace s2r {

// Pure float32 image kernels. Every function here is deterministic and
// side-effect free; the differentiable counterparts used during training
// live on the ad::Tape and are tested for agreement against these.

// Luminance 0.299 R + 0.587 G + 0.114 B. Requires exactly 3 channels;
// the output keeps the input's value domain.
ImageTensor to_grayscale(const ImageTensor& img);

// Gradient magnitude from the standard 3x3 Sobel masks with
// replicate-border padding, rescaled per image so the maximum maps to 1
// (an all-equal image maps to all zeros). Accepts 1- or 3-channel input
// (3-channel is grayscaled first); requires rows, cols >= 3. Output is
// single-channel, Unit domain, same spatial dims.
ImageTensor sobel_edges(const ImageTensor& img);

// out(c,v,u) = bilinear sample of src at (v, u + sign*disp(v,u)).
// Samples whose source column falls outside [0, cols-1] — including
// NaN-disparity pixels — produce 0 with mask=false. sign is +1 or -1.
std::pair<ImageTensor, ValidityMask> warp_horizontal(const ImageTensor& src,
                                                     const ImageTensor& disp,
                                                     int sign);

// Mean windowed SSIM between two Signed images (remapped to [0,1]
// internally, dynamic range 1): 11x11 Gaussian window, sigma 1.5,
// C1=0.01^2, C2=0.03^2. Only windows lying fully inside the image with
// every covered pixel mask-true contribute; the result is averaged over
// channels. Throws EmptySupportError when no window qualifies.
double ssim(const ImageTensor& a, const ImageTensor& b,
            const ValidityMask& mask);

// Standard align-corners=false bilinear resampling. Values are clamped
// back into the input's domain range afterwards.
ImageTensor resize_bilinear(const ImageTensor& img, int rows, int cols);

// Disparity-aware resize: nearest-neighbor resampling (no blending across
// depth discontinuities) with every value scaled by cols'/cols so the
// offsets keep pointing at the same scene points. NaN stays NaN.
ImageTensor resize_disparity(const ImageTensor& disp, int rows, int cols);

// Copies a single-channel tensor into n identical channels.
ImageTensor replicate_channels(const ImageTensor& img, int channels);

// 8-bit <-> Signed conversion: byte b maps to 2*(b/255) - 1; the inverse
// rounds half away from zero and clamps. denormalize(normalize(b)) == b
// for every byte value. Buffers are interleaved (pixel-major), the
// layout the image codecs exchange.
ImageTensor normalize_bytes(const std::vector<uint8_t>& interleaved,
                            int channels, int rows, int cols);
std::vector<uint8_t> denormalize_bytes(const ImageTensor& img);

// Unit-domain tensor to interleaved 8 bit: round(v*255), clamped.
std::vector<uint8_t> unit_to_bytes(const ImageTensor& img);

}  // namespace s2r
