#include "s2r/imageops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "s2r/ad.hpp"
#include "s2r/detail/warp_kernel.hpp"
#include "s2r/errors.hpp"
#include "s2r/ssim.hpp"

namespace s2r {

namespace {

void clamp_to_domain(ImageTensor& img) {
  float lo, hi;
  switch (img.domain()) {
    case ValueDomain::kSigned:
      lo = -1.0f;
      hi = 1.0f;
      break;
    case ValueDomain::kUnit:
      lo = 0.0f;
      hi = 1.0f;
      break;
    default:
      return;
  }
  for (float& v : img.vec()) v = std::clamp(v, lo, hi);
}

}  // namespace

ImageTensor to_grayscale(const ImageTensor& img) {
  if (img.channels() != 3) {
    throw DimensionError("to_grayscale: expected 3 channels, got " +
                         std::to_string(img.channels()));
  }
  ImageTensor out(1, img.rows(), img.cols(), img.domain());
  for (int r = 0; r < img.rows(); ++r) {
    for (int c = 0; c < img.cols(); ++c) {
      const double y = 0.299 * img.at(0, r, c) + 0.587 * img.at(1, r, c) +
                       0.114 * img.at(2, r, c);
      out.at(0, r, c) = static_cast<float>(y);
    }
  }
  clamp_to_domain(out);
  return out;
}

ImageTensor sobel_edges(const ImageTensor& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw DimensionError("sobel_edges: expected 1 or 3 channels, got " +
                         std::to_string(img.channels()));
  }
  if (img.rows() < 3 || img.cols() < 3) {
    throw DimensionError("sobel_edges: image must be at least 3x3, got " +
                         std::to_string(img.rows()) + "x" +
                         std::to_string(img.cols()));
  }
  const ImageTensor gray = img.channels() == 3 ? to_grayscale(img) : img;
  const int rows = gray.rows(), cols = gray.cols();
  auto px = [&](int r, int c) {  // replicate border
    r = std::clamp(r, 0, rows - 1);
    c = std::clamp(c, 0, cols - 1);
    return static_cast<double>(gray.at(0, r, c));
  };
  ImageTensor out(1, rows, cols, ValueDomain::kUnit);
  double max_mag = 0.0;
  std::vector<double> mag(static_cast<size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double gx = -px(r - 1, c - 1) + px(r - 1, c + 1)       //
                        - 2 * px(r, c - 1) + 2 * px(r, c + 1)      //
                        - px(r + 1, c - 1) + px(r + 1, c + 1);     //
      const double gy = -px(r - 1, c - 1) - 2 * px(r - 1, c)       //
                        - px(r - 1, c + 1)                         //
                        + px(r + 1, c - 1) + 2 * px(r + 1, c)      //
                        + px(r + 1, c + 1);                        //
      const double m = std::sqrt(gx * gx + gy * gy);
      mag[static_cast<size_t>(r) * cols + c] = m;
      max_mag = std::max(max_mag, m);
    }
  }
  if (max_mag > 0.0) {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        out.at(0, r, c) = static_cast<float>(
            mag[static_cast<size_t>(r) * cols + c] / max_mag);
      }
    }
  }
  clamp_to_domain(out);
  return out;
}

std::pair<ImageTensor, ValidityMask> warp_horizontal(const ImageTensor& src,
                                                     const ImageTensor& disp,
                                                     int sign) {
  if (disp.channels() != 1 || !disp.same_spatial(src)) {
    throw DimensionError("warp_horizontal: disparity must be 1-channel with "
                         "the source's spatial dims");
  }
  if (sign != 1 && sign != -1) {
    throw ContractError("warp_horizontal: sign must be +1 or -1");
  }
  ImageTensor out(src.channels(), src.rows(), src.cols(), src.domain());
  std::vector<uint8_t> mask(static_cast<size_t>(src.rows()) * src.cols());
  detail::warp_horizontal_rows<float>(src.data(), src.channels(), src.rows(),
                                      src.cols(), disp.data(), sign,
                                      out.data(), mask.data());
  ValidityMask vm(src.rows(), src.cols(), false);
  for (int r = 0; r < src.rows(); ++r) {
    for (int c = 0; c < src.cols(); ++c) {
      vm.set(r, c, mask[static_cast<size_t>(r) * src.cols() + c] != 0);
    }
  }
  return {std::move(out), std::move(vm)};
}

double ssim(const ImageTensor& a, const ImageTensor& b,
            const ValidityMask& mask) {
  if (!a.same_dims(b)) throw DimensionError("ssim: image dims mismatch");
  if (!mask.same_dims(a)) throw DimensionError("ssim: mask dims mismatch");
  ad::Tape tape;
  tape.set_grad_enabled(false);
  const ad::Var va = tape.input(ad::Tensor::from_image(a));
  const ad::Var vb = tape.input(ad::Tensor::from_image(b));
  return ssim_index(tape, va, vb, mask).scalar();
}

ImageTensor resize_bilinear(const ImageTensor& img, int rows, int cols) {
  if (rows < 1 || cols < 1) {
    throw DimensionError("resize_bilinear: target dims must be positive");
  }
  if (rows == img.rows() && cols == img.cols()) return img;
  ImageTensor out(img.channels(), rows, cols, img.domain());
  const double sr = static_cast<double>(img.rows()) / rows;
  const double sc = static_cast<double>(img.cols()) / cols;
  for (int r = 0; r < rows; ++r) {
    const double sy = std::clamp((r + 0.5) * sr - 0.5, 0.0,
                                 static_cast<double>(img.rows() - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, img.rows() - 1);
    const double fy = sy - y0;
    for (int c = 0; c < cols; ++c) {
      const double sx = std::clamp((c + 0.5) * sc - 0.5, 0.0,
                                   static_cast<double>(img.cols() - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, img.cols() - 1);
      const double fx = sx - x0;
      for (int ch = 0; ch < img.channels(); ++ch) {
        const double top = (1.0 - fx) * img.at(ch, y0, x0) +
                           fx * img.at(ch, y0, x1);
        const double bot = (1.0 - fx) * img.at(ch, y1, x0) +
                           fx * img.at(ch, y1, x1);
        out.at(ch, r, c) = static_cast<float>((1.0 - fy) * top + fy * bot);
      }
    }
  }
  clamp_to_domain(out);
  return out;
}

ImageTensor resize_disparity(const ImageTensor& disp, int rows, int cols) {
  if (disp.channels() != 1) {
    throw DimensionError("resize_disparity: expected 1 channel");
  }
  if (rows < 1 || cols < 1) {
    throw DimensionError("resize_disparity: target dims must be positive");
  }
  const float ratio =
      static_cast<float>(cols) / static_cast<float>(disp.cols());
  ImageTensor out(1, rows, cols, ValueDomain::kFree);
  const double sr = static_cast<double>(disp.rows()) / rows;
  const double sc = static_cast<double>(disp.cols()) / cols;
  for (int r = 0; r < rows; ++r) {
    const int y = std::min(static_cast<int>((r + 0.5) * sr), disp.rows() - 1);
    for (int c = 0; c < cols; ++c) {
      const int x =
          std::min(static_cast<int>((c + 0.5) * sc), disp.cols() - 1);
      out.at(0, r, c) = disp.at(0, y, x) * ratio;
    }
  }
  return out;
}

ImageTensor replicate_channels(const ImageTensor& img, int channels) {
  if (img.channels() != 1) {
    throw DimensionError("replicate_channels: source must be 1-channel");
  }
  if (channels < 1) {
    throw DimensionError("replicate_channels: channel count must be >= 1");
  }
  ImageTensor out(channels, img.rows(), img.cols(), img.domain());
  for (int c = 0; c < channels; ++c) {
    std::copy(img.data(), img.data() + img.size(),
              out.data() + static_cast<size_t>(c) * img.size());
  }
  return out;
}

ImageTensor normalize_bytes(const std::vector<uint8_t>& interleaved,
                            int channels, int rows, int cols) {
  const size_t expect = static_cast<size_t>(channels) * rows * cols;
  if (interleaved.size() != expect) {
    throw DimensionError("normalize_bytes: buffer size " +
                         std::to_string(interleaved.size()) +
                         " != " + std::to_string(expect));
  }
  ImageTensor out(channels, rows, cols, ValueDomain::kSigned);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const size_t base = (static_cast<size_t>(r) * cols + c) * channels;
      for (int ch = 0; ch < channels; ++ch) {
        // 2*(b/255) - 1 hits the [-1,1] endpoints exactly; a premultiplied
        // 2/255 scale does not (255 * float(2/255) rounds above 2).
        out.at(ch, r, c) = 2.0f * (interleaved[base + ch] / 255.0f) - 1.0f;
      }
    }
  }
  return out;
}

std::vector<uint8_t> denormalize_bytes(const ImageTensor& img) {
  std::vector<uint8_t> out(img.size());
  for (int r = 0; r < img.rows(); ++r) {
    for (int c = 0; c < img.cols(); ++c) {
      const size_t base =
          (static_cast<size_t>(r) * img.cols() + c) * img.channels();
      for (int ch = 0; ch < img.channels(); ++ch) {
        const long b = std::lround((img.at(ch, r, c) + 1.0f) * 127.5f);
        out[base + ch] = static_cast<uint8_t>(std::clamp(b, 0L, 255L));
      }
    }
  }
  return out;
}

std::vector<uint8_t> unit_to_bytes(const ImageTensor& img) {
  std::vector<uint8_t> out(img.size());
  for (int r = 0; r < img.rows(); ++r) {
    for (int c = 0; c < img.cols(); ++c) {
      const size_t base =
          (static_cast<size_t>(r) * img.cols() + c) * img.channels();
      for (int ch = 0; ch < img.channels(); ++ch) {
        const long b = std::lround(img.at(ch, r, c) * 255.0f);
        out[base + ch] = static_cast<uint8_t>(std::clamp(b, 0L, 255L));
      }
    }
  }
  return out;
}

}  // namespace s2r
