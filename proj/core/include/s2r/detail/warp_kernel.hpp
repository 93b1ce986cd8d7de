#pragma once

#include <cmath>
#include <cstdint>

namespace s2r::detail {

// Horizontal bilinear warp shared by the float32 image op and the double
// autodiff node. out(c,v,u) = src(v, u + sign*disp(v,u)) sampled bilinearly;
// a sample whose source x falls outside [0, cols-1] yields 0 and mask=0.
// src/out are planar (ch * rows * cols), disp/mask are rows * cols.
template <typename T>
void warp_horizontal_rows(const T* src, int channels, int rows, int cols,
                          const T* disp, int sign, T* out, uint8_t* mask) {
  const long plane = static_cast<long>(rows) * cols;
  for (int v = 0; v < rows; ++v) {
    for (int u = 0; u < cols; ++u) {
      const long p = static_cast<long>(v) * cols + u;
      const T x = static_cast<T>(u) + static_cast<T>(sign) * disp[p];
      if (!(x >= T(0) && x <= T(cols - 1))) {  // also rejects NaN
        mask[p] = 0;
        for (int c = 0; c < channels; ++c) out[c * plane + p] = T(0);
        continue;
      }
      mask[p] = 1;
      int x0 = static_cast<int>(std::floor(x));
      if (x0 > cols - 2) x0 = cols - 2;  // x == cols-1 lands on last pair
      if (cols == 1) x0 = 0;
      const T f = x - static_cast<T>(x0);
      const long s0 = static_cast<long>(v) * cols + x0;
      for (int c = 0; c < channels; ++c) {
        const T* sp = src + c * plane;
        const T a = sp[s0];
        const T b = (cols == 1) ? a : sp[s0 + 1];
        out[c * plane + p] = (T(1) - f) * a + f * b;
      }
    }
  }
}

}  // namespace s2r::detail
