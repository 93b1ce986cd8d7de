#include "s2r/tensor.hpp"

#include <cmath>
#include <string>

#include "s2r/errors.hpp"

namespace s2r {

namespace {
size_t checked_volume(int channels, int rows, int cols) {
  if (channels < 0 || rows < 0 || cols < 0) {
    throw DimensionError("ImageTensor: negative dimension");
  }
  return static_cast<size_t>(channels) * rows * cols;
}
}  // namespace

ImageTensor::ImageTensor(int channels, int rows, int cols, ValueDomain domain,
                         float fill)
    : data_(checked_volume(channels, rows, cols), fill),
      channels_(channels),
      rows_(rows),
      cols_(cols),
      domain_(domain) {}

ImageTensor::ImageTensor(std::vector<float> data, int channels, int rows,
                         int cols, ValueDomain domain)
    : data_(std::move(data)),
      channels_(channels),
      rows_(rows),
      cols_(cols),
      domain_(domain) {
  if (data_.size() != static_cast<size_t>(channels) * rows * cols) {
    throw DimensionError("ImageTensor: data length " +
                         std::to_string(data_.size()) +
                         " does not match channels*rows*cols");
  }
}

void ImageTensor::validate() const {
  if (data_.size() != static_cast<size_t>(channels_) * rows_ * cols_) {
    throw DimensionError("ImageTensor: inconsistent size");
  }
  for (float v : data_) {
    if (std::isnan(v)) {
      if (domain_ == ValueDomain::kFree) continue;  // undefined sentinel
      throw NumericError("ImageTensor: NaN outside kFree domain");
    }
    if (std::isinf(v)) throw NumericError("ImageTensor: non-finite value");
    if (domain_ == ValueDomain::kSigned && (v < -1.0f || v > 1.0f)) {
      throw NumericError("ImageTensor: Signed value outside [-1,1]: " +
                         std::to_string(v));
    }
    if (domain_ == ValueDomain::kUnit && (v < 0.0f || v > 1.0f)) {
      throw NumericError("ImageTensor: Unit value outside [0,1]: " +
                         std::to_string(v));
    }
  }
}

size_t ValidityMask::count_true() const {
  size_t n = 0;
  for (uint8_t v : mask_) n += v != 0;
  return n;
}

bool ValidityMask::any_true() const {
  for (uint8_t v : mask_) {
    if (v) return true;
  }
  return false;
}

ValidityMask ValidityMask::intersect(const ValidityMask& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw DimensionError("ValidityMask::intersect: dims mismatch");
  }
  ValidityMask out(rows_, cols_, false);
  for (size_t i = 0; i < mask_.size(); ++i) {
    out.mask_[i] = (mask_[i] && other.mask_[i]) ? 1 : 0;
  }
  return out;
}

}  // namespace s2r
