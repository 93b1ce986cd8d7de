#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace s2r {

// Value range contract carried by every ImageTensor.
//   kSigned : pixel data in [-1, 1]
//   kUnit   : edge maps / masks in [0, 1]
//   kFree   : unconstrained (disparities in pixels, labels, logits)
enum class ValueDomain : uint8_t { kSigned, kUnit, kFree };

// Planar float raster, channel-major: index = (c * rows + r) * cols + col.
// The universal pixel container for images, edge maps, disparity maps and
// logits maps.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(int channels, int rows, int cols, ValueDomain domain,
              float fill = 0.0f);
  ImageTensor(std::vector<float> data, int channels, int rows, int cols,
              ValueDomain domain);

  int channels() const { return channels_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  ValueDomain domain() const { return domain_; }
  void set_domain(ValueDomain d) { domain_ = d; }

  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float& at(int c, int r, int col) {
    return data_[(static_cast<size_t>(c) * rows_ + r) * cols_ + col];
  }
  float at(int c, int r, int col) const {
    return data_[(static_cast<size_t>(c) * rows_ + r) * cols_ + col];
  }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::vector<float>& vec() { return data_; }
  const std::vector<float>& vec() const { return data_; }

  bool same_dims(const ImageTensor& other) const {
    return channels_ == other.channels_ && rows_ == other.rows_ &&
           cols_ == other.cols_;
  }
  bool same_spatial(const ImageTensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  // Checks the type invariants: size consistency, finiteness, and the
  // domain's value range (NaN is tolerated in kFree tensors, where it
  // encodes "undefined"). Throws DimensionError / NumericError.
  void validate() const;

 private:
  std::vector<float> data_;
  int channels_ = 0;
  int rows_ = 0;
  int cols_ = 0;
  ValueDomain domain_ = ValueDomain::kFree;
};

// Boolean raster qualifying the pixels of a same-sized tensor.
class ValidityMask {
 public:
  ValidityMask() = default;
  ValidityMask(int rows, int cols, bool fill = true)
      : mask_(static_cast<size_t>(rows) * cols, fill ? 1 : 0),
        rows_(rows),
        cols_(cols) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  bool at(int r, int c) const {
    return mask_[static_cast<size_t>(r) * cols_ + c] != 0;
  }
  void set(int r, int c, bool v) {
    mask_[static_cast<size_t>(r) * cols_ + c] = v ? 1 : 0;
  }

  size_t count_true() const;
  bool all_true() const { return count_true() == mask_.size(); }
  bool any_true() const;

  bool same_dims(const ImageTensor& t) const {
    return rows_ == t.rows() && cols_ == t.cols();
  }

  // Logical AND of two masks of equal dims.
  ValidityMask intersect(const ValidityMask& other) const;

  const std::vector<uint8_t>& raw() const { return mask_; }

 private:
  std::vector<uint8_t> mask_;
  int rows_ = 0;
  int cols_ = 0;
};

}  // namespace s2r
