#pragma once

#include <string>
#include <vector>

#include "s2r/tensor.hpp"

namespace s2r {

// Disparity-map comparison metrics, decoupled from whatever estimator
// produced the predictions. All metrics are computed over pixels where the
// ground truth is defined (finite and non-negative).

struct ItemMetrics {
  std::string id;
  size_t valid_pixel_count = 0;
  double mad = 0.0;      // median absolute difference, in pixels
  double acc_3px = 0.0;  // % of valid pixels with |pred - gt| <= 3
  double acc_1px = 0.0;  // % of valid pixels with |pred - gt| <= 1
};

// Pooled metrics are computed over the union of every item's valid pixels
// (one population, not a mean of per-item numbers), so they equal the
// metrics of the concatenated error population exactly. Items whose ground
// truth defines no pixels report zeroed metrics with count 0 and contribute
// nothing to the pool.
struct EvalReport {
  double mad = 0.0;
  double acc_3px = 0.0;
  double acc_1px = 0.0;
  size_t valid_pixel_count = 0;
  std::vector<ItemMetrics> items;  // sorted by id
};

// True where gt is finite and >= 0. Negative values are invalid-data
// sentinels, NaN/inf mark pixels with no ground truth.
ValidityMask mask_defined(const ImageTensor& gt);

// Median of |pred - gt| over the masked pixels; for an even count the
// median is the mean of the two central order statistics.
// Throws EmptySupportError when the mask selects nothing.
double mad(const ImageTensor& pred, const ImageTensor& gt,
           const ValidityMask& mask);

// 100 x fraction of masked pixels with |pred - gt| <= tau. tau must be
// positive. Throws EmptySupportError when the mask selects nothing.
double px_accuracy(const ImageTensor& pred, const ImageTensor& gt,
                   const ValidityMask& mask, double tau);

// One named single-channel disparity map.
struct DisparityItem {
  std::string id;
  ImageTensor map;
};

// Pairs predictions with ground truth by id (the id sets must be equal,
// otherwise ManifestError), computes per-item metrics, and pools every
// valid pixel into the set-level metrics. Throws EmptySupportError when no
// item defines any pixel.
EvalReport evaluate(const std::vector<DisparityItem>& pred,
                    const std::vector<DisparityItem>& gt);

// Self-describing fixed-width text table (per-item rows plus the pooled
// row).
std::string report_table(const EvalReport& report);

// Machine-readable line-delimited records: one tab-separated line per item
// plus a final pooled line, full double precision.
std::string report_records(const EvalReport& report);

}  // namespace s2r
