#include "s2r/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "s2r/errors.hpp"

namespace s2r {

namespace {

void check_single_channel(const ImageTensor& t, const char* what) {
  if (t.channels() != 1) {
    throw DimensionError(std::string(what) +
                         " must be single-channel, got " +
                         std::to_string(t.channels()));
  }
}

void check_pair(const ImageTensor& pred, const ImageTensor& gt) {
  check_single_channel(pred, "predicted disparity");
  check_single_channel(gt, "ground-truth disparity");
  if (!pred.same_dims(gt)) {
    throw DimensionError("predicted and ground-truth disparities differ in "
                         "shape");
  }
}

// |pred - gt| over the masked pixels, in double for a stable median.
std::vector<double> masked_errors(const ImageTensor& pred,
                                  const ImageTensor& gt,
                                  const ValidityMask& mask) {
  check_pair(pred, gt);
  if (!mask.same_dims(gt)) {
    throw DimensionError("mask shape does not match the disparity maps");
  }
  std::vector<double> errs;
  errs.reserve(mask.count_true());
  for (int r = 0; r < gt.rows(); ++r) {
    for (int c = 0; c < gt.cols(); ++c) {
      if (!mask.at(r, c)) continue;
      errs.push_back(std::abs(static_cast<double>(pred.at(0, r, c)) -
                              static_cast<double>(gt.at(0, r, c))));
    }
  }
  return errs;
}

double median_of(std::vector<double> values) {
  if (values.empty()) {
    throw EmptySupportError("median over an empty error population");
  }
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double accuracy_of(const std::vector<double>& errs, double tau) {
  if (errs.empty()) {
    throw EmptySupportError("accuracy over an empty error population");
  }
  size_t within = 0;
  for (double e : errs) {
    if (e <= tau) ++within;
  }
  return 100.0 * static_cast<double>(within) /
         static_cast<double>(errs.size());
}

}  // namespace

ValidityMask mask_defined(const ImageTensor& gt) {
  check_single_channel(gt, "ground-truth disparity");
  ValidityMask mask(gt.rows(), gt.cols());
  for (int r = 0; r < gt.rows(); ++r) {
    for (int c = 0; c < gt.cols(); ++c) {
      const float v = gt.at(0, r, c);
      mask.set(r, c, std::isfinite(v) && v >= 0.0f);
    }
  }
  return mask;
}

double mad(const ImageTensor& pred, const ImageTensor& gt,
           const ValidityMask& mask) {
  return median_of(masked_errors(pred, gt, mask));
}

double px_accuracy(const ImageTensor& pred, const ImageTensor& gt,
                   const ValidityMask& mask, double tau) {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  return accuracy_of(masked_errors(pred, gt, mask), tau);
}

EvalReport evaluate(const std::vector<DisparityItem>& pred,
                    const std::vector<DisparityItem>& gt) {
  std::map<std::string, const ImageTensor*> pred_by_id, gt_by_id;
  for (const DisparityItem& item : pred) {
    if (!pred_by_id.emplace(item.id, &item.map).second) {
      throw ManifestError("duplicate prediction id '" + item.id + "'");
    }
  }
  for (const DisparityItem& item : gt) {
    if (!gt_by_id.emplace(item.id, &item.map).second) {
      throw ManifestError("duplicate ground-truth id '" + item.id + "'");
    }
  }
  for (const auto& [id, map] : pred_by_id) {
    if (!gt_by_id.count(id)) {
      throw ManifestError("prediction id '" + id +
                          "' has no ground-truth counterpart");
    }
  }
  for (const auto& [id, map] : gt_by_id) {
    if (!pred_by_id.count(id)) {
      throw ManifestError("ground-truth id '" + id +
                          "' has no prediction counterpart");
    }
  }
  if (gt_by_id.empty()) throw ManifestError("no items to evaluate");

  EvalReport report;
  std::vector<double> pooled;
  for (const auto& [id, gt_map] : gt_by_id) {
    const ImageTensor& pred_map = *pred_by_id.at(id);
    const ValidityMask mask = mask_defined(*gt_map);
    ItemMetrics item;
    item.id = id;
    std::vector<double> errs = masked_errors(pred_map, *gt_map, mask);
    item.valid_pixel_count = errs.size();
    if (!errs.empty()) {
      item.mad = median_of(errs);
      item.acc_3px = accuracy_of(errs, 3.0);
      item.acc_1px = accuracy_of(errs, 1.0);
      pooled.insert(pooled.end(), errs.begin(), errs.end());
    }
    report.items.push_back(std::move(item));
  }
  if (pooled.empty()) {
    throw EmptySupportError("no item defines any ground-truth pixel");
  }
  report.valid_pixel_count = pooled.size();
  report.acc_3px = accuracy_of(pooled, 3.0);
  report.acc_1px = accuracy_of(pooled, 1.0);
  report.mad = median_of(std::move(pooled));
  return report;
}

std::string report_table(const EvalReport& report) {
  std::ostringstream o;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-24s %12s %12s %12s %12s\n", "id",
                "valid_px", "MAD", "3px-acc%", "1px-acc%");
  o << buf;
  auto row = [&](const std::string& id, size_t count, double m, double a3,
                 double a1) {
    std::snprintf(buf, sizeof buf, "%-24s %12zu %12.5f %12.5f %12.5f\n",
                  id.c_str(), count, m, a3, a1);
    o << buf;
  };
  for (const ItemMetrics& item : report.items) {
    row(item.id, item.valid_pixel_count, item.mad, item.acc_3px,
        item.acc_1px);
  }
  row("(pooled)", report.valid_pixel_count, report.mad, report.acc_3px,
      report.acc_1px);
  return o.str();
}

std::string report_records(const EvalReport& report) {
  std::ostringstream o;
  char buf[240];
  o << "record\tid\tvalid_px\tmad\tacc_3px\tacc_1px\n";
  auto line = [&](const char* kind, const std::string& id, size_t count,
                  double m, double a3, double a1) {
    std::snprintf(buf, sizeof buf, "%s\t%s\t%zu\t%.17g\t%.17g\t%.17g\n",
                  kind, id.c_str(), count, m, a3, a1);
    o << buf;
  };
  for (const ItemMetrics& item : report.items) {
    line("item", item.id, item.valid_pixel_count, item.mad, item.acc_3px,
         item.acc_1px);
  }
  line("pooled", "-", report.valid_pixel_count, report.mad, report.acc_3px,
       report.acc_1px);
  return o.str();
}

}  // namespace s2r
