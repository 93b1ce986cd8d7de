#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "s2r/rng.hpp"
#include "s2r/tensor.hpp"

namespace s2r {

enum class Domain : uint8_t { kSynthetic, kReal };

// One rectified synthetic sample: two views plus the left-aligned ground
// truth disparity (1 channel, NaN where undefined).
struct StereoTuple {
  ImageTensor left;
  ImageTensor right;
  ImageTensor disparity;
  std::string id;

  // Enforces the type contract: 3-channel Signed views sharing spatial
  // dims with the 1-channel disparity; defined disparity values >= 0.
  void validate() const;
};

struct ManifestEntry {
  std::string id;         // stem of the first path, unique per manifest
  std::string image;      // left view (synthetic) or the sole image (real)
  std::string right;      // synthetic only
  std::string disparity;  // synthetic only
  std::string label;      // optional class raster
};

// Parsed dataset description. The on-disk form is line-oriented and
// tab-separated: directive lines (`domain`, `resize`, `disparity_sign`)
// followed by one entry per line — synthetic entries carry
// left/right/disparity[/label] paths, real entries image[/label].
// Relative paths resolve against the manifest file's directory.
struct DatasetManifest {
  Domain domain = Domain::kReal;
  std::vector<ManifestEntry> entries;
  int resize_rows = 0;  // 0 keeps the native size
  int resize_cols = 0;
  int disparity_sign = 1;  // warp(left, sign*d) approximates right

  static DatasetManifest load(const std::string& path);
  void validate() const;
};

// Decodes an 8-bit PNG or PPM/PGM into the Signed domain; grayscale
// sources are replicated to 3 channels.
ImageTensor load_image(const std::string& path);

// Reads a PFM or DSP1 disparity map (dispatch on magic); non-finite and
// negative values are normalized to NaN (undefined).
ImageTensor load_disparity(const std::string& path);

// Reads an integer class raster from an 8-bit grayscale image; values are
// the raw class ids (Free domain, not normalized).
ImageTensor load_labels(const std::string& path);

// True iff the fraction of pixels whose class id is in `building_class_ids`
// is at least `threshold`.
bool building_filter(const ImageTensor& labels,
                     const std::vector<int>& building_class_ids,
                     double threshold);

// Applies one crop window to all three rasters. Disparity values are
// unchanged: a horizontal crop shifts both views identically, so the
// offsets between them stay valid.
StereoTuple paired_random_crop(const StereoTuple& t, int rows, int cols,
                               Rng& rng);

// Loads entry `index` of a synthetic manifest at the manifest's target
// size (views resized bilinearly, disparity by the nearest-neighbor +
// column-rescale rule). The tuple is validated before return.
StereoTuple load_tuple(const DatasetManifest& m, size_t index);

// Loads entry `index` of a real-domain manifest at the target size.
ImageTensor load_real(const DatasetManifest& m, size_t index);

// One optimization step's worth of data with all edge maps precomputed
// (one per left, right, and real image; single-channel Unit domain).
struct Batch {
  std::vector<StereoTuple> synthetic;
  std::vector<ImageTensor> real;
  std::vector<ImageTensor> left_edges;
  std::vector<ImageTensor> right_edges;
  std::vector<ImageTensor> real_edges;
  int disparity_sign = 1;
};

// Deterministic two-domain batch source. Each domain is consumed as a
// shuffled permutation that reshuffles when exhausted, so over one epoch
// (defined by the larger domain) every id of the larger domain appears;
// the smaller domain is resampled. Decoded tensors are cached at the
// manifest's target size, so repeated epochs do not re-decode files.
class BatchStream {
 public:
  // Both manifests must be non-empty and of the expected domain kinds.
  BatchStream(DatasetManifest synthetic, DatasetManifest real, int batch_size,
              Rng rng);

  Batch next();

  size_t steps_per_epoch() const { return steps_per_epoch_; }
  uint64_t epochs_completed() const { return epochs_completed_; }

  // Serialized sampling position (permutations, cursors, rng). Restoring
  // it replays the exact remaining batch sequence.
  std::string state() const;
  void restore(const std::string& s);

 private:
  struct Cursor {
    std::vector<uint32_t> order;
    size_t pos = 0;
  };

  size_t draw(Cursor& cur);
  const StereoTuple& tuple_at(size_t idx);
  const ImageTensor& real_at(size_t idx);
  const ImageTensor& edge_of(const ImageTensor& img, const std::string& key);

  DatasetManifest synth_;
  DatasetManifest real_;
  int batch_size_;
  size_t steps_per_epoch_;
  uint64_t epochs_completed_ = 0;
  size_t step_in_epoch_ = 0;
  Cursor cur_a_;
  Cursor cur_b_;
  Rng rng_;
  std::map<size_t, StereoTuple> tuple_cache_;
  std::map<size_t, ImageTensor> real_cache_;
  std::map<std::string, ImageTensor> edge_cache_;
};

// Convenience factory matching the training entry point.
BatchStream make_batches(DatasetManifest synthetic, DatasetManifest real,
                         int batch_size, Rng rng);

}  // namespace s2r
