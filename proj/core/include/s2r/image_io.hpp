#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s2r/tensor.hpp"

namespace s2r {

// Interleaved 8-bit raster as exchanged with the image codecs
// (pixel-major: r0c0 planes, r0c1 planes, ...). channels is 1 or 3.
struct RawImage {
  std::vector<uint8_t> bytes;
  int channels = 0;
  int rows = 0;
  int cols = 0;
};

// Reads an 8-bit PNG (palette expanded, alpha stripped) or binary PPM/PGM,
// dispatching on the file's magic. 16-bit inputs are rejected.
// Throws IoError when the file cannot be opened, FormatError on corrupt
// or unsupported content.
RawImage read_image_8bit(const std::string& path);

void write_png(const std::string& path, const RawImage& img);
void write_ppm(const std::string& path, const RawImage& img);

// PFM, single-channel ("Pf"). On disk rows run bottom-up and the scale
// line's sign encodes endianness (negative = little). The returned tensor
// is top-down with raw values; no sentinel mapping is applied here.
ImageTensor read_pfm(const std::string& path);
void write_pfm(const std::string& path, const ImageTensor& disp);

// Raw float32 disparity container: magic "DSP1", u32 rows, u32 cols,
// little-endian float32 row-major payload, top-down.
ImageTensor read_dsp1(const std::string& path);
void write_dsp1(const std::string& path, const ImageTensor& disp);

// Whole-file helpers. write_bytes_atomic stages to <path>.tmp and renames,
// so readers never observe a half-written file.
std::string read_bytes(const std::string& path);
void write_bytes_atomic(const std::string& path, const std::string& bytes);

}  // namespace s2r
