#include "s2r/image_io.hpp"

#include <png.h>

#include <bit>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include "s2r/errors.hpp"

namespace s2r {

namespace {

constexpr size_t kMaxPixels = 1u << 28;  // dims sanity bound (~268 MPix)

void check_dims(long rows, long cols, const std::string& path) {
  if (rows < 1 || cols < 1 ||
      static_cast<size_t>(rows) * static_cast<size_t>(cols) > kMaxPixels) {
    throw FormatError(path + ": implausible dimensions " +
                      std::to_string(rows) + "x" + std::to_string(cols));
  }
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  std::string* err = static_cast<std::string*>(png_get_error_ptr(png));
  *err = msg ? msg : "unknown libpng error";
  longjmp(png_jmpbuf(png), 1);
}

void png_warn_fn(png_structp, png_const_charp) {}

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

RawImage read_png(const std::string& path, FILE* f) {
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err,
                                           png_error_fn, png_warn_fn);
  if (!png) throw IoError(path + ": libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError(path + ": libpng init failed");
  }
  RawImage img;
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path + ": corrupt PNG (" + err + ")");
  }
  png_init_io(png, f);
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth == 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path + ": unsupported bit depth 16 (8-bit only)");
  }
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int ch = png_get_channels(png, info);
  check_dims(h, w, path);
  if (ch != 1 && ch != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path + ": unsupported channel count " +
                      std::to_string(ch));
  }
  img.channels = ch;
  img.rows = static_cast<int>(h);
  img.cols = static_cast<int>(w);
  img.bytes.resize(static_cast<size_t>(ch) * h * w);
  row_ptrs.resize(h);
  for (png_uint_32 r = 0; r < h; ++r) {
    row_ptrs[r] = img.bytes.data() + static_cast<size_t>(r) * w * ch;
  }
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

// Reads one whitespace-delimited PNM header token, skipping '#' comments.
std::string pnm_token(std::istream& in, const std::string& path) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw FormatError(path + ": truncated header");
  return tok;
}

int pnm_int(std::istream& in, const std::string& path) {
  const std::string tok = pnm_token(in, path);
  try {
    size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw FormatError(path + ": bad header field '" + tok + "'");
  }
}

RawImage read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  const std::string magic = pnm_token(in, path);
  int channels;
  if (magic == "P6") {
    channels = 3;
  } else if (magic == "P5") {
    channels = 1;
  } else {
    throw FormatError(path + ": unsupported PNM magic '" + magic + "'");
  }
  const int cols = pnm_int(in, path);
  const int rows = pnm_int(in, path);
  const int maxval = pnm_int(in, path);
  check_dims(rows, cols, path);
  if (maxval != 255) {
    throw FormatError(path + ": unsupported maxval " + std::to_string(maxval) +
                      " (8-bit only)");
  }
  RawImage img;
  img.channels = channels;
  img.rows = rows;
  img.cols = cols;
  img.bytes.resize(static_cast<size_t>(channels) * rows * cols);
  in.read(reinterpret_cast<char*>(img.bytes.data()),
          static_cast<std::streamsize>(img.bytes.size()));
  if (static_cast<size_t>(in.gcount()) != img.bytes.size()) {
    throw FormatError(path + ": truncated pixel data");
  }
  return img;
}

uint32_t read_u32_le(const char* p) {
  uint32_t v;
  std::memcpy(&v, p, 4);
  if constexpr (std::endian::native == std::endian::big) {
    v = __builtin_bswap32(v);
  }
  return v;
}

void append_u32_le(std::string& out, uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = __builtin_bswap32(v);
  }
  out.append(reinterpret_cast<const char*>(&v), 4);
}

float f32_from_bits(uint32_t bits) {
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

uint32_t bits_from_f32(float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  return bits;
}

}  // namespace

RawImage read_image_8bit(const std::string& path) {
  FilePtr f(fopen(path.c_str(), "rb"));
  if (!f) throw IoError(path + ": cannot open");
  unsigned char sig[8] = {};
  const size_t got = fread(sig, 1, 8, f.get());
  if (got >= 8 && png_sig_cmp(sig, 0, 8) == 0) {
    rewind(f.get());
    return read_png(path, f.get());
  }
  f.reset();
  if (got >= 2 && sig[0] == 'P' && (sig[1] == '5' || sig[1] == '6')) {
    return read_pnm(path);
  }
  throw FormatError(path + ": not a PNG or binary PNM file");
}

void write_png(const std::string& path, const RawImage& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw ContractError("write_png: channels must be 1 or 3");
  }
  FilePtr f(fopen(path.c_str(), "wb"));
  if (!f) throw IoError(path + ": cannot open for writing");
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err,
                                            png_error_fn, png_warn_fn);
  if (!png) throw IoError(path + ": libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError(path + ": libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path + ": PNG write failed (" + err + ")");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.cols, img.rows, 8,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(img.rows);
  for (int r = 0; r < img.rows; ++r) {
    rows[r] = const_cast<png_bytep>(img.bytes.data()) +
              static_cast<size_t>(r) * img.cols * img.channels;
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_ppm(const std::string& path, const RawImage& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw ContractError("write_ppm: channels must be 1 or 3");
  }
  std::string out = img.channels == 3 ? "P6\n" : "P5\n";
  out += std::to_string(img.cols) + " " + std::to_string(img.rows) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.bytes.data()),
             img.bytes.size());
  write_bytes_atomic(path, out);
}

ImageTensor read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  const std::string magic = pnm_token(in, path);
  if (magic == "PF") {
    throw FormatError(path + ": color PFM not supported (expected Pf)");
  }
  if (magic != "Pf") {
    throw FormatError(path + ": bad PFM magic '" + magic + "'");
  }
  const int cols = pnm_int(in, path);
  const int rows = pnm_int(in, path);
  check_dims(rows, cols, path);
  const std::string scale_tok = pnm_token(in, path);
  double scale;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw FormatError(path + ": bad scale '" + scale_tok + "'");
  }
  if (scale == 0.0) throw FormatError(path + ": zero scale");
  const bool file_le = scale < 0.0;
  const size_t n = static_cast<size_t>(rows) * cols;
  std::vector<char> buf(n * 4);
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<size_t>(in.gcount()) != buf.size()) {
    throw FormatError(path + ": truncated pixel data");
  }
  ImageTensor out(1, rows, cols, ValueDomain::kFree);
  for (int r = 0; r < rows; ++r) {
    const int file_row = rows - 1 - r;  // disk order is bottom-up
    for (int c = 0; c < cols; ++c) {
      uint32_t bits;
      std::memcpy(&bits, buf.data() + (static_cast<size_t>(file_row) * cols +
                                       c) * 4, 4);
      const bool native_le = std::endian::native == std::endian::little;
      if (file_le != native_le) bits = __builtin_bswap32(bits);
      out.at(0, r, c) = f32_from_bits(bits);
    }
  }
  return out;
}

void write_pfm(const std::string& path, const ImageTensor& disp) {
  if (disp.channels() != 1) throw ContractError("write_pfm: 1 channel only");
  std::string out = "Pf\n" + std::to_string(disp.cols()) + " " +
                    std::to_string(disp.rows()) + "\n-1.0\n";
  for (int r = disp.rows() - 1; r >= 0; --r) {  // disk order is bottom-up
    for (int c = 0; c < disp.cols(); ++c) {
      append_u32_le(out, bits_from_f32(disp.at(0, r, c)));
    }
  }
  write_bytes_atomic(path, out);
}

ImageTensor read_dsp1(const std::string& path) {
  const std::string bytes = read_bytes(path);
  if (bytes.size() < 12 || bytes.compare(0, 4, "DSP1") != 0) {
    throw FormatError(path + ": bad magic (expected DSP1)");
  }
  const uint32_t rows = read_u32_le(bytes.data() + 4);
  const uint32_t cols = read_u32_le(bytes.data() + 8);
  check_dims(rows, cols, path);
  const size_t n = static_cast<size_t>(rows) * cols;
  if (bytes.size() != 12 + n * 4) {
    throw FormatError(path + ": payload size mismatch (" +
                      std::to_string(bytes.size() - 12) + " bytes for " +
                      std::to_string(n) + " pixels)");
  }
  ImageTensor out(1, static_cast<int>(rows), static_cast<int>(cols),
                  ValueDomain::kFree);
  for (size_t i = 0; i < n; ++i) {
    out.data()[i] = f32_from_bits(read_u32_le(bytes.data() + 12 + i * 4));
  }
  return out;
}

void write_dsp1(const std::string& path, const ImageTensor& disp) {
  if (disp.channels() != 1) throw ContractError("write_dsp1: 1 channel only");
  std::string out = "DSP1";
  append_u32_le(out, static_cast<uint32_t>(disp.rows()));
  append_u32_le(out, static_cast<uint32_t>(disp.cols()));
  for (size_t i = 0; i < disp.size(); ++i) {
    append_u32_le(out, bits_from_f32(disp.data()[i]));
  }
  write_bytes_atomic(path, out);
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_bytes_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(tmp + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError(tmp + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError(path + ": rename failed (" + ec.message() + ")");
}

}  // namespace s2r
