#include "s2r/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "s2r/errors.hpp"
#include "s2r/image_io.hpp"
#include "s2r/imageops.hpp"

namespace fs = std::filesystem;

namespace s2r {

void StereoTuple::validate() const {
  if (left.channels() != 3 || right.channels() != 3) {
    throw ContractError("tuple " + id + ": views must have 3 channels");
  }
  if (!left.same_dims(right)) {
    throw DimensionError("tuple " + id + ": left/right dims differ");
  }
  if (disparity.channels() != 1 || !disparity.same_spatial(left)) {
    throw DimensionError("tuple " + id +
                         ": disparity must be 1-channel with the views' "
                         "spatial dims");
  }
  if (left.domain() != ValueDomain::kSigned ||
      right.domain() != ValueDomain::kSigned) {
    throw ContractError("tuple " + id + ": views must be Signed domain");
  }
  left.validate();
  right.validate();
  for (float v : disparity.vec()) {
    if (!std::isnan(v) && v < 0.0f) {
      throw ContractError("tuple " + id +
                          ": defined disparity values must be >= 0");
    }
  }
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::string resolve(const fs::path& dir, const std::string& p) {
  fs::path fp(p);
  return fp.is_absolute() ? fp.string() : (dir / fp).string();
}

int parse_int(const std::string& tok, const std::string& ctx) {
  try {
    size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ManifestError(ctx + ": bad integer '" + tok + "'");
  }
}

}  // namespace

DatasetManifest DatasetManifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  const fs::path dir = fs::path(path).parent_path();
  DatasetManifest m;
  bool domain_set = false;
  std::set<std::string> ids;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::string ctx = path + ":" + std::to_string(lineno);
    const std::vector<std::string> f = split_tabs(line);
    if (f[0] == "domain") {
      if (f.size() != 2 || (f[1] != "synthetic" && f[1] != "real")) {
        throw ManifestError(ctx + ": domain must be 'synthetic' or 'real'");
      }
      m.domain = f[1] == "synthetic" ? Domain::kSynthetic : Domain::kReal;
      domain_set = true;
    } else if (f[0] == "resize") {
      if (f.size() != 3) throw ManifestError(ctx + ": resize needs rows cols");
      m.resize_rows = parse_int(f[1], ctx);
      m.resize_cols = parse_int(f[2], ctx);
      if (m.resize_rows < 1 || m.resize_cols < 1) {
        throw ManifestError(ctx + ": resize dims must be positive");
      }
    } else if (f[0] == "disparity_sign") {
      if (f.size() != 2) throw ManifestError(ctx + ": disparity_sign needs 1 value");
      const std::string& s = f[1];
      if (s == "1" || s == "+1") {
        m.disparity_sign = 1;
      } else if (s == "-1") {
        m.disparity_sign = -1;
      } else {
        throw ManifestError(ctx + ": disparity_sign must be +1 or -1");
      }
    } else {
      if (!domain_set) {
        throw ManifestError(ctx + ": domain directive must precede entries");
      }
      ManifestEntry e;
      if (m.domain == Domain::kSynthetic) {
        if (f.size() != 3 && f.size() != 4) {
          throw ManifestError(ctx +
                              ": synthetic entries take left, right, "
                              "disparity[, label] paths");
        }
        e.image = resolve(dir, f[0]);
        e.right = resolve(dir, f[1]);
        e.disparity = resolve(dir, f[2]);
        if (f.size() == 4) e.label = resolve(dir, f[3]);
      } else {
        if (f.size() != 1 && f.size() != 2) {
          throw ManifestError(ctx + ": real entries take image[, label] paths");
        }
        e.image = resolve(dir, f[0]);
        if (f.size() == 2) e.label = resolve(dir, f[1]);
      }
      e.id = fs::path(f[0]).stem().string();
      if (!ids.insert(e.id).second) {
        throw ManifestError(ctx + ": duplicate entry id '" + e.id + "'");
      }
      m.entries.push_back(std::move(e));
    }
  }
  if (!domain_set) throw ManifestError(path + ": missing domain directive");
  m.validate();
  return m;
}

void DatasetManifest::validate() const {
  if (disparity_sign != 1 && disparity_sign != -1) {
    throw ManifestError("disparity_sign must be +1 or -1");
  }
  if ((resize_rows == 0) != (resize_cols == 0)) {
    throw ManifestError("resize rows and cols must be set together");
  }
  for (const ManifestEntry& e : entries) {
    const bool stereo = !e.right.empty() && !e.disparity.empty();
    if (domain == Domain::kSynthetic && !stereo) {
      throw ManifestError("entry " + e.id +
                          ": synthetic entries need right and disparity");
    }
    if (domain == Domain::kReal && (!e.right.empty() || !e.disparity.empty())) {
      throw ManifestError("entry " + e.id + ": real entries are single images");
    }
  }
}

ImageTensor load_image(const std::string& path) {
  const RawImage raw = read_image_8bit(path);
  ImageTensor t = normalize_bytes(raw.bytes, raw.channels, raw.rows, raw.cols);
  if (t.channels() == 1) t = replicate_channels(t, 3);
  return t;
}

ImageTensor load_disparity(const std::string& path) {
  std::string magic(4, '\0');
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open");
    in.read(magic.data(), 4);
    magic.resize(static_cast<size_t>(std::max<std::streamsize>(in.gcount(), 0)));
  }
  ImageTensor d;
  if (magic.rfind("DSP1", 0) == 0) {
    d = read_dsp1(path);
  } else if (magic.rfind("Pf", 0) == 0 || magic.rfind("PF", 0) == 0) {
    d = read_pfm(path);
  } else {
    throw FormatError(path + ": unrecognized disparity container");
  }
  for (float& v : d.vec()) {
    if (!std::isfinite(v) || v < 0.0f) {
      v = std::numeric_limits<float>::quiet_NaN();
    }
  }
  return d;
}

ImageTensor load_labels(const std::string& path) {
  const RawImage raw = read_image_8bit(path);
  if (raw.channels != 1) {
    throw FormatError(path + ": class rasters must be single-channel");
  }
  ImageTensor out(1, raw.rows, raw.cols, ValueDomain::kFree);
  for (size_t i = 0; i < raw.bytes.size(); ++i) {
    out.data()[i] = static_cast<float>(raw.bytes[i]);
  }
  return out;
}

bool building_filter(const ImageTensor& labels,
                     const std::vector<int>& building_class_ids,
                     double threshold) {
  if (labels.channels() != 1) {
    throw DimensionError("building_filter: labels must be 1-channel");
  }
  size_t hits = 0;
  for (float v : labels.vec()) {
    const long id = std::lround(v);
    if (std::find(building_class_ids.begin(), building_class_ids.end(), id) !=
        building_class_ids.end()) {
      ++hits;
    }
  }
  const double frac = static_cast<double>(hits) / labels.size();
  return frac >= threshold;
}

StereoTuple paired_random_crop(const StereoTuple& t, int rows, int cols,
                               Rng& rng) {
  t.validate();
  if (rows < 1 || cols < 1 || rows > t.left.rows() || cols > t.left.cols()) {
    throw DimensionError("paired_random_crop: " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " does not fit in " +
                         std::to_string(t.left.rows()) + "x" +
                         std::to_string(t.left.cols()));
  }
  const int r0 = static_cast<int>(rng.below(t.left.rows() - rows + 1));
  const int c0 = static_cast<int>(rng.below(t.left.cols() - cols + 1));
  auto crop = [&](const ImageTensor& src) {
    ImageTensor out(src.channels(), rows, cols, src.domain());
    for (int ch = 0; ch < src.channels(); ++ch) {
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          out.at(ch, r, c) = src.at(ch, r0 + r, c0 + c);
        }
      }
    }
    return out;
  };
  return StereoTuple{crop(t.left), crop(t.right), crop(t.disparity), t.id};
}

BatchStream::BatchStream(DatasetManifest synthetic, DatasetManifest real,
                         int batch_size, Rng rng)
    : synth_(std::move(synthetic)),
      real_(std::move(real)),
      batch_size_(batch_size),
      rng_(std::move(rng)) {
  if (batch_size_ < 1) throw ConfigError("batch_size must be >= 1");
  if (synth_.domain != Domain::kSynthetic) {
    throw ConfigError("first manifest must be the synthetic domain");
  }
  if (real_.domain != Domain::kReal) {
    throw ConfigError("second manifest must be the real domain");
  }
  if (synth_.entries.empty() || real_.entries.empty()) {
    throw ConfigError("manifests must be non-empty");
  }
  const size_t larger = std::max(synth_.entries.size(), real_.entries.size());
  steps_per_epoch_ = (larger + batch_size_ - 1) / batch_size_;
  cur_a_.order.resize(synth_.entries.size());
  cur_b_.order.resize(real_.entries.size());
  for (uint32_t i = 0; i < cur_a_.order.size(); ++i) cur_a_.order[i] = i;
  for (uint32_t i = 0; i < cur_b_.order.size(); ++i) cur_b_.order[i] = i;
}

size_t BatchStream::draw(Cursor& cur) {
  if (cur.pos == cur.order.size()) {
    rng_.shuffle(cur.order);
    cur.pos = 0;
  }
  return cur.order[cur.pos++];
}

StereoTuple load_tuple(const DatasetManifest& m, size_t index) {
  if (m.domain != Domain::kSynthetic) {
    throw ManifestError("load_tuple needs a synthetic-domain manifest");
  }
  if (index >= m.entries.size()) {
    throw ManifestError("tuple index " + std::to_string(index) +
                        " out of range");
  }
  const ManifestEntry& e = m.entries[index];
  StereoTuple t;
  t.left = load_image(e.image);
  t.right = load_image(e.right);
  t.disparity = load_disparity(e.disparity);
  t.id = e.id;
  if (m.resize_rows > 0) {
    t.left = resize_bilinear(t.left, m.resize_rows, m.resize_cols);
    t.right = resize_bilinear(t.right, m.resize_rows, m.resize_cols);
    t.disparity = resize_disparity(t.disparity, m.resize_rows, m.resize_cols);
  }
  t.validate();
  return t;
}

ImageTensor load_real(const DatasetManifest& m, size_t index) {
  if (m.domain != Domain::kReal) {
    throw ManifestError("load_real needs a real-domain manifest");
  }
  if (index >= m.entries.size()) {
    throw ManifestError("image index " + std::to_string(index) +
                        " out of range");
  }
  ImageTensor img = load_image(m.entries[index].image);
  if (m.resize_rows > 0) {
    img = resize_bilinear(img, m.resize_rows, m.resize_cols);
  }
  return img;
}

const StereoTuple& BatchStream::tuple_at(size_t idx) {
  auto it = tuple_cache_.find(idx);
  if (it != tuple_cache_.end()) return it->second;
  return tuple_cache_.emplace(idx, load_tuple(synth_, idx)).first->second;
}

const ImageTensor& BatchStream::real_at(size_t idx) {
  auto it = real_cache_.find(idx);
  if (it != real_cache_.end()) return it->second;
  return real_cache_.emplace(idx, load_real(real_, idx)).first->second;
}

const ImageTensor& BatchStream::edge_of(const ImageTensor& img,
                                        const std::string& key) {
  auto it = edge_cache_.find(key);
  if (it != edge_cache_.end()) return it->second;
  return edge_cache_.emplace(key, sobel_edges(img)).first->second;
}

Batch BatchStream::next() {
  if (step_in_epoch_ == 0) {
    // epoch boundary: fresh permutations so each epoch covers the larger
    // domain exactly (the tail of the shorter one is resampled mid-epoch)
    rng_.shuffle(cur_a_.order);
    cur_a_.pos = 0;
    rng_.shuffle(cur_b_.order);
    cur_b_.pos = 0;
  }
  Batch b;
  b.disparity_sign = synth_.disparity_sign;
  for (int i = 0; i < batch_size_; ++i) {
    const size_t idx = draw(cur_a_);
    const StereoTuple& t = tuple_at(idx);
    b.synthetic.push_back(t);
    b.left_edges.push_back(edge_of(t.left, "a:" + t.id + ":l"));
    b.right_edges.push_back(edge_of(t.right, "a:" + t.id + ":r"));
  }
  for (int i = 0; i < batch_size_; ++i) {
    const size_t idx = draw(cur_b_);
    const ImageTensor& img = real_at(idx);
    b.real.push_back(img);
    b.real_edges.push_back(edge_of(img, "b:" + real_.entries[idx].id));
  }
  ++step_in_epoch_;
  if (step_in_epoch_ == steps_per_epoch_) {
    step_in_epoch_ = 0;
    ++epochs_completed_;
  }
  return b;
}

std::string BatchStream::state() const {
  std::ostringstream out;
  out << epochs_completed_ << " " << step_in_epoch_ << "\n";
  auto put_cursor = [&](const Cursor& c) {
    out << c.pos << " " << c.order.size();
    for (uint32_t v : c.order) out << " " << v;
    out << "\n";
  };
  put_cursor(cur_a_);
  put_cursor(cur_b_);
  out << rng_.serialize() << "\n";
  return out.str();
}

void BatchStream::restore(const std::string& s) {
  std::istringstream in(s);
  uint64_t epochs = 0;
  size_t step = 0;
  if (!(in >> epochs >> step)) {
    throw FormatError("batch stream state: bad position header");
  }
  auto get_cursor = [&](Cursor& c, size_t expect_n) {
    size_t pos = 0, n = 0;
    if (!(in >> pos >> n) || n != expect_n || pos > n) {
      throw FormatError("batch stream state: cursor mismatch");
    }
    std::vector<uint32_t> order(n);
    for (size_t i = 0; i < n; ++i) {
      if (!(in >> order[i]) || order[i] >= n) {
        throw FormatError("batch stream state: bad permutation");
      }
    }
    c.pos = pos;
    c.order = std::move(order);
  };
  get_cursor(cur_a_, synth_.entries.size());
  get_cursor(cur_b_, real_.entries.size());
  std::string rest((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  rng_.restore(rest);
  epochs_completed_ = epochs;
  step_in_epoch_ = step;
}

BatchStream make_batches(DatasetManifest synthetic, DatasetManifest real,
                         int batch_size, Rng rng) {
  return BatchStream(std::move(synthetic), std::move(real), batch_size,
                     std::move(rng));
}

}  // namespace s2r
