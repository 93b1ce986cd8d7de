#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "s2r/ad.hpp"
#include "s2r/data.hpp"
#include "s2r/tensor.hpp"

namespace s2r {

// Architecture knobs. The encoder widens by 2x per downsample; the
// discriminator's channel growth is capped at 4x base so the default
// configuration stays inside the intended parameter budget.
struct NetConfig {
  int base_channels = 64;
  int downsample_count = 2;
  int residual_blocks = 4;
  int input_channels = 3;
  int discriminator_layers = 4;

  int content_channels() const {
    return base_channels << downsample_count;
  }
  // Channel widths modulated by a style code: two normalization layers per
  // decoder residual block, all at content width.
  std::vector<int> style_widths() const {
    return std::vector<int>(2 * residual_blocks, content_channels());
  }
  void validate() const;  // all counts >= 1, else ConfigError
};

// Frozen per-domain modulation: one (gamma, beta) pair per decoder
// normalization layer. Drawn once at init and never updated.
struct StyleCode {
  std::vector<std::pair<std::vector<float>, std::vector<float>>> layers;

  bool same_shape(const StyleCode& o) const;
};

// One named trainable tensor plus its optimizer moments. Conv weights are
// shaped (out_channels, in_channels, kh*kw); biases (out_channels, 1, 1).
// Values are the float32 master copy; moments are kept in double so the
// update rule is deterministic and resumable.
struct ParamTensor {
  std::string name;
  int c = 0, h = 0, w = 0;
  std::vector<float> value;
  std::vector<double> m1, m2;

  size_t size() const { return value.size(); }
};

class ParamStore {
 public:
  ParamTensor& add(const std::string& name, int c, int h, int w);
  ParamTensor& at(const std::string& name);
  const ParamTensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<ParamTensor>& entries() { return params_; }
  const std::vector<ParamTensor>& entries() const { return params_; }

  size_t scalar_count() const;

 private:
  std::vector<ParamTensor> params_;
  std::map<std::string, size_t> index_;
};

struct ModelState {
  NetConfig cfg;
  ParamStore params;  // enc.*, dec.*, disc_a.*, disc_b.*
  StyleCode style_a;
  StyleCode style_b;
  uint64_t seed = 0;  // seed the state was initialized from
};

// Fan-in-scaled normal init for every conv weight (std = sqrt(2/fan_in)),
// zero biases; style codes i.i.d. standard normal, then frozen.
// Deterministic under the seed.
ModelState init_model(const NetConfig& cfg, uint64_t seed);

// Trainable scalars; frozen style codes are excluded.
size_t count_params(const ModelState& state);

// Same count computed from the architecture alone, without allocating the
// parameters.
size_t count_params(const NetConfig& cfg);

enum class CodeKind : uint8_t { kContent, kEdge, kContentEdge };

struct LatentCode {
  ImageTensor tensor;  // content_channels x rows/2^k x cols/2^k, Free
  CodeKind kind = CodeKind::kContent;
};

// Elementwise sum of a content and an edge code (ce = c + e).
LatentCode fuse(const LatentCode& content, const LatentCode& edge);

// Differentiable forward graphs over a caller-owned tape. The parameter
// partition is fixed at construction: generator leaves (enc.*, dec.*)
// track gradients iff train_generator, discriminator leaves iff
// train_discriminators. Each parameter becomes one leaf per graph,
// shared across calls, so leaves() after backward() yields every
// parameter gradient for the optimizer.
class ModelGraph {
 public:
  ModelGraph(ad::Tape& tape, const ModelState& state, bool train_generator,
             bool train_discriminators);

  // img: input_channels x h x w with h, w divisible by 2^downsample_count.
  ad::Var encode(ad::Var img);
  ad::Var decode(ad::Var ce, const StyleCode& style);
  ad::Var discriminate(char which, ad::Var img);  // 'a' or 'b'; logits map

  ad::Var leaf(const std::string& name);
  const std::map<std::string, ad::Var>& leaves() const { return leaves_; }
  ad::Tape& tape() { return *tape_; }

 private:
  ad::Tape* tape_;
  const ModelState* state_;
  bool train_generator_;
  bool train_discriminators_;
  std::map<std::string, ad::Var> leaves_;
};

// Convenience single-shot forwards on a private no-grad tape.
// encode replicates 1-channel edge maps to the encoder's input width and
// tags the result with `kind`.
LatentCode encode(const ModelState& state, const ImageTensor& img,
                  CodeKind kind);
std::vector<LatentCode> encode(const ModelState& state,
                               const std::vector<ImageTensor>& imgs,
                               CodeKind kind);
ImageTensor decode(const ModelState& state, const LatentCode& ce,
                   const StyleCode& style);
ImageTensor discriminate(const ModelState& state, char which,
                         const ImageTensor& img);

// Translates both views of a tuple into the real domain (style_b), fusing
// each view's edge code.
std::pair<ImageTensor, ImageTensor> translate_pair(const ModelState& state,
                                                   const StereoTuple& tuple,
                                                   const ImageTensor& left_edges,
                                                   const ImageTensor& right_edges);

}  // namespace s2r
