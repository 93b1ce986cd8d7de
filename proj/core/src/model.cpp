#include "s2r/model.hpp"

#include <algorithm>
#include <cmath>

#include "s2r/errors.hpp"
#include "s2r/imageops.hpp"
#include "s2r/rng.hpp"

namespace s2r {

void NetConfig::validate() const {
  auto need = [](int v, const char* field) {
    if (v < 1) {
      throw ConfigError(std::string(field) + " must be >= 1, got " +
                        std::to_string(v));
    }
  };
  need(base_channels, "base_channels");
  need(downsample_count, "downsample_count");
  need(residual_blocks, "residual_blocks");
  need(input_channels, "input_channels");
  need(discriminator_layers, "discriminator_layers");
}

bool StyleCode::same_shape(const StyleCode& o) const {
  if (layers.size() != o.layers.size()) return false;
  for (size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].first.size() != o.layers[i].first.size() ||
        layers[i].second.size() != o.layers[i].second.size()) {
      return false;
    }
  }
  return true;
}

ParamTensor& ParamStore::add(const std::string& name, int c, int h, int w) {
  if (contains(name)) throw ContractError("duplicate parameter " + name);
  ParamTensor p;
  p.name = name;
  p.c = c;
  p.h = h;
  p.w = w;
  const size_t n = static_cast<size_t>(c) * h * w;
  p.value.assign(n, 0.0f);
  p.m1.assign(n, 0.0);
  p.m2.assign(n, 0.0);
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return params_.back();
}

ParamTensor& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter " + name);
  return params_[it->second];
}

const ParamTensor& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter " + name);
  return params_[it->second];
}

bool ParamStore::contains(const std::string& name) const {
  return index_.count(name) != 0;
}

size_t ParamStore::scalar_count() const {
  size_t n = 0;
  for (const ParamTensor& p : params_) n += p.size();
  return n;
}

namespace {

struct ConvSpec {
  std::string name;
  int oc, ic, kh, kw;
};

// Parameter creation order; also the checkpoint and init order.
std::vector<ConvSpec> conv_specs(const NetConfig& cfg) {
  std::vector<ConvSpec> v;
  const int cc = cfg.content_channels();
  v.push_back({"enc.in", cfg.base_channels, cfg.input_channels, 7, 7});
  int ch = cfg.base_channels;
  for (int d = 0; d < cfg.downsample_count; ++d) {
    v.push_back({"enc.down" + std::to_string(d), ch * 2, ch, 4, 4});
    ch *= 2;
  }
  for (int r = 0; r < cfg.residual_blocks; ++r) {
    const std::string b = "enc.res" + std::to_string(r);
    v.push_back({b + ".c0", cc, cc, 3, 3});
    v.push_back({b + ".c1", cc, cc, 3, 3});
  }
  for (int r = 0; r < cfg.residual_blocks; ++r) {
    const std::string b = "dec.res" + std::to_string(r);
    v.push_back({b + ".c0", cc, cc, 3, 3});
    v.push_back({b + ".c1", cc, cc, 3, 3});
  }
  ch = cc;
  for (int u = 0; u < cfg.downsample_count; ++u) {
    v.push_back({"dec.up" + std::to_string(u), ch / 2, ch, 5, 5});
    ch /= 2;
  }
  v.push_back({"dec.out", cfg.input_channels, ch, 7, 7});
  for (const char* which : {"disc_a", "disc_b"}) {
    int in = cfg.input_channels;
    for (int l = 0; l < cfg.discriminator_layers; ++l) {
      // growth capped at 4x base to stay inside the parameter budget
      const int out = cfg.base_channels * std::min(1 << l, 4);
      v.push_back({std::string(which) + ".l" + std::to_string(l), out, in, 4,
                   4});
      in = out;
    }
    v.push_back({std::string(which) + ".out", 1, in, 4, 4});
  }
  return v;
}

StyleCode draw_style(const NetConfig& cfg, Rng& rng) {
  StyleCode s;
  for (int width : cfg.style_widths()) {
    std::vector<float> gamma(width), beta(width);
    for (float& g : gamma) g = static_cast<float>(rng.normal());
    for (float& b : beta) b = static_cast<float>(rng.normal());
    s.layers.emplace_back(std::move(gamma), std::move(beta));
  }
  return s;
}

}  // namespace

ModelState init_model(const NetConfig& cfg, uint64_t seed) {
  cfg.validate();
  ModelState state;
  state.cfg = cfg;
  state.seed = seed;
  Rng rng(Rng::derive(seed, 0));
  for (const ConvSpec& cs : conv_specs(cfg)) {
    ParamTensor& w = state.params.add(cs.name + ".w", cs.oc, cs.ic,
                                      cs.kh * cs.kw);
    const double std_dev = std::sqrt(2.0 / (static_cast<double>(cs.ic) *
                                            cs.kh * cs.kw));
    for (float& v : w.value) {
      v = static_cast<float>(std_dev * rng.normal());
    }
    state.params.add(cs.name + ".b", cs.oc, 1, 1);  // zero biases
  }
  state.style_a = draw_style(cfg, rng);
  state.style_b = draw_style(cfg, rng);
  return state;
}

size_t count_params(const ModelState& state) {
  return state.params.scalar_count();
}

size_t count_params(const NetConfig& cfg) {
  cfg.validate();
  size_t n = 0;
  for (const ConvSpec& cs : conv_specs(cfg)) {
    n += static_cast<size_t>(cs.oc) * cs.ic * cs.kh * cs.kw;  // weights
    n += static_cast<size_t>(cs.oc);                          // biases
  }
  return n;
}

LatentCode fuse(const LatentCode& content, const LatentCode& edge) {
  if (content.kind != CodeKind::kContent || edge.kind != CodeKind::kEdge) {
    throw ContractError("fuse: expects a Content and an Edge code");
  }
  if (!content.tensor.same_dims(edge.tensor)) {
    throw DimensionError("fuse: code dims mismatch");
  }
  LatentCode out;
  out.kind = CodeKind::kContentEdge;
  out.tensor = content.tensor;
  for (size_t i = 0; i < out.tensor.size(); ++i) {
    out.tensor.data()[i] += edge.tensor.data()[i];
  }
  return out;
}

ModelGraph::ModelGraph(ad::Tape& tape, const ModelState& state,
                       bool train_generator, bool train_discriminators)
    : tape_(&tape),
      state_(&state),
      train_generator_(train_generator),
      train_discriminators_(train_discriminators) {
  state.cfg.validate();
}

ad::Var ModelGraph::leaf(const std::string& name) {
  auto it = leaves_.find(name);
  if (it != leaves_.end()) return it->second;
  const ParamTensor& p = state_->params.at(name);
  ad::Tensor t(p.c, p.h, p.w);
  for (size_t i = 0; i < p.value.size(); ++i) {
    t.v[i] = static_cast<double>(p.value[i]);
  }
  const bool is_disc = name.rfind("disc", 0) == 0;
  const bool rg = is_disc ? train_discriminators_ : train_generator_;
  const ad::Var v = tape_->input(std::move(t), rg);
  leaves_.emplace(name, v);
  return v;
}

namespace {

ad::Var conv_block(ModelGraph& g, ad::Var x, const std::string& name, int k,
                   int stride, int pad) {
  return g.tape().conv2d(x, g.leaf(name + ".w"), g.leaf(name + ".b"), k, k,
                         stride, pad);
}

std::vector<double> widen(const std::vector<float>& v) {
  return std::vector<double>(v.begin(), v.end());
}

}  // namespace

ad::Var ModelGraph::encode(ad::Var img) {
  const NetConfig& cfg = state_->cfg;
  const ad::Tensor& t = img.val();
  if (t.c != cfg.input_channels) {
    throw DimensionError("encode: expected " +
                         std::to_string(cfg.input_channels) + " channels, got " +
                         std::to_string(t.c));
  }
  const int div = 1 << cfg.downsample_count;
  if (t.h % div != 0 || t.w % div != 0) {
    throw DimensionError("encode: spatial dims " + std::to_string(t.h) + "x" +
                         std::to_string(t.w) + " not divisible by " +
                         std::to_string(div));
  }
  ad::Tape& tp = *tape_;
  ad::Var x = tp.relu(tp.instance_norm(conv_block(*this, img, "enc.in", 7, 1,
                                                  3)));
  for (int d = 0; d < cfg.downsample_count; ++d) {
    x = tp.relu(tp.instance_norm(
        conv_block(*this, x, "enc.down" + std::to_string(d), 4, 2, 1)));
  }
  for (int r = 0; r < cfg.residual_blocks; ++r) {
    const std::string b = "enc.res" + std::to_string(r);
    ad::Var h = tp.relu(tp.instance_norm(conv_block(*this, x, b + ".c0", 3, 1,
                                                    1)));
    h = tp.instance_norm(conv_block(*this, h, b + ".c1", 3, 1, 1));
    x = tp.add(x, h);
  }
  return x;
}

ad::Var ModelGraph::decode(ad::Var ce, const StyleCode& style) {
  const NetConfig& cfg = state_->cfg;
  const std::vector<int> widths = cfg.style_widths();
  if (style.layers.size() != widths.size()) {
    throw ContractError("decode: style code has " +
                        std::to_string(style.layers.size()) + " layers, net "
                        "needs " + std::to_string(widths.size()));
  }
  for (size_t i = 0; i < widths.size(); ++i) {
    if (static_cast<int>(style.layers[i].first.size()) != widths[i] ||
        static_cast<int>(style.layers[i].second.size()) != widths[i]) {
      throw ContractError("decode: style vector width mismatch at layer " +
                          std::to_string(i));
    }
  }
  if (ce.val().c != cfg.content_channels()) {
    throw DimensionError("decode: code has " + std::to_string(ce.val().c) +
                         " channels, expected " +
                         std::to_string(cfg.content_channels()));
  }
  ad::Tape& tp = *tape_;
  ad::Var x = ce;
  for (int r = 0; r < cfg.residual_blocks; ++r) {
    const std::string b = "dec.res" + std::to_string(r);
    const auto& [g0, b0] = style.layers[2 * r];
    const auto& [g1, b1] = style.layers[2 * r + 1];
    ad::Var h = conv_block(*this, x, b + ".c0", 3, 1, 1);
    h = tp.relu(tp.channel_affine(tp.instance_norm(h), widen(g0), widen(b0)));
    h = conv_block(*this, h, b + ".c1", 3, 1, 1);
    h = tp.channel_affine(tp.instance_norm(h), widen(g1), widen(b1));
    x = tp.add(x, h);
  }
  for (int u = 0; u < cfg.downsample_count; ++u) {
    x = tp.upsample_nearest2(x);
    x = conv_block(*this, x, "dec.up" + std::to_string(u), 5, 1, 2);
    x = tp.relu(tp.layer_norm(x));
  }
  return tp.tanh_(conv_block(*this, x, "dec.out", 7, 1, 3));
}

ad::Var ModelGraph::discriminate(char which, ad::Var img) {
  if (which != 'a' && which != 'b') {
    throw ContractError("discriminate: domain must be 'a' or 'b'");
  }
  const NetConfig& cfg = state_->cfg;
  if (img.val().c != cfg.input_channels) {
    throw DimensionError("discriminate: channel count mismatch");
  }
  const std::string p = which == 'a' ? "disc_a" : "disc_b";
  ad::Tape& tp = *tape_;
  ad::Var x = img;
  for (int l = 0; l < cfg.discriminator_layers; ++l) {
    x = conv_block(*this, x, p + ".l" + std::to_string(l), 4, 2, 1);
    if (l > 0) x = tp.instance_norm(x);
    x = tp.leaky_relu(x, 0.2);
  }
  return conv_block(*this, x, p + ".out", 4, 1, 1);
}

namespace {

ImageTensor prep_encoder_input(const ModelState& state,
                               const ImageTensor& img) {
  if (img.channels() == 1 && state.cfg.input_channels > 1) {
    return replicate_channels(img, state.cfg.input_channels);
  }
  return img;
}

}  // namespace

LatentCode encode(const ModelState& state, const ImageTensor& img,
                  CodeKind kind) {
  if (kind == CodeKind::kContentEdge) {
    throw ContractError("encode: kind must be Content or Edge");
  }
  ad::Tape tape;
  tape.set_grad_enabled(false);
  ModelGraph g(tape, state, false, false);
  const ImageTensor in = prep_encoder_input(state, img);
  const ad::Var code = g.encode(tape.input(ad::Tensor::from_image(in)));
  return LatentCode{code.val().to_image(ValueDomain::kFree), kind};
}

std::vector<LatentCode> encode(const ModelState& state,
                               const std::vector<ImageTensor>& imgs,
                               CodeKind kind) {
  std::vector<LatentCode> out;
  out.reserve(imgs.size());
  for (const ImageTensor& img : imgs) out.push_back(encode(state, img, kind));
  return out;
}

ImageTensor decode(const ModelState& state, const LatentCode& ce,
                   const StyleCode& style) {
  if (ce.kind != CodeKind::kContentEdge) {
    throw ContractError("decode: code must be a fused ContentEdge code");
  }
  ad::Tape tape;
  tape.set_grad_enabled(false);
  ModelGraph g(tape, state, false, false);
  const ad::Var out =
      g.decode(tape.input(ad::Tensor::from_image(ce.tensor)), style);
  return out.val().to_image(ValueDomain::kSigned);
}

ImageTensor discriminate(const ModelState& state, char which,
                         const ImageTensor& img) {
  ad::Tape tape;
  tape.set_grad_enabled(false);
  ModelGraph g(tape, state, false, false);
  const ad::Var out =
      g.discriminate(which, tape.input(ad::Tensor::from_image(img)));
  return out.val().to_image(ValueDomain::kFree);
}

std::pair<ImageTensor, ImageTensor> translate_pair(
    const ModelState& state, const StereoTuple& tuple,
    const ImageTensor& left_edges, const ImageTensor& right_edges) {
  auto translate = [&](const ImageTensor& img, const ImageTensor& edges) {
    const LatentCode c = encode(state, img, CodeKind::kContent);
    const LatentCode e = encode(state, edges, CodeKind::kEdge);
    return decode(state, fuse(c, e), state.style_b);
  };
  return {translate(tuple.left, left_edges),
          translate(tuple.right, right_edges)};
}

}  // namespace s2r
