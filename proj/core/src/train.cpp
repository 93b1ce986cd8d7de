#include "s2r/train.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <sstream>

#include "s2r/errors.hpp"
#include "s2r/image_io.hpp"
#include "s2r/imageops.hpp"

namespace s2r {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0,1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (log_every < 1) throw ConfigError("log_every must be >= 1");
  weights.validate();
}

namespace {

bool is_disc_param(const std::string& name) {
  return name.rfind("disc", 0) == 0;
}

// Fuses the image's content code with the (replicated) edge map's code.
// With edges disabled the edge code is zero, i.e. the fuse is skipped.
ad::Var encode_fused(ModelGraph& g, ad::Var img, const ImageTensor* edges,
                     bool use_edges) {
  ad::Var c = g.encode(img);
  if (!use_edges || edges == nullptr) return c;
  const ImageTensor rep = edges->channels() == 1
                              ? replicate_channels(*edges, img.channels())
                              : *edges;
  const ad::Var e = g.encode(g.tape().input(ad::Tensor::from_image(rep)));
  return g.tape().add(c, e);
}

// Adam over one partition of the tape's parameter leaves. Returns the
// partition's gradient L2 norm. t is 1-based for bias correction.
double apply_adam(ModelState& state,
                  const std::map<std::string, ad::Var>& leaves,
                  bool disc_partition, const TrainConfig& cfg, uint64_t t) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  double sq = 0.0;
  for (const auto& [name, var] : leaves) {
    if (is_disc_param(name) != disc_partition) continue;
    const ad::Tensor& g = var.grad();
    ParamTensor& p = state.params.at(name);
    if (g.size() != p.size()) {
      throw ContractError("gradient/parameter size mismatch for " + name);
    }
    for (size_t i = 0; i < p.size(); ++i) {
      const double gi = g.v[i];
      sq += gi * gi;
      p.m1[i] = cfg.beta1 * p.m1[i] + (1.0 - cfg.beta1) * gi;
      p.m2[i] = cfg.beta2 * p.m2[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = p.m1[i] / bc1;
      const double vhat = p.m2[i] / bc2;
      p.value[i] = static_cast<float>(
          static_cast<double>(p.value[i]) -
          cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps));
    }
  }
  return std::sqrt(sq);
}

ad::Var batch_mean(ad::Tape& t, const std::vector<ad::Var>& terms) {
  std::vector<std::pair<double, ad::Var>> weighted;
  weighted.reserve(terms.size());
  const double inv = 1.0 / static_cast<double>(terms.size());
  for (ad::Var v : terms) weighted.emplace_back(inv, v);
  return t.weighted_sum(weighted);
}

}  // namespace

StepRecord train_step(ModelState& state, const Batch& batch,
                      const TrainConfig& cfg, uint64_t step_index) {
  cfg.validate();
  const size_t B = batch.synthetic.size();
  if (B == 0 || batch.real.size() != B) {
    throw ContractError("train_step: batch must pair synthetic and real "
                        "items one-to-one");
  }
  const auto t_start = std::chrono::steady_clock::now();
  StepRecord rec;
  rec.step = step_index;
  const uint64_t adam_t = step_index + 1;

  // ---- discriminator update on detached fakes --------------------------
  std::vector<ImageTensor> fake_ab(B), fake_ba(B);
  {
    ad::Tape t0;
    t0.set_grad_enabled(false);
    ModelGraph g0(t0, state, false, false);
    for (size_t i = 0; i < B; ++i) {
      const ad::Var xa =
          t0.input(ad::Tensor::from_image(batch.synthetic[i].left));
      const ad::Var cea =
          encode_fused(g0, xa, &batch.left_edges[i], cfg.use_edges);
      fake_ab[i] =
          g0.decode(cea, state.style_b).val().to_image(ValueDomain::kSigned);
      const ad::Var xb = t0.input(ad::Tensor::from_image(batch.real[i]));
      const ad::Var ceb =
          encode_fused(g0, xb, &batch.real_edges[i], cfg.use_edges);
      fake_ba[i] =
          g0.decode(ceb, state.style_a).val().to_image(ValueDomain::kSigned);
    }
  }
  {
    ad::Tape td;
    ModelGraph gd(td, state, false, true);
    std::vector<ad::Var> terms_a, terms_b;
    for (size_t i = 0; i < B; ++i) {
      const ad::Var real_a = gd.discriminate(
          'a', td.input(ad::Tensor::from_image(batch.synthetic[i].left)));
      const ad::Var fk_a = gd.discriminate(
          'a', td.input(ad::Tensor::from_image(fake_ba[i])));
      terms_a.push_back(adversarial_d_node(td, real_a, fk_a));
      const ad::Var real_b = gd.discriminate(
          'b', td.input(ad::Tensor::from_image(batch.real[i])));
      const ad::Var fk_b = gd.discriminate(
          'b', td.input(ad::Tensor::from_image(fake_ab[i])));
      terms_b.push_back(adversarial_d_node(td, real_b, fk_b));
    }
    const ad::Var adv_d_a = batch_mean(td, terms_a);
    const ad::Var adv_d_b = batch_mean(td, terms_b);
    const ad::Var total_d = td.add(adv_d_a, adv_d_b);
    rec.losses.total_d =
        total_discriminator_loss(adv_d_a.scalar(), adv_d_b.scalar());
    td.backward(total_d);
    rec.grad_norm_d = apply_adam(state, gd.leaves(), true, cfg, adam_t);
  }

  // ---- generator update against the updated discriminators -------------
  {
    ad::Tape tg;
    ModelGraph gg(tg, state, true, false);
    std::vector<ad::Var> rec_aa_v, rec_bb_v, cyc_aba_v, cyc_bab_v, adv_a_v,
        adv_b_v, warp_v;
    for (size_t i = 0; i < B; ++i) {
      const StereoTuple& tup = batch.synthetic[i];
      const ad::Var xa = tg.input(ad::Tensor::from_image(tup.left));
      const ad::Var cea =
          encode_fused(gg, xa, &batch.left_edges[i], cfg.use_edges);
      const ad::Var x_aa = gg.decode(cea, state.style_a);
      rec_aa_v.push_back(l1_node(tg, xa, x_aa));
      const ad::Var x_ab = gg.decode(cea, state.style_b);
      // cycle back with edges recomputed from the (detached) translation
      const ImageTensor e_ab =
          sobel_edges(x_ab.val().to_image(ValueDomain::kSigned));
      const ad::Var ce_ab = encode_fused(gg, x_ab, &e_ab, cfg.use_edges);
      const ad::Var x_aba = gg.decode(ce_ab, state.style_a);
      cyc_aba_v.push_back(l1_node(tg, xa, x_aba));
      adv_b_v.push_back(
          adversarial_g_node(tg, gg.discriminate('b', x_ab)));

      const ad::Var xb = tg.input(ad::Tensor::from_image(batch.real[i]));
      const ad::Var ceb =
          encode_fused(gg, xb, &batch.real_edges[i], cfg.use_edges);
      const ad::Var x_bb = gg.decode(ceb, state.style_b);
      rec_bb_v.push_back(l1_node(tg, xb, x_bb));
      const ad::Var x_ba = gg.decode(ceb, state.style_a);
      const ImageTensor e_ba =
          sobel_edges(x_ba.val().to_image(ValueDomain::kSigned));
      const ad::Var ce_ba = encode_fused(gg, x_ba, &e_ba, cfg.use_edges);
      const ad::Var x_bab = gg.decode(ce_ba, state.style_b);
      cyc_bab_v.push_back(l1_node(tg, xb, x_bab));
      adv_a_v.push_back(
          adversarial_g_node(tg, gg.discriminate('a', x_ba)));

      if (cfg.use_warp) {
        const ad::Var xr = tg.input(ad::Tensor::from_image(tup.right));
        const ad::Var cer =
            encode_fused(gg, xr, &batch.right_edges[i], cfg.use_edges);
        const ad::Var right_ab = gg.decode(cer, state.style_b);
        warp_v.push_back(warp_loss_node(tg, x_ab, right_ab, tup.disparity,
                                        batch.disparity_sign, cfg.weights));
      }
    }
    const ad::Var rec_aa = batch_mean(tg, rec_aa_v);
    const ad::Var rec_bb = batch_mean(tg, rec_bb_v);
    const ad::Var cyc_aba = batch_mean(tg, cyc_aba_v);
    const ad::Var cyc_bab = batch_mean(tg, cyc_bab_v);
    const ad::Var adv_a = batch_mean(tg, adv_a_v);
    const ad::Var adv_b = batch_mean(tg, adv_b_v);
    std::vector<std::pair<double, ad::Var>> total_terms{
        {cfg.weights.lambda3, rec_aa}, {cfg.weights.lambda3, rec_bb},
        {cfg.weights.lambda4, cyc_aba}, {cfg.weights.lambda4, cyc_bab},
        {cfg.weights.lambda5, adv_a},  {cfg.weights.lambda5, adv_b}};
    if (cfg.use_warp) {
      const ad::Var warp = batch_mean(tg, warp_v);
      total_terms.emplace_back(1.0, warp);
      rec.losses.warp = warp.scalar();
    }
    const ad::Var total_g = tg.weighted_sum(total_terms);
    rec.losses.rec_aa = rec_aa.scalar();
    rec.losses.rec_bb = rec_bb.scalar();
    rec.losses.cyc_aba = cyc_aba.scalar();
    rec.losses.cyc_bab = cyc_bab.scalar();
    rec.losses.adv_a = adv_a.scalar();
    rec.losses.adv_b = adv_b.scalar();
    // recompose from parts: checks finiteness and the weighted-sum identity
    rec.losses.total_g = total_generator_loss(rec.losses, cfg.weights);
    tg.backward(total_g);
    rec.grad_norm_g = apply_adam(state, gg.leaves(), false, cfg, adam_t);
  }

  const auto t_end = std::chrono::steady_clock::now();
  rec.wall_ms =
      std::chrono::duration<double, std::milli>(t_end - t_start).count();
  if (!std::isfinite(rec.grad_norm_g) || !std::isfinite(rec.grad_norm_d)) {
    throw NumericError("non-finite gradient norm at step " +
                       std::to_string(step_index));
  }
  return rec;
}

// ---------------------------------------------------------------------------
// checkpoint container: "S2RC", u32 version, u32 section count, then
// length-prefixed named sections. All integers little-endian.

namespace {

constexpr uint32_t kCheckpointVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = __builtin_bswap32(v);
  }
  out.append(reinterpret_cast<const char*>(&v), 4);
}

void put_u64(std::string& out, uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = __builtin_bswap64(v);
  }
  out.append(reinterpret_cast<const char*>(&v), 8);
}

void put_f32(std::string& out, float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

void put_f64(std::string& out, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(out, bits);
}

void put_section(std::string& out, const std::string& name,
                 const std::string& payload) {
  put_u32(out, static_cast<uint32_t>(name.size()));
  out += name;
  put_u64(out, payload.size());
  out += payload;
}

struct Reader {
  const std::string& s;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > s.size()) throw FormatError("truncated checkpoint");
  }
  uint32_t u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, s.data() + pos, 4);
    pos += 4;
    if constexpr (std::endian::native == std::endian::big) {
      v = __builtin_bswap32(v);
    }
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v;
    std::memcpy(&v, s.data() + pos, 8);
    pos += 8;
    if constexpr (std::endian::native == std::endian::big) {
      v = __builtin_bswap64(v);
    }
    return v;
  }
  float f32() {
    const uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }
  double f64() {
    const uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string out = s.substr(pos, n);
    pos += n;
    return out;
  }
};

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string config_text(const NetConfig& net, const TrainConfig& train) {
  std::ostringstream o;
  o << "net.base_channels=" << net.base_channels << "\n"
    << "net.downsample_count=" << net.downsample_count << "\n"
    << "net.residual_blocks=" << net.residual_blocks << "\n"
    << "net.input_channels=" << net.input_channels << "\n"
    << "net.discriminator_layers=" << net.discriminator_layers << "\n"
    << "train.epochs=" << train.epochs << "\n"
    << "train.batch_size=" << train.batch_size << "\n"
    << "train.learning_rate=" << fmt_double(train.learning_rate) << "\n"
    << "train.beta1=" << fmt_double(train.beta1) << "\n"
    << "train.beta2=" << fmt_double(train.beta2) << "\n"
    << "train.adam_eps=" << fmt_double(train.adam_eps) << "\n"
    << "train.lambda1=" << fmt_double(train.weights.lambda1) << "\n"
    << "train.lambda2=" << fmt_double(train.weights.lambda2) << "\n"
    << "train.lambda3=" << fmt_double(train.weights.lambda3) << "\n"
    << "train.lambda4=" << fmt_double(train.weights.lambda4) << "\n"
    << "train.lambda5=" << fmt_double(train.weights.lambda5) << "\n"
    << "train.use_edges=" << (train.use_edges ? 1 : 0) << "\n"
    << "train.use_warp=" << (train.use_warp ? 1 : 0) << "\n"
    << "train.seed=" << train.seed << "\n"
    << "train.checkpoint_every=" << train.checkpoint_every << "\n"
    << "train.log_every=" << train.log_every << "\n";
  return o.str();
}

void parse_config_text(const std::string& text, NetConfig& net,
                       TrainConfig& train) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("checkpoint config: bad line '" + line + "'");
    }
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    try {
      if (key == "net.base_channels") net.base_channels = std::stoi(val);
      else if (key == "net.downsample_count") net.downsample_count = std::stoi(val);
      else if (key == "net.residual_blocks") net.residual_blocks = std::stoi(val);
      else if (key == "net.input_channels") net.input_channels = std::stoi(val);
      else if (key == "net.discriminator_layers") net.discriminator_layers = std::stoi(val);
      else if (key == "train.epochs") train.epochs = std::stoi(val);
      else if (key == "train.batch_size") train.batch_size = std::stoi(val);
      else if (key == "train.learning_rate") train.learning_rate = std::stod(val);
      else if (key == "train.beta1") train.beta1 = std::stod(val);
      else if (key == "train.beta2") train.beta2 = std::stod(val);
      else if (key == "train.adam_eps") train.adam_eps = std::stod(val);
      else if (key == "train.lambda1") train.weights.lambda1 = std::stod(val);
      else if (key == "train.lambda2") train.weights.lambda2 = std::stod(val);
      else if (key == "train.lambda3") train.weights.lambda3 = std::stod(val);
      else if (key == "train.lambda4") train.weights.lambda4 = std::stod(val);
      else if (key == "train.lambda5") train.weights.lambda5 = std::stod(val);
      else if (key == "train.use_edges") train.use_edges = std::stoi(val) != 0;
      else if (key == "train.use_warp") train.use_warp = std::stoi(val) != 0;
      else if (key == "train.seed") train.seed = std::stoull(val);
      else if (key == "train.checkpoint_every") train.checkpoint_every = std::stoi(val);
      else if (key == "train.log_every") train.log_every = std::stoi(val);
      else throw FormatError("checkpoint config: unknown key '" + key + "'");
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception&) {
      throw FormatError("checkpoint config: bad value for '" + key + "'");
    }
  }
}

std::string style_payload(const StyleCode& s) {
  std::string p;
  put_u32(p, static_cast<uint32_t>(s.layers.size()));
  for (const auto& [gamma, beta] : s.layers) {
    put_u32(p, static_cast<uint32_t>(gamma.size()));
    for (float g : gamma) put_f32(p, g);
    for (float b : beta) put_f32(p, b);
  }
  return p;
}

StyleCode parse_style(const std::string& payload) {
  Reader r{payload};
  StyleCode s;
  const uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) {
    const uint32_t width = r.u32();
    std::vector<float> gamma(width), beta(width);
    for (float& g : gamma) g = r.f32();
    for (float& b : beta) b = r.f32();
    s.layers.emplace_back(std::move(gamma), std::move(beta));
  }
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::string out = "S2RC";
  put_u32(out, kCheckpointVersion);
  const auto& params = ck.state.params.entries();
  const uint32_t sections = 5 + static_cast<uint32_t>(params.size()) +
                            (ck.stream_state.empty() ? 0 : 1);
  put_u32(out, sections);
  put_section(out, "config", config_text(ck.state.cfg, ck.cfg));
  {
    std::string p;
    put_u64(p, ck.state.seed);
    put_section(out, "seed", p);
  }
  {
    std::string p;
    put_u64(p, ck.step);
    put_section(out, "step", p);
  }
  for (const ParamTensor& pt : params) {
    std::string p;
    p.reserve(12 + pt.size() * 20);
    put_u32(p, static_cast<uint32_t>(pt.c));
    put_u32(p, static_cast<uint32_t>(pt.h));
    put_u32(p, static_cast<uint32_t>(pt.w));
    for (float v : pt.value) put_f32(p, v);
    for (double m : pt.m1) put_f64(p, m);
    for (double m : pt.m2) put_f64(p, m);
    put_section(out, "param." + pt.name, p);
  }
  put_section(out, "style.a", style_payload(ck.state.style_a));
  put_section(out, "style.b", style_payload(ck.state.style_b));
  if (!ck.stream_state.empty()) put_section(out, "stream", ck.stream_state);
  write_bytes_atomic(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string bytes = read_bytes(path);
  Reader r{bytes};
  if (r.bytes(4) != "S2RC") {
    throw FormatError(path + ": bad checkpoint magic");
  }
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(path + ": unsupported checkpoint version " +
                      std::to_string(version));
  }
  const uint32_t sections = r.u32();
  Checkpoint ck;
  bool have_config = false, have_style_a = false, have_style_b = false;
  for (uint32_t i = 0; i < sections; ++i) {
    const uint32_t name_len = r.u32();
    const std::string name = r.bytes(name_len);
    const uint64_t payload_len = r.u64();
    const std::string payload = r.bytes(payload_len);
    if (name == "config") {
      parse_config_text(payload, ck.state.cfg, ck.cfg);
      have_config = true;
    } else if (name == "seed") {
      Reader pr{payload};
      ck.state.seed = pr.u64();
    } else if (name == "step") {
      Reader pr{payload};
      ck.step = pr.u64();
    } else if (name.rfind("param.", 0) == 0) {
      Reader pr{payload};
      const int c = static_cast<int>(pr.u32());
      const int h = static_cast<int>(pr.u32());
      const int w = static_cast<int>(pr.u32());
      ParamTensor& pt = ck.state.params.add(name.substr(6), c, h, w);
      for (float& v : pt.value) v = pr.f32();
      for (double& m : pt.m1) m = pr.f64();
      for (double& m : pt.m2) m = pr.f64();
    } else if (name == "style.a") {
      ck.state.style_a = parse_style(payload);
      have_style_a = true;
    } else if (name == "style.b") {
      ck.state.style_b = parse_style(payload);
      have_style_b = true;
    } else if (name == "stream") {
      ck.stream_state = payload;
    } else {
      throw FormatError(path + ": unknown checkpoint section '" + name + "'");
    }
  }
  if (r.pos != bytes.size()) {
    throw FormatError(path + ": trailing bytes after last section");
  }
  if (!have_config || !have_style_a || !have_style_b) {
    throw FormatError(path + ": missing required sections");
  }
  ck.state.cfg.validate();
  return ck;
}

std::string run_log_header() {
  return "step\trec_aa\trec_bb\tcyc_aba\tcyc_bab\tadv_a\tadv_b\twarp\t"
         "total_g\ttotal_d\tgrad_norm_g\tgrad_norm_d\n";
}

std::string format_record(const StepRecord& r) {
  std::ostringstream o;
  o << r.step;
  const double vals[] = {r.losses.rec_aa, r.losses.rec_bb, r.losses.cyc_aba,
                         r.losses.cyc_bab, r.losses.adv_a, r.losses.adv_b,
                         r.losses.warp, r.losses.total_g, r.losses.total_d,
                         r.grad_norm_g, r.grad_norm_d};
  for (double v : vals) o << "\t" << fmt_double(v);
  o << "\n";
  return o.str();
}

namespace {

void verify_styles_frozen(const ModelState& state, const StyleCode& a0,
                          const StyleCode& b0) {
  auto same = [](const StyleCode& x, const StyleCode& y) {
    if (x.layers.size() != y.layers.size()) return false;
    for (size_t i = 0; i < x.layers.size(); ++i) {
      if (x.layers[i].first != y.layers[i].first ||
          x.layers[i].second != y.layers[i].second) {
        return false;
      }
    }
    return true;
  };
  if (!same(state.style_a, a0) || !same(state.style_b, b0)) {
    throw ContractError("style codes changed during training");
  }
}

std::string step_checkpoint_name(uint64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "checkpoint_%06llu.s2rc",
                static_cast<unsigned long long>(step));
  return buf;
}

}  // namespace

FitResult fit(ModelState& state, BatchStream& stream, const TrainConfig& cfg,
              const std::string& run_dir, uint64_t start_step) {
  cfg.validate();
  const uint64_t total =
      static_cast<uint64_t>(cfg.epochs) * stream.steps_per_epoch();
  if (start_step > total) {
    throw ConfigError("resume step " + std::to_string(start_step) +
                      " is beyond the configured run length " +
                      std::to_string(total));
  }
  const StyleCode style_a0 = state.style_a;
  const StyleCode style_b0 = state.style_b;
  if (!run_dir.empty()) std::filesystem::create_directories(run_dir);
  std::string log = run_log_header();
  std::string timing = "step\twall_ms\n";
  FitResult res;
  auto checkpoint_to = [&](const std::string& name, uint64_t next_step) {
    verify_styles_frozen(state, style_a0, style_b0);
    Checkpoint ck;
    ck.state = state;
    ck.cfg = cfg;
    ck.step = next_step;
    ck.stream_state = stream.state();
    save_checkpoint(run_dir + "/" + name, ck);
  };
  for (uint64_t s = start_step; s < total; ++s) {
    const Batch batch = stream.next();
    StepRecord r = train_step(state, batch, cfg, s);
    if (s % static_cast<uint64_t>(cfg.log_every) == 0 || s + 1 == total) {
      log += format_record(r);
    }
    timing += std::to_string(r.step) + "\t" + fmt_double(r.wall_ms) + "\n";
    res.records.push_back(std::move(r));
    if (!run_dir.empty() && cfg.checkpoint_every > 0 &&
        (s + 1) % static_cast<uint64_t>(cfg.checkpoint_every) == 0 &&
        s + 1 != total) {
      checkpoint_to(step_checkpoint_name(s + 1), s + 1);
    }
  }
  verify_styles_frozen(state, style_a0, style_b0);
  res.final_step = total;
  if (!run_dir.empty()) {
    checkpoint_to("checkpoint_final.s2rc", total);
    write_bytes_atomic(run_dir + "/run_log.tsv", log);
    write_bytes_atomic(run_dir + "/timing.tsv", timing);
  }
  return res;
}

}  // namespace s2r
