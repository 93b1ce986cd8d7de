#include "s2r/commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <vector>

#include "json.hpp"

#include "s2r/data.hpp"
#include "s2r/errors.hpp"
#include "s2r/image_io.hpp"
#include "s2r/imageops.hpp"

namespace s2r {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& scope,
                const std::vector<std::string>& allowed,
                std::vector<std::string>& issues) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const std::string& a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) issues.push_back(scope + key + ": unknown field");
  }
}

template <typename T>
void get_field(const json& obj, const std::string& scope, const char* key,
               T& out, std::vector<std::string>& issues) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    issues.push_back(scope + key + ": wrong type");
  }
}

void raise_issues(const std::string& origin,
                  const std::vector<std::string>& issues) {
  if (issues.empty()) return;
  std::string msg = origin + ": invalid config:";
  for (const std::string& s : issues) msg += "\n  " + s;
  throw ConfigError(msg);
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text,
                                    const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (!root.is_object()) throw ConfigError(origin + ": top level must be an object");
  RunConfig cfg;
  std::vector<std::string> issues;
  check_keys(root, "", {"net", "train", "data", "run_dir"}, issues);
  get_field(root, "", "run_dir", cfg.run_dir, issues);
  if (root.contains("net")) {
    const json& net = root["net"];
    if (!net.is_object()) {
      issues.push_back("net: must be an object");
    } else {
      check_keys(net, "net.",
                 {"base_channels", "downsample_count", "residual_blocks",
                  "input_channels", "discriminator_layers"},
                 issues);
      get_field(net, "net.", "base_channels", cfg.net.base_channels, issues);
      get_field(net, "net.", "downsample_count", cfg.net.downsample_count,
                issues);
      get_field(net, "net.", "residual_blocks", cfg.net.residual_blocks,
                issues);
      get_field(net, "net.", "input_channels", cfg.net.input_channels, issues);
      get_field(net, "net.", "discriminator_layers",
                cfg.net.discriminator_layers, issues);
    }
  }
  if (root.contains("train")) {
    const json& tr = root["train"];
    if (!tr.is_object()) {
      issues.push_back("train: must be an object");
    } else {
      check_keys(tr, "train.",
                 {"epochs", "batch_size", "learning_rate", "beta1", "beta2",
                  "adam_eps", "lambda1", "lambda2", "lambda3", "lambda4",
                  "lambda5", "use_edges", "use_warp", "seed",
                  "checkpoint_every", "log_every"},
                 issues);
      get_field(tr, "train.", "epochs", cfg.train.epochs, issues);
      get_field(tr, "train.", "batch_size", cfg.train.batch_size, issues);
      get_field(tr, "train.", "learning_rate", cfg.train.learning_rate,
                issues);
      get_field(tr, "train.", "beta1", cfg.train.beta1, issues);
      get_field(tr, "train.", "beta2", cfg.train.beta2, issues);
      get_field(tr, "train.", "adam_eps", cfg.train.adam_eps, issues);
      get_field(tr, "train.", "lambda1", cfg.train.weights.lambda1, issues);
      get_field(tr, "train.", "lambda2", cfg.train.weights.lambda2, issues);
      get_field(tr, "train.", "lambda3", cfg.train.weights.lambda3, issues);
      get_field(tr, "train.", "lambda4", cfg.train.weights.lambda4, issues);
      get_field(tr, "train.", "lambda5", cfg.train.weights.lambda5, issues);
      get_field(tr, "train.", "use_edges", cfg.train.use_edges, issues);
      get_field(tr, "train.", "use_warp", cfg.train.use_warp, issues);
      get_field(tr, "train.", "seed", cfg.train.seed, issues);
      get_field(tr, "train.", "checkpoint_every", cfg.train.checkpoint_every,
                issues);
      get_field(tr, "train.", "log_every", cfg.train.log_every, issues);
    }
  }
  if (root.contains("data")) {
    const json& data = root["data"];
    if (!data.is_object()) {
      issues.push_back("data: must be an object");
    } else {
      check_keys(data, "data.", {"synthetic_manifest", "real_manifest"},
                 issues);
      get_field(data, "data.", "synthetic_manifest", cfg.synthetic_manifest,
                issues);
      get_field(data, "data.", "real_manifest", cfg.real_manifest, issues);
    }
  }
  raise_issues(origin, issues);
  return cfg;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  return from_json_text(read_bytes(path), path);
}

std::string RunConfig::to_json_text() const {
  json root;
  root["net"] = {{"base_channels", net.base_channels},
                 {"downsample_count", net.downsample_count},
                 {"residual_blocks", net.residual_blocks},
                 {"input_channels", net.input_channels},
                 {"discriminator_layers", net.discriminator_layers}};
  root["train"] = {{"epochs", train.epochs},
                   {"batch_size", train.batch_size},
                   {"learning_rate", train.learning_rate},
                   {"beta1", train.beta1},
                   {"beta2", train.beta2},
                   {"adam_eps", train.adam_eps},
                   {"lambda1", train.weights.lambda1},
                   {"lambda2", train.weights.lambda2},
                   {"lambda3", train.weights.lambda3},
                   {"lambda4", train.weights.lambda4},
                   {"lambda5", train.weights.lambda5},
                   {"use_edges", train.use_edges},
                   {"use_warp", train.use_warp},
                   {"seed", train.seed},
                   {"checkpoint_every", train.checkpoint_every},
                   {"log_every", train.log_every}};
  root["data"] = {{"synthetic_manifest", synthetic_manifest},
                  {"real_manifest", real_manifest}};
  root["run_dir"] = run_dir;
  return root.dump(2) + "\n";
}

void RunConfig::validate() const {
  std::vector<std::string> issues;
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) issues.push_back(what);
  };
  require(net.base_channels >= 1, "net.base_channels: must be >= 1");
  require(net.downsample_count >= 1, "net.downsample_count: must be >= 1");
  require(net.residual_blocks >= 1, "net.residual_blocks: must be >= 1");
  require(net.input_channels >= 1, "net.input_channels: must be >= 1");
  require(net.discriminator_layers >= 1,
          "net.discriminator_layers: must be >= 1");
  require(train.epochs >= 1, "train.epochs: must be >= 1");
  require(train.batch_size >= 1, "train.batch_size: must be >= 1");
  require(train.learning_rate > 0.0, "train.learning_rate: must be > 0");
  require(train.beta1 >= 0.0 && train.beta1 < 1.0,
          "train.beta1: must be in [0,1)");
  require(train.beta2 >= 0.0 && train.beta2 < 1.0,
          "train.beta2: must be in [0,1)");
  require(train.adam_eps > 0.0, "train.adam_eps: must be > 0");
  require(train.weights.lambda1 >= 0.0, "train.lambda1: must be >= 0");
  require(train.weights.lambda2 >= 0.0, "train.lambda2: must be >= 0");
  require(train.weights.lambda3 >= 0.0, "train.lambda3: must be >= 0");
  require(train.weights.lambda4 >= 0.0, "train.lambda4: must be >= 0");
  require(train.weights.lambda5 >= 0.0, "train.lambda5: must be >= 0");
  require(train.checkpoint_every >= 0, "train.checkpoint_every: must be >= 0");
  require(train.log_every >= 1, "train.log_every: must be >= 1");
  require(!synthetic_manifest.empty(),
          "data.synthetic_manifest: must be set");
  require(!real_manifest.empty(), "data.real_manifest: must be set");
  raise_issues("run config", issues);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const FormatError*>(&e) != nullptr ||
      dynamic_cast<const IoError*>(&e) != nullptr ||
      dynamic_cast<const ManifestError*>(&e) != nullptr) {
    return 3;
  }
  return 4;
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void write_raw_by_extension(const std::string& path, const RawImage& img) {
  if (ends_with(path, ".png")) {
    write_png(path, img);
  } else if (ends_with(path, ".ppm") || ends_with(path, ".pgm")) {
    write_ppm(path, img);
  } else {
    throw ConfigError(path + ": unsupported output extension "
                             "(use .png, .ppm, or .pgm)");
  }
}

void ensure_parent_dir(const std::string& path) {
  const std::filesystem::path parent =
      std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

}  // namespace

void cmd_edges(const std::string& input_path,
               const std::string& output_path) {
  const ImageTensor img = load_image(input_path);
  const ImageTensor edges = sobel_edges(img);
  RawImage out;
  out.bytes = unit_to_bytes(edges);
  out.channels = 1;
  out.rows = edges.rows();
  out.cols = edges.cols();
  ensure_parent_dir(output_path);
  write_raw_by_extension(output_path, out);
}

void cmd_warp(const std::string& image_path,
              const std::string& disparity_path,
              const std::string& output_path, int sign) {
  if (sign != 1 && sign != -1) throw ConfigError("--sign must be 1 or -1");
  const ImageTensor img = load_image(image_path);
  const ImageTensor disp = load_disparity(disparity_path);
  const auto [warped, mask] = warp_horizontal(img, disp, sign);
  RawImage out;
  out.bytes = denormalize_bytes(warped);
  out.channels = warped.channels();
  out.rows = warped.rows();
  out.cols = warped.cols();
  ensure_parent_dir(output_path);
  write_raw_by_extension(output_path, out);
  RawImage m;
  m.channels = 1;
  m.rows = mask.rows();
  m.cols = mask.cols();
  m.bytes.resize(static_cast<size_t>(m.rows) * m.cols);
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      m.bytes[static_cast<size_t>(r) * m.cols + c] = mask.at(r, c) ? 255 : 0;
    }
  }
  write_png(output_path + ".mask.png", m);
}

namespace {

// Resume must continue the same run: everything that feeds the math has to
// match the checkpoint; only artifact cadence (checkpoint/log intervals)
// may differ.
void check_resume_compatible(const RunConfig& cfg, const Checkpoint& ck) {
  std::vector<std::string> issues;
  auto same_d = [](double a, double b) { return a == b; };
  if (cfg.net.base_channels != ck.state.cfg.base_channels ||
      cfg.net.downsample_count != ck.state.cfg.downsample_count ||
      cfg.net.residual_blocks != ck.state.cfg.residual_blocks ||
      cfg.net.input_channels != ck.state.cfg.input_channels ||
      cfg.net.discriminator_layers != ck.state.cfg.discriminator_layers) {
    issues.push_back("net: architecture differs from the checkpoint");
  }
  if (cfg.train.epochs != ck.cfg.epochs) issues.push_back("train.epochs");
  if (cfg.train.batch_size != ck.cfg.batch_size) {
    issues.push_back("train.batch_size");
  }
  if (!same_d(cfg.train.learning_rate, ck.cfg.learning_rate)) {
    issues.push_back("train.learning_rate");
  }
  if (!same_d(cfg.train.beta1, ck.cfg.beta1)) issues.push_back("train.beta1");
  if (!same_d(cfg.train.beta2, ck.cfg.beta2)) issues.push_back("train.beta2");
  if (!same_d(cfg.train.adam_eps, ck.cfg.adam_eps)) {
    issues.push_back("train.adam_eps");
  }
  if (!same_d(cfg.train.weights.lambda1, ck.cfg.weights.lambda1) ||
      !same_d(cfg.train.weights.lambda2, ck.cfg.weights.lambda2) ||
      !same_d(cfg.train.weights.lambda3, ck.cfg.weights.lambda3) ||
      !same_d(cfg.train.weights.lambda4, ck.cfg.weights.lambda4) ||
      !same_d(cfg.train.weights.lambda5, ck.cfg.weights.lambda5)) {
    issues.push_back("train.lambda1..5");
  }
  if (cfg.train.use_edges != ck.cfg.use_edges) {
    issues.push_back("train.use_edges");
  }
  if (cfg.train.use_warp != ck.cfg.use_warp) {
    issues.push_back("train.use_warp");
  }
  if (cfg.train.seed != ck.cfg.seed) issues.push_back("train.seed");
  if (!issues.empty()) {
    std::string msg = "resume checkpoint disagrees with the config on:";
    for (const std::string& s : issues) msg += " " + s;
    throw ConfigError(msg);
  }
}

}  // namespace

uint64_t cmd_train(const RunConfig& cfg_in,
                   const std::string& resume_checkpoint) {
  RunConfig cfg = cfg_in;
  cfg.validate();
  if (cfg.run_dir.empty()) {
    const char* env = std::getenv(kRunDirEnvVar);
    if (env != nullptr && env[0] != '\0') cfg.run_dir = env;
  }
  if (cfg.run_dir.empty()) {
    throw ConfigError(std::string("no run directory: set run_dir in the "
                                  "config, pass --run-dir, or export ") +
                      kRunDirEnvVar);
  }
  std::filesystem::create_directories(cfg.run_dir);

  DatasetManifest synth = DatasetManifest::load(cfg.synthetic_manifest);
  DatasetManifest real = DatasetManifest::load(cfg.real_manifest);
  BatchStream stream(std::move(synth), std::move(real), cfg.train.batch_size,
                     Rng(Rng::derive(cfg.train.seed, 1)));

  ModelState state;
  uint64_t start_step = 0;
  if (!resume_checkpoint.empty()) {
    Checkpoint ck = load_checkpoint(resume_checkpoint);
    check_resume_compatible(cfg, ck);
    state = std::move(ck.state);
    if (ck.stream_state.empty()) {
      throw FormatError(resume_checkpoint +
                        ": checkpoint carries no data-stream state");
    }
    stream.restore(ck.stream_state);
    start_step = ck.step;
  } else {
    state = init_model(cfg.net, cfg.train.seed);
  }

  // the directory documents exactly what produced it
  write_bytes_atomic(cfg.run_dir + "/config.json", cfg.to_json_text());

  const FitResult result = fit(state, stream, cfg.train, cfg.run_dir,
                               start_step);
  std::cout << "run " << cfg.run_dir << ": " << result.final_step
            << " steps, " << count_params(state) << " trainable parameters\n";
  return result.final_step;
}

void cmd_translate(const std::string& checkpoint_path,
                   const std::string& manifest_path,
                   const std::string& outdir) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const DatasetManifest m = DatasetManifest::load(manifest_path);
  if (m.domain != Domain::kSynthetic) {
    throw ManifestError(manifest_path +
                        ": translate needs a synthetic-domain manifest");
  }
  std::filesystem::create_directories(outdir);
  auto write_image = [&](const std::string& name, const ImageTensor& img) {
    RawImage raw;
    raw.bytes = denormalize_bytes(img);
    raw.channels = img.channels();
    raw.rows = img.rows();
    raw.cols = img.cols();
    write_png(outdir + "/" + name, raw);
  };
  for (size_t i = 0; i < m.entries.size(); ++i) {
    const StereoTuple t = load_tuple(m, i);
    ImageTensor left_b, right_b;
    if (ck.cfg.use_edges) {
      const auto [lb, rb] = translate_pair(ck.state, t,
                                           sobel_edges(t.left),
                                           sobel_edges(t.right));
      left_b = lb;
      right_b = rb;
    } else {
      // no-edge checkpoints translate from the bare content code; fusing a
      // zero edge code keeps the decode contract while adding nothing
      auto translate_plain = [&](const ImageTensor& img) {
        LatentCode c = encode(ck.state, img, CodeKind::kContent);
        LatentCode zero = c;
        zero.kind = CodeKind::kEdge;
        std::fill(zero.tensor.vec().begin(), zero.tensor.vec().end(), 0.0f);
        return decode(ck.state, fuse(c, zero), ck.state.style_b);
      };
      left_b = translate_plain(t.left);
      right_b = translate_plain(t.right);
    }
    write_image(t.id + "_left.png", left_b);
    write_image(t.id + "_right.png", right_b);
  }
}

EvalReport cmd_eval(const std::string& pred_dir,
                    const std::string& gt_manifest_path,
                    const std::string& report_dir) {
  const DatasetManifest m = DatasetManifest::load(gt_manifest_path);
  if (m.domain != Domain::kSynthetic) {
    throw ManifestError(gt_manifest_path +
                        ": evaluation needs a synthetic-domain manifest "
                        "(it carries the ground truth)");
  }
  std::vector<DisparityItem> pred, gt;
  for (const ManifestEntry& e : m.entries) {
    ImageTensor gt_map = load_disparity(e.disparity);
    if (m.resize_rows > 0) {
      gt_map = resize_disparity(gt_map, m.resize_rows, m.resize_cols);
    }
    gt.push_back({e.id, std::move(gt_map)});
    const std::string pfm = pred_dir + "/" + e.id + ".pfm";
    const std::string dsp = pred_dir + "/" + e.id + ".dsp1";
    if (std::filesystem::exists(pfm)) {
      pred.push_back({e.id, read_pfm(pfm)});
    } else if (std::filesystem::exists(dsp)) {
      pred.push_back({e.id, read_dsp1(dsp)});
    } else {
      throw ManifestError("no prediction for id '" + e.id + "' under " +
                          pred_dir);
    }
  }
  const EvalReport report = evaluate(pred, gt);
  std::filesystem::create_directories(report_dir);
  write_bytes_atomic(report_dir + "/eval_report.txt", report_table(report));
  write_bytes_atomic(report_dir + "/eval_report.tsv",
                     report_records(report));
  std::cout << report_table(report);
  return report;
}

size_t cmd_params(const NetConfig& cfg) {
  const size_t n = count_params(cfg);
  std::cout << n << "\n";
  return n;
}

}  // namespace s2r
