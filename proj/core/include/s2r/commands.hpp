#pragma once

#include <cstdint>
#include <string>

#include "s2r/eval.hpp"
#include "s2r/model.hpp"
#include "s2r/train.hpp"

namespace s2r {

// Merged run description consumed by the training command: architecture,
// training protocol, dataset manifests, and the run directory. Serialized
// as JSON; a run directory always receives the exact config that produced
// it (config.json).
struct RunConfig {
  NetConfig net;
  TrainConfig train;
  std::string synthetic_manifest;
  std::string real_manifest;
  std::string run_dir;

  static RunConfig from_json_text(const std::string& text,
                                  const std::string& origin);
  static RunConfig from_json_file(const std::string& path);
  std::string to_json_text() const;

  // Collects every offending field before throwing one ConfigError that
  // lists them all.
  void validate() const;
};

// Maps the library error taxonomy onto process exit codes:
// 2 config, 3 data/format/manifest, 4 everything else.
int exit_code_for(const std::exception& e);

// Subcommand bodies. Each throws on failure (the CLI wrapper translates
// exceptions into exit codes + stderr messages) and writes its outputs
// atomically.

// Reads an image, writes its normalized edge-magnitude map as an 8-bit
// image.
void cmd_edges(const std::string& input_path, const std::string& output_path);

// Warps an image along rows by a disparity map; writes the warped image
// and a `<output>.mask.png` sidecar (255 = sampled in bounds).
void cmd_warp(const std::string& image_path, const std::string& disparity_path,
              const std::string& output_path, int sign);

// Runs (or resumes) training per the config. Returns the final step count.
uint64_t cmd_train(const RunConfig& cfg, const std::string& resume_checkpoint);

// Translates every tuple of a synthetic manifest with a trained
// checkpoint; writes `<id>_left.png` / `<id>_right.png` into outdir.
void cmd_translate(const std::string& checkpoint_path,
                   const std::string& manifest_path,
                   const std::string& outdir);

// Compares predicted disparities (`<id>.pfm` or `<id>.dsp1` under
// pred_dir) against a synthetic manifest's ground truth; writes
// eval_report.txt (table) and eval_report.tsv (records) into report_dir
// and returns the report.
EvalReport cmd_eval(const std::string& pred_dir,
                    const std::string& gt_manifest_path,
                    const std::string& report_dir);

// Prints and returns the trainable parameter count for a config.
size_t cmd_params(const NetConfig& cfg);

// Environment variable consulted for the run directory when neither the
// config nor a flag provides one.
inline constexpr const char* kRunDirEnvVar = "STEREO2REAL_RUN_DIR";

// Full argv-level entry point used by the binary: parses subcommands,
// applies flag overrides, maps exceptions to exit codes.
int run_cli(int argc, const char* const* argv);

}  // namespace s2r
