#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s2r/data.hpp"
#include "s2r/losses.hpp"
#include "s2r/model.hpp"

namespace s2r {

// Full training protocol configuration. The optimizer is Adam with the
// moment decays below; the ablation toggles switch individual pipeline
// pieces off (edges off feeds zero edge codes, warp off drops the warp
// term) so their contributions can be compared.
struct TrainConfig {
  int epochs = 100;
  int batch_size = 4;
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  LossWeights weights;
  bool use_edges = true;
  bool use_warp = true;
  uint64_t seed = 0;
  int checkpoint_every = 0;  // steps between checkpoints; 0 = final only
  int log_every = 1;         // steps between run-log lines

  void validate() const;
};

struct StepRecord {
  uint64_t step = 0;  // 0-based global step index
  LossBreakdown losses;
  double grad_norm_g = 0.0;
  double grad_norm_d = 0.0;
  // Wall time is reported separately from the deterministic artifacts: it
  // goes to the timing sidecar, never into the run log or checkpoints.
  double wall_ms = 0.0;
};

// One alternating update: (1) both discriminators step on detached fakes,
// (2) the generator steps on the full objective against the updated
// discriminators. step_index feeds Adam's bias correction.
StepRecord train_step(ModelState& state, const Batch& batch,
                      const TrainConfig& cfg, uint64_t step_index);

// Complete training snapshot: everything needed to continue a run
// bit-exactly (parameters with optimizer moments, frozen styles, config
// echo, step counter, and the data stream position).
struct Checkpoint {
  ModelState state;
  TrainConfig cfg;
  uint64_t step = 0;
  std::string stream_state;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

struct FitResult {
  std::vector<StepRecord> records;
  uint64_t final_step = 0;
};

// Runs cfg.epochs * stream.steps_per_epoch() steps (continuing from
// start_step when resuming). When run_dir is non-empty, writes:
//   run_log.tsv    deterministic per-step loss lines
//   timing.tsv     wall-time sidecar
//   checkpoint_<step>.s2rc / checkpoint_final.s2rc
// Style codes are verified bit-identical at every checkpoint.
FitResult fit(ModelState& state, BatchStream& stream, const TrainConfig& cfg,
              const std::string& run_dir, uint64_t start_step = 0);

// Deterministic run-log line for one record (no wall time).
std::string format_record(const StepRecord& r);
std::string run_log_header();

}  // namespace s2r
