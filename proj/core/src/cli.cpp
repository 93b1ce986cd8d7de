#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "s2r/commands.hpp"
#include "s2r/errors.hpp"

namespace s2r {

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"stereo2real: edge-aware synthetic-to-real stereo "
               "translation with a disparity-warp consistency loss"};
  app.require_subcommand(1);

  std::string e_in, e_out;
  CLI::App* edges =
      app.add_subcommand("edges", "Write an image's normalized edge map");
  edges->add_option("input", e_in, "source image (PNG/PPM/PGM)")->required();
  edges->add_option("output", e_out, "destination image")->required();

  std::string w_img, w_disp, w_out;
  int w_sign = 1;
  CLI::App* warp = app.add_subcommand(
      "warp", "Resample an image along rows by a disparity map");
  warp->add_option("image", w_img, "source image")->required();
  warp->add_option("disparity", w_disp, "disparity map (PFM/DSP1)")
      ->required();
  warp->add_option("output", w_out,
                   "warped image; a .mask.png sidecar marks in-bounds "
                   "samples")
      ->required();
  warp->add_option("--sign", w_sign, "disparity direction: 1 or -1");

  std::string t_config, t_resume, t_run_dir, t_ablation;
  uint64_t t_seed = 0;
  int t_epochs = 0, t_batch = 0;
  CLI::App* train =
      app.add_subcommand("train", "Train the translator from a JSON config");
  train->add_option("config", t_config, "JSON run config")->required();
  train->add_option("--resume", t_resume, "checkpoint to continue from");
  train->add_option("--run-dir", t_run_dir,
                    "output directory (overrides config and " +
                        std::string(kRunDirEnvVar) + ")");
  train->add_option("--seed", t_seed, "overrides train.seed");
  train->add_option("--epochs", t_epochs, "overrides train.epochs");
  train->add_option("--batch-size", t_batch, "overrides train.batch_size");
  train
      ->add_option("--ablation", t_ablation,
                   "pipeline variant: none, edge, disp, or edge+disp")
      ->check(CLI::IsMember({"none", "edge", "disp", "edge+disp"}));

  std::string tr_ckpt, tr_manifest, tr_outdir;
  CLI::App* translate = app.add_subcommand(
      "translate", "Translate a synthetic manifest's stereo pairs");
  translate->add_option("checkpoint", tr_ckpt, "trained checkpoint")
      ->required();
  translate->add_option("manifest", tr_manifest, "synthetic manifest")
      ->required();
  translate->add_option("outdir", tr_outdir, "output directory")->required();

  std::string ev_pred, ev_gt, ev_report;
  CLI::App* eval = app.add_subcommand(
      "eval", "Score predicted disparities against ground truth");
  eval->add_option("pred_dir", ev_pred,
                   "directory holding <id>.pfm or <id>.dsp1 predictions")
      ->required();
  eval->add_option("gt_manifest", ev_gt, "synthetic manifest with ground "
                                         "truth")
      ->required();
  eval->add_option("--report-dir", ev_report,
                   "where to write eval_report.{txt,tsv} (default: "
                   "pred_dir)");

  std::string p_config;
  CLI::App* params = app.add_subcommand(
      "params", "Print the trainable parameter count for a config");
  params->add_option("config", p_config,
                     "JSON run config (defaults apply when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (edges->parsed()) {
      cmd_edges(e_in, e_out);
    } else if (warp->parsed()) {
      cmd_warp(w_img, w_disp, w_out, w_sign);
    } else if (train->parsed()) {
      RunConfig cfg = RunConfig::from_json_file(t_config);
      if (!t_run_dir.empty()) cfg.run_dir = t_run_dir;
      if (train->count("--seed") > 0) cfg.train.seed = t_seed;
      if (train->count("--epochs") > 0) cfg.train.epochs = t_epochs;
      if (train->count("--batch-size") > 0) cfg.train.batch_size = t_batch;
      if (!t_ablation.empty()) {
        cfg.train.use_edges = t_ablation.find("edge") != std::string::npos;
        cfg.train.use_warp = t_ablation.find("disp") != std::string::npos;
      }
      cmd_train(cfg, t_resume);
    } else if (translate->parsed()) {
      cmd_translate(tr_ckpt, tr_manifest, tr_outdir);
    } else if (eval->parsed()) {
      cmd_eval(ev_pred, ev_gt, ev_report.empty() ? ev_pred : ev_report);
    } else if (params->parsed()) {
      NetConfig net;
      if (!p_config.empty()) net = RunConfig::from_json_file(p_config).net;
      cmd_params(net);
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace s2r
