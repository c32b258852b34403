#include <iostream>

#include <CLI11.hpp>

#include "gridflow/kernels.hpp"
#include "gridflow/pipeline.hpp"

int main(int argc, char** argv) {
  gridflow::kernels::configure_threads_from_env();

  CLI::App app{"gridflow: flow-guided bird's-eye-view occupancy grid prediction"};
  app.require_subcommand(1);

  gridflow::GenOptions gen_opt;
  auto* gen = app.add_subcommand("gen", "Generate synthetic scenes (GSEQ1 + instance sidecars)");
  gen->add_option("--config", gen_opt.config_path, "Scenario or batch JSON")->required();
  gen->add_option("--out", gen_opt.out_path, "Output .gseq file (scenario) or directory (batch)")
      ->required();
  uint64_t gen_seed = 0;
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "Override the config seed");

  gridflow::TrainOptions train_opt;
  auto* train = app.add_subcommand("train", "Train the predictor");
  train->add_option("--config", train_opt.config_path, "Run config JSON")->required();
  train->add_option("--out", train_opt.out_dir, "Output directory")->required();
  train->add_flag("--resume", train_opt.resume, "Continue from <out>/resume.bin");

  gridflow::EvalOptions eval_opt;
  auto* eval = app.add_subcommand("eval", "Evaluate predictions");
  eval->add_option("--checkpoint", eval_opt.checkpoint, "Checkpoint for model evaluation");
  eval->add_option("--data", eval_opt.data, "GSEQ files or directories (model mode)");
  eval->add_option("--pred", eval_opt.pred_path, "Prediction .gseq (file mode)");
  eval->add_option("--gt", eval_opt.gt_path, "Ground-truth .gseq (file mode)");
  eval->add_option("--report", eval_opt.report_path, "Report JSON path")->required();
  eval->add_option("--csv", eval_opt.csv_path, "Per-step CSV path");

  gridflow::SampleOptions sample_opt;
  auto* sample = app.add_subcommand("sample", "Draw latent samples, write frequency grids");
  sample->add_option("--checkpoint", sample_opt.checkpoint)->required();
  sample->add_option("--data", sample_opt.data_path, "Scene .gseq")->required();
  sample->add_option("--frame", sample_opt.frame, "Anchor frame (default: last window)");
  sample->add_option("--samples", sample_opt.n_samples, "Number of latent samples");
  sample->add_option("--seed", sample_opt.seed, "Sampling seed");
  sample->add_option("--out", sample_opt.out_dir, "Output directory")->required();

  gridflow::WarpOptions warp_opt;
  auto* warp = app.add_subcommand("warp", "Apply stored flows to a semantic grid");
  warp->add_option("--in", warp_opt.in_path, "Input .gseq")->required();
  warp->add_option("--frame", warp_opt.frame, "Start frame")->required();
  warp->add_option("--steps", warp_opt.steps, "Number of warp steps")->required();
  warp->add_option("--out", warp_opt.out_path, "Output .gseq")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      if (gen_seed_opt->count() > 0) {
        gen_opt.seed_override = gen_seed;
        gen_opt.has_seed_override = true;
      }
      gridflow::cmd_gen(gen_opt);
    } else if (train->parsed()) {
      gridflow::cmd_train(train_opt);
    } else if (eval->parsed()) {
      gridflow::cmd_eval(eval_opt);
    } else if (sample->parsed()) {
      gridflow::cmd_sample(sample_opt);
    } else if (warp->parsed()) {
      gridflow::cmd_warp(warp_opt);
    }
  } catch (const gridflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const gridflow::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
