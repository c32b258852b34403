#pragma once

// Command implementations behind the gridflow CLI: dataset generation,
// training, evaluation, latent sampling and flow-warp application. Every
// artifact carries the producing config hash in its manifest or header.

#include <cstdint>
#include <string>
#include <vector>

#include "gridflow/losses.hpp"
#include "gridflow/metrics.hpp"
#include "gridflow/nn/adam.hpp"

namespace gridflow {

// FNV-1a over the canonical JSON dump, as a 16-digit hex string.
std::string config_hash(const std::string& canonical_json);

struct RunConfig {
  std::vector<std::string> train_data;  // .gseq files or directories
  std::vector<std::string> val_data;
  nn::NetConfig net;
  LossWeights loss;
  nn::AdamConfig optim;
  int epochs = 20;
  int batch_size = 8;
  uint64_t seed = 1;
  int window_stride = 1;
  int checkpoint_every = 0;  // epochs between periodic checkpoints; 0 = final only

  std::string canonical_json() const;
  static RunConfig from_json(const std::string& text);
};

struct GenOptions {
  std::string config_path;
  std::string out_path;  // file for single scenarios, directory for batches
  uint64_t seed_override = 0;
  bool has_seed_override = false;
  int min_input_len = 3;  // windowing requirement checked against n_frames
  int min_horizon = 4;
};
void cmd_gen(const GenOptions& opt);

struct TrainOptions {
  std::string config_path;
  std::string out_dir;
  bool resume = false;
};
void cmd_train(const TrainOptions& opt);

struct EvalOptions {
  // model mode
  std::string checkpoint;
  std::vector<std::string> data;
  // file mode
  std::string pred_path;
  std::string gt_path;
  std::string report_path;
  std::string csv_path;
};
void cmd_eval(const EvalOptions& opt);

struct SampleOptions {
  std::string checkpoint;
  std::string data_path;
  int frame = -1;  // anchor frame; -1 picks the latest complete window
  int n_samples = 100;
  uint64_t seed = 0;
  std::string out_dir;
};
void cmd_sample(const SampleOptions& opt);

struct WarpOptions {
  std::string in_path;
  int frame = 0;
  int steps = 4;
  std::string out_path;
};
void cmd_warp(const WarpOptions& opt);

// Grayscale portable pixmap (P6) of a [0,1] plane.
void write_ppm(const std::string& path, const Plane& p);

// Directories expand to their sorted *.gseq contents.
std::vector<std::string> expand_gseq_paths(const std::vector<std::string>& entries);

}  // namespace gridflow
