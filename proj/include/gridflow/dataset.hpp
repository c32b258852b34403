#pragma once

// Turns stored sequences into training windows: slices input_len + horizon
// frames, reprojects them into the anchor frame (the ego pose at the latest
// input step), recomputes ground-truth flow from the reprojected instance
// centroids and packs the channel tensors.

#include <string>
#include <vector>

#include "gridflow/kernels.hpp"
#include "gridflow/nn/predictor.hpp"
#include "gridflow/types.hpp"

namespace gridflow {

struct WindowSpec {
  int input_len = 3;
  int horizon = 4;
  int stride = 1;
  double velocity_norm_mps = 5.0;
  kernels::Interp interp = kernels::Interp::Bilinear;
};

struct Window {
  nn::TrainSample sample;
  // Reprojected window (input_len + horizon frames) with instances; the
  // anchor frame sits at index t_index == input_len - 1.
  FrameSequence gt;
  int t_index = 0;
};

std::vector<Window> make_windows(const FrameSequence& seq, const WindowSpec& spec);

// Loads every sequence and concatenates the windows, in path order.
std::vector<Window> load_windows(const std::vector<std::string>& gseq_paths,
                                 const WindowSpec& spec);

}  // namespace gridflow
