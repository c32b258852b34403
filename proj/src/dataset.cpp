#include "gridflow/dataset.hpp"

#include "gridflow/gseq.hpp"
#include "gridflow/reproject.hpp"
#include "gridflow/sim.hpp"

namespace gridflow {

namespace {

Plane binarize(const Plane& p) {
  Plane out(p.rows, p.cols);
  for (size_t i = 0; i < p.v.size(); ++i) out.v[i] = p.v[i] > 0.5 ? 1.0 : 0.0;
  return out;
}

}  // namespace

std::vector<Window> make_windows(const FrameSequence& seq, const WindowSpec& spec) {
  if (spec.input_len < 1 || spec.horizon < 1 || spec.stride < 1)
    throw ConfigError("window spec values must be positive");
  std::vector<Window> out;
  const int n = seq.frame_count();
  for (int anchor = spec.input_len - 1; anchor + spec.horizon < n; anchor += spec.stride) {
    FrameSequence sub;
    sub.geometry = seq.geometry;
    sub.dt_s = seq.dt_s;
    const int first = anchor - spec.input_len + 1;
    for (int i = first; i <= anchor + spec.horizon; ++i) {
      sub.frames.push_back(seq.frames[i]);
      sub.instances.push_back(seq.instances[i]);
    }
    Window w;
    w.t_index = spec.input_len - 1;
    w.gt = to_allocentric(sub, sub.frames[w.t_index].ego, spec.interp);
    ground_truth_flow(w.gt);

    for (int i = 0; i < spec.input_len; ++i)
      w.sample.inputs.push_back(nn::pack_input_frame(w.gt.frames[i], spec.velocity_norm_mps));

    TargetBundle& t = w.sample.targets;
    t.y_now = binarize(w.gt.frames[w.t_index].semantic.p_vehicle);
    for (int k = 1; k <= spec.horizon; ++k) {
      const Frame& f = w.gt.frames[w.t_index + k];
      t.y_future.push_back(binarize(f.semantic.p_vehicle));
      t.flow_future.push_back(*f.flow);
      t.mask_future.push_back(t.y_future.back());
    }
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<Window> load_windows(const std::vector<std::string>& gseq_paths,
                                 const WindowSpec& spec) {
  std::vector<Window> out;
  for (const std::string& path : gseq_paths) {
    const FrameSequence seq = read_gseq(path);
    std::vector<Window> ws = make_windows(seq, spec);
    for (Window& w : ws) out.push_back(std::move(w));
  }
  return out;
}

}  // namespace gridflow
