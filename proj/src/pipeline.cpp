#include "gridflow/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gridflow/dataset.hpp"
#include "gridflow/gseq.hpp"
#include "gridflow/nn/checkpoint.hpp"
#include "gridflow/rng.hpp"
#include "gridflow/sim.hpp"
#include "gridflow/warp.hpp"

namespace gridflow {

namespace fs = std::filesystem;
using nlohmann::json;

std::string config_hash(const std::string& canonical_json) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_json) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

json net_to_json(const nn::NetConfig& c) {
  return {{"in_channels", c.in_channels},
          {"base_features", c.base_features},
          {"n_convlstm_layers", c.n_convlstm_layers},
          {"latent_dim", c.latent_dim},
          {"n_gru_units_per_step", c.n_gru_units_per_step},
          {"horizon", c.horizon},
          {"input_len", c.input_len},
          {"downsample", c.downsample},
          {"velocity_norm_mps", c.velocity_norm_mps}};
}

nn::NetConfig net_from_json(const json& j) {
  nn::NetConfig c;
  c.in_channels = j.value("in_channels", c.in_channels);
  c.base_features = j.value("base_features", c.base_features);
  c.n_convlstm_layers = j.value("n_convlstm_layers", c.n_convlstm_layers);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.n_gru_units_per_step = j.value("n_gru_units_per_step", c.n_gru_units_per_step);
  c.horizon = j.value("horizon", c.horizon);
  c.input_len = j.value("input_len", c.input_len);
  c.downsample = j.value("downsample", c.downsample);
  c.velocity_norm_mps = j.value("velocity_norm_mps", c.velocity_norm_mps);
  c.validate();
  return c;
}

json loss_to_json(const LossWeights& w) {
  return {{"lambda_d", w.lambda_d},
          {"lambda_b", w.lambda_b},
          {"lambda_w", w.lambda_w},
          {"lambda_f", w.lambda_f},
          {"lambda_k", w.lambda_k},
          {"bce_pos_weight", w.bce_pos_weight},
          {"kl_future_to_present", w.kl_future_to_present}};
}

LossWeights loss_from_json(const json& j) {
  LossWeights w;
  w.lambda_d = j.value("lambda_d", w.lambda_d);
  w.lambda_b = j.value("lambda_b", w.lambda_b);
  w.lambda_w = j.value("lambda_w", w.lambda_w);
  w.lambda_f = j.value("lambda_f", w.lambda_f);
  w.lambda_k = j.value("lambda_k", w.lambda_k);
  w.bce_pos_weight = j.value("bce_pos_weight", w.bce_pos_weight);
  w.kl_future_to_present = j.value("kl_future_to_present", w.kl_future_to_present);
  w.validate();
  return w;
}

json optim_to_json(const nn::AdamConfig& c) {
  return {{"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps", c.eps}};
}

nn::AdamConfig optim_from_json(const json& j) {
  nn::AdamConfig c;
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  return c;
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  os << text;
  if (!os) throw ConfigError("write failed: " + path);
}

}  // namespace

std::string RunConfig::canonical_json() const {
  json j;
  j["data"] = {{"train", train_data}, {"val", val_data}};
  j["net"] = net_to_json(net);
  j["loss"] = loss_to_json(loss);
  j["optim"] = optim_to_json(optim);
  j["train"] = {{"epochs", epochs},
                {"batch_size", batch_size},
                {"seed", seed},
                {"window_stride", window_stride},
                {"checkpoint_every", checkpoint_every}};
  return j.dump(1);
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("bad run config JSON: " + std::string(e.what()));
  }
  try {
    RunConfig c;
    if (j.contains("data")) {
      c.train_data = j["data"].value("train", std::vector<std::string>{});
      c.val_data = j["data"].value("val", std::vector<std::string>{});
    }
    if (j.contains("net")) c.net = net_from_json(j["net"]);
    if (j.contains("loss")) c.loss = loss_from_json(j["loss"]);
    if (j.contains("optim")) c.optim = optim_from_json(j["optim"]);
    if (j.contains("train")) {
      const json& t = j["train"];
      c.epochs = t.value("epochs", c.epochs);
      c.batch_size = t.value("batch_size", c.batch_size);
      c.seed = t.value("seed", c.seed);
      c.window_stride = t.value("window_stride", c.window_stride);
      c.checkpoint_every = t.value("checkpoint_every", c.checkpoint_every);
    }
    return c;
  } catch (const json::exception& e) {
    throw ConfigError("bad run config JSON: " + std::string(e.what()));
  }
}

std::vector<std::string> expand_gseq_paths(const std::vector<std::string>& entries) {
  std::vector<std::string> out;
  for (const std::string& e : entries) {
    if (fs::is_directory(e)) {
      std::vector<std::string> files;
      for (const auto& de : fs::directory_iterator(e))
        if (de.path().extension() == ".gseq") files.push_back(de.path().string());
      std::sort(files.begin(), files.end());
      out.insert(out.end(), files.begin(), files.end());
    } else {
      out.push_back(e);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

namespace {

BatchSpec batch_from_json(const json& j) {
  BatchSpec s;
  s.count = j.value("count", s.count);
  s.seed = j.value("seed", s.seed);
  s.n_frames = j.value("n_frames", s.n_frames);
  if (j.contains("geometry")) {
    s.geometry.width_cells = j["geometry"].value("width_cells", s.geometry.width_cells);
    s.geometry.height_cells = j["geometry"].value("height_cells", s.geometry.height_cells);
    s.geometry.cell_size_m = j["geometry"].value("cell_size_m", s.geometry.cell_size_m);
  }
  s.dt_s = j.value("dt_s", s.dt_s);
  s.v_max_mps = j.value("v_max_mps", s.v_max_mps);
  s.vehicles_min = j.value("vehicles_min", s.vehicles_min);
  s.vehicles_max = j.value("vehicles_max", s.vehicles_max);
  s.speed_min_mps = j.value("speed_min_mps", s.speed_min_mps);
  s.speed_max_mps = j.value("speed_max_mps", s.speed_max_mps);
  s.turn_fraction = j.value("turn_fraction", s.turn_fraction);
  s.parked_fraction = j.value("parked_fraction", s.parked_fraction);
  s.max_yaw_rate_rps = j.value("max_yaw_rate_rps", s.max_yaw_rate_rps);
  s.obstacles_max = j.value("obstacles_max", s.obstacles_max);
  s.vehicle_length_m = j.value("vehicle_length_m", s.vehicle_length_m);
  s.vehicle_width_m = j.value("vehicle_width_m", s.vehicle_width_m);
  if (j.contains("noise")) {
    s.noise.state_flip_prob = j["noise"].value("state_flip_prob", 0.0);
    s.noise.velocity_sigma_mps = j["noise"].value("velocity_sigma_mps", 0.0);
  }
  s.train_fraction = j.value("train_fraction", s.train_fraction);
  return s;
}

void check_window_budget(int n_frames, const GenOptions& opt) {
  // One window needs min_input_len inputs plus min_horizon targets.
  const int needed = opt.min_input_len + opt.min_horizon;
  if (n_frames < needed)
    throw ConfigError("n_frames = " + std::to_string(n_frames) + " is too small: need at least " +
                      std::to_string(needed) + " frames for one input/target window");
}

}  // namespace

void cmd_gen(const GenOptions& opt) {
  const std::string text = read_text_file(opt.config_path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("bad gen config JSON: " + std::string(e.what()));
  }

  if (j.contains("batch")) {
    BatchSpec spec = batch_from_json(j["batch"]);
    if (opt.has_seed_override) spec.seed = opt.seed_override;
    check_window_budget(spec.n_frames, opt);
    const fs::path root(opt.out_path);
    fs::create_directories(root / "train");
    fs::create_directories(root / "val");
    json manifest;
    json files = json::array();
    int n_train = 0, n_val = 0;
    for (int i = 0; i < spec.count; ++i) {
      const ScenarioConfig cfg = random_scenario(spec, i);
      FrameSequence seq = simulate(cfg);
      ground_truth_flow(seq);
      const bool is_train =
          static_cast<double>(mix_seed(cfg.seed, 0x5ULL) % 1000) < spec.train_fraction * 1000.0;
      char name[32];
      std::snprintf(name, sizeof(name), "scene_%04d.gseq", i);
      const fs::path path = root / (is_train ? "train" : "val") / name;
      write_gseq(path.string(), seq);
      files.push_back(path.string());
      (is_train ? n_train : n_val)++;
    }
    manifest["config_hash"] = config_hash(j.dump(1));
    manifest["files"] = files;
    manifest["n_train"] = n_train;
    manifest["n_val"] = n_val;
    write_text_file((root / "manifest.json").string(), manifest.dump(1) + "\n");
    return;
  }

  ScenarioConfig cfg = scenario_from_json(text);
  if (opt.has_seed_override) cfg.seed = opt.seed_override;
  check_window_budget(cfg.n_frames, opt);
  FrameSequence seq = simulate(cfg);
  ground_truth_flow(seq);
  write_gseq(opt.out_path, seq);
  json manifest;
  manifest["config_hash"] = config_hash(scenario_to_json(cfg));
  manifest["files"] = {opt.out_path};
  write_text_file(opt.out_path + ".manifest.json", manifest.dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

namespace {

EvalReport eval_model_on_windows(const nn::ParamTable& params, const nn::NetConfig& net,
                                 const std::vector<Window>& windows) {
  std::vector<SequenceEval> evals(windows.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (size_t i = 0; i < windows.size(); ++i) {
    const PredictionBundle b =
        nn::forward(params, net, windows[i].sample.inputs, nn::ForwardMode::Mean, 0);
    SequenceEval& e = evals[i];
    for (const SemanticGrid& gsem : b.y_future) e.y_pred.push_back(gsem.p_vehicle);
    for (const SemanticGrid& gsem : b.w_future) e.w_pred.push_back(gsem.p_vehicle);
    e.gt = &windows[i].gt;
    e.t_index = windows[i].t_index;
  }
  return evaluate(evals);
}

}  // namespace

void cmd_train(const TrainOptions& opt) {
  const RunConfig cfg = RunConfig::from_json(read_text_file(opt.config_path));
  const std::string hash = config_hash(cfg.canonical_json());
  fs::create_directories(opt.out_dir);
  const fs::path out(opt.out_dir);

  const WindowSpec wspec{cfg.net.input_len, cfg.net.horizon, cfg.window_stride,
                         cfg.net.velocity_norm_mps, kernels::Interp::Bilinear};
  std::vector<Window> train_windows = load_windows(expand_gseq_paths(cfg.train_data), wspec);
  std::vector<Window> val_windows = load_windows(expand_gseq_paths(cfg.val_data), wspec);
  if (train_windows.empty()) throw ConfigError("train: no training windows");

  std::vector<nn::TrainSample> train_set;
  train_set.reserve(train_windows.size());
  for (Window& w : train_windows) train_set.push_back(std::move(w.sample));

  nn::ParamTable params = nn::init_params(cfg.net, cfg.seed);
  nn::AdamState adam;
  int start_epoch = 0;
  const std::string resume_path = (out / "resume.bin").string();
  if (opt.resume) {
    adam.init(params);
    if (!nn::load_train_state(resume_path, params, adam, start_epoch))
      throw ConfigError("no resume state at " + resume_path);
  }

  std::ofstream csv(out / "loss.csv", opt.resume ? std::ios::app : std::ios::out);
  if (!opt.resume) {
    csv << "# config_hash=" << hash << "\n";
    csv << "step,bce_d,bce_b,bce_w,flow,kl,total\n";
  }

  json manifest;
  manifest["net"] = json::parse(net_to_json(cfg.net).dump());
  manifest["seed"] = cfg.seed;
  manifest["config_hash"] = hash;
  manifest["epochs"] = cfg.epochs;

  nn::ParamTable last_finite = params;
  nn::TrainHooks hooks;
  hooks.on_step = [&](long step, const LossBreakdown& b) {
    csv << step << "," << b.bce_now << "," << b.bce_future << "," << b.bce_warped << ","
        << b.flow << "," << b.kl << "," << b.total << "\n";
  };
  std::vector<double> epoch_losses;
  hooks.on_epoch_end = [&](int epoch, double mean_loss) {
    epoch_losses.push_back(mean_loss);
    last_finite = params;
    nn::save_train_state(resume_path, params, adam, epoch + 1);
    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 &&
        epoch + 1 < cfg.epochs) {
      char name[48];
      std::snprintf(name, sizeof(name), "checkpoint_epoch%03d.ckpt", epoch + 1);
      nn::save_checkpoint((out / name).string(), params, manifest.dump(1));
    }
  };

  const nn::TrainConfig tc{cfg.epochs, cfg.batch_size, cfg.seed};
  try {
    train(params, cfg.net, train_set, cfg.optim, cfg.loss, tc, &adam, start_epoch, hooks);
  } catch (const NumericError&) {
    nn::save_checkpoint((out / "checkpoint_last_finite.ckpt").string(), last_finite,
                        manifest.dump(1));
    throw;
  }

  const std::string ckpt_path = (out / "checkpoint.ckpt").string();
  nn::save_checkpoint(ckpt_path, params, manifest.dump(1));

  json summary;
  summary["config_hash"] = hash;
  summary["epoch_mean_loss"] = epoch_losses;
  write_text_file((out / "train_summary.json").string(), summary.dump(1) + "\n");

  if (!val_windows.empty()) {
    // Evaluate with the stored 32-bit weights so the report matches a later
    // standalone eval of the same checkpoint.
    const nn::ParamTable stored = nn::load_checkpoint(ckpt_path);
    const EvalReport rep = eval_model_on_windows(stored, cfg.net, val_windows);
    json jr = json::parse(rep.to_json());
    jr["config_hash"] = hash;
    write_text_file((out / "report.json").string(), jr.dump(1) + "\n");
    write_text_file((out / "report.csv").string(), rep.per_step_csv());
  }
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

namespace {

nn::NetConfig net_from_manifest(const std::string& ckpt_path) {
  json m;
  try {
    m = json::parse(nn::load_checkpoint_manifest(ckpt_path));
  } catch (const json::exception& e) {
    throw ConfigError("bad checkpoint manifest: " + std::string(e.what()));
  }
  if (!m.contains("net")) throw ConfigError("checkpoint manifest lacks net config");
  return net_from_json(m["net"]);
}

void eval_files(const EvalOptions& opt) {
  const FrameSequence pred = read_gseq(opt.pred_path, false);
  const FrameSequence gt = read_gseq(opt.gt_path);
  if (!(pred.geometry == gt.geometry)) throw ConfigError("eval: geometry mismatch");

  // Match prediction frames to ground-truth frames by timestamp.
  std::vector<int> gt_index;
  for (const Frame& pf : pred.frames) {
    int found = -1;
    for (int i = 0; i < gt.frame_count(); ++i)
      if (std::abs(gt.frames[i].timestamp_s - pf.timestamp_s) < 1e-6) {
        found = i;
        break;
      }
    if (found < 0) throw ConfigError("eval: prediction timestamp not present in ground truth");
    gt_index.push_back(found);
  }
  for (size_t i = 0; i + 1 < gt_index.size(); ++i)
    if (gt_index[i + 1] != gt_index[i] + 1)
      throw ConfigError("eval: prediction frames must map to consecutive ground-truth frames");
  if (gt_index.empty() || gt_index[0] == 0)
    throw ConfigError("eval: predictions must start after the first ground-truth frame");

  SequenceEval e;
  for (const Frame& pf : pred.frames) e.w_pred.push_back(pf.semantic.p_vehicle);
  e.gt = &gt;
  e.t_index = gt_index[0] - 1;
  const EvalReport rep = evaluate({e});

  json jr = json::parse(rep.to_json());
  jr["config_hash"] = config_hash(opt.pred_path + "|" + opt.gt_path);
  jr["pred"] = opt.pred_path;
  jr["gt"] = opt.gt_path;
  write_text_file(opt.report_path, jr.dump(1) + "\n");
  if (!opt.csv_path.empty()) write_text_file(opt.csv_path, rep.per_step_csv());
}

}  // namespace

void cmd_eval(const EvalOptions& opt) {
  if (opt.report_path.empty()) throw ConfigError("eval: --report is required");
  if (!opt.pred_path.empty()) {
    if (opt.gt_path.empty()) throw ConfigError("eval: --pred requires --gt");
    eval_files(opt);
    return;
  }
  if (opt.checkpoint.empty() || opt.data.empty())
    throw ConfigError("eval: need either --pred/--gt or --checkpoint/--data");

  const nn::NetConfig net = net_from_manifest(opt.checkpoint);
  const nn::ParamTable params = nn::load_checkpoint(opt.checkpoint);
  const WindowSpec wspec{net.input_len, net.horizon, 1, net.velocity_norm_mps,
                         kernels::Interp::Bilinear};
  const std::vector<Window> windows = load_windows(expand_gseq_paths(opt.data), wspec);
  if (windows.empty()) throw ConfigError("eval: no windows in data");
  const EvalReport rep = eval_model_on_windows(params, net, windows);

  json jr = json::parse(rep.to_json());
  jr["config_hash"] = config_hash(nn::load_checkpoint_manifest(opt.checkpoint));
  write_text_file(opt.report_path, jr.dump(1) + "\n");
  if (!opt.csv_path.empty()) write_text_file(opt.csv_path, rep.per_step_csv());
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

void write_ppm(const std::string& path, const Plane& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  os << "P6\n" << p.cols << " " << p.rows << "\n255\n";
  for (double v : p.v) {
    const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    const unsigned char byte = static_cast<unsigned char>(std::lround(c * 255.0));
    os.put(static_cast<char>(byte));
    os.put(static_cast<char>(byte));
    os.put(static_cast<char>(byte));
  }
  if (!os) throw ConfigError("write failed: " + path);
}

void cmd_sample(const SampleOptions& opt) {
  const nn::NetConfig net = net_from_manifest(opt.checkpoint);
  const nn::ParamTable params = nn::load_checkpoint(opt.checkpoint);
  if (opt.n_samples < 1) throw ConfigError("sample: n_samples must be >= 1");

  const FrameSequence seq = read_gseq(opt.data_path);
  const WindowSpec wspec{net.input_len, net.horizon, 1, net.velocity_norm_mps,
                         kernels::Interp::Bilinear};
  const std::vector<Window> windows = make_windows(seq, wspec);
  if (windows.empty()) throw ConfigError("sample: sequence too short for one window");
  int widx = static_cast<int>(windows.size()) - 1;
  if (opt.frame >= 0) {
    // Window i anchors at sequence frame input_len - 1 + i.
    widx = opt.frame - (net.input_len - 1);
    if (widx < 0 || widx >= static_cast<int>(windows.size()))
      throw ConfigError("sample: no complete window anchored at the requested frame");
  }
  const Window& w = windows[widx];

  fs::create_directories(opt.out_dir);
  const fs::path out(opt.out_dir);
  const int H = seq.geometry.height_cells, W = seq.geometry.width_cells;
  std::vector<Plane> freq_y(net.horizon, Plane(H, W));
  std::vector<Plane> freq_w(net.horizon, Plane(H, W));
  for (int s = 0; s < opt.n_samples; ++s) {
    const PredictionBundle b = nn::forward(params, net, w.sample.inputs,
                                           nn::ForwardMode::Sample, opt.seed + s);
    for (int k = 0; k < net.horizon; ++k) {
      for (size_t j = 0; j < freq_y[k].v.size(); ++j) {
        freq_y[k].v[j] += b.y_future[k].p_vehicle.v[j] >= 0.5 ? 1.0 : 0.0;
        freq_w[k].v[j] += b.w_future[k].p_vehicle.v[j] >= 0.5 ? 1.0 : 0.0;
      }
    }
  }
  for (int k = 0; k < net.horizon; ++k) {
    for (double& v : freq_y[k].v) v /= opt.n_samples;
    for (double& v : freq_w[k].v) v /= opt.n_samples;
  }
  const PredictionBundle mean_b =
      nn::forward(params, net, w.sample.inputs, nn::ForwardMode::Mean, 0);

  write_ppm((out / "y_now.ppm").string(), mean_b.y_now.p_vehicle);
  json steps = json::array();
  std::string csv = "step,mean_freq_y,mean_freq_w\n";
  for (int k = 0; k < net.horizon; ++k) {
    char name[48];
    std::snprintf(name, sizeof(name), "y_step%d_freq.ppm", k + 1);
    write_ppm((out / name).string(), freq_y[k]);
    std::snprintf(name, sizeof(name), "w_step%d_freq.ppm", k + 1);
    write_ppm((out / name).string(), freq_w[k]);
    const double my = freq_y[k].sum() / freq_y[k].size();
    const double mw = freq_w[k].sum() / freq_w[k].size();
    steps.push_back({{"step", k + 1}, {"mean_freq_y", my}, {"mean_freq_w", mw}});
    csv += std::to_string(k + 1) + "," + std::to_string(my) + "," + std::to_string(mw) + "\n";
  }
  json jr;
  jr["n_samples"] = opt.n_samples;
  jr["seed"] = opt.seed;
  jr["anchor_frame"] = net.input_len - 1 + widx;
  jr["steps"] = steps;
  jr["config_hash"] = config_hash(nn::load_checkpoint_manifest(opt.checkpoint));
  write_text_file((out / "report.json").string(), jr.dump(1) + "\n");
  write_text_file((out / "report.csv").string(), csv);
}

// ---------------------------------------------------------------------------
// warp
// ---------------------------------------------------------------------------

void cmd_warp(const WarpOptions& opt) {
  const FrameSequence seq = read_gseq(opt.in_path);
  if (opt.frame < 0 || opt.frame >= seq.frame_count())
    throw ConfigError("warp: frame index out of range");
  if (opt.steps < 1 || opt.frame + opt.steps >= seq.frame_count())
    throw ConfigError("warp: not enough frames for the requested steps");

  SemanticGrid current = seq.frames[opt.frame].semantic;
  std::vector<FlowGrid> flows;
  for (int k = 1; k <= opt.steps; ++k) {
    const Frame& f = seq.frames[opt.frame + k];
    if (!f.flow) throw ConfigError("warp: frame " + std::to_string(opt.frame + k) +
                                   " has no stored flow");
    flows.push_back(*f.flow);
  }
  const std::vector<SemanticGrid> warped = warp_rollout(current, flows, WarpConfig{});

  FrameSequence out;
  out.geometry = seq.geometry;
  out.dt_s = seq.dt_s;
  const int H = seq.geometry.height_cells, W = seq.geometry.width_cells;
  for (int k = 0; k < opt.steps; ++k) {
    Frame f;
    f.timestamp_s = seq.frames[opt.frame + k + 1].timestamp_s;
    f.ego = seq.frames[opt.frame + k + 1].ego;
    f.state = OccupancyStateGrid(H, W);
    f.velocity = VelocityGrid(H, W);
    f.semantic = warped[k];
    f.flow = flows[k];
    out.frames.push_back(std::move(f));
  }
  out.instances.assign(opt.steps, {});
  write_gseq(opt.out_path, out, false);

  json manifest;
  manifest["config_hash"] =
      config_hash(opt.in_path + "|" + std::to_string(opt.frame) + "|" + std::to_string(opt.steps));
  manifest["in"] = opt.in_path;
  manifest["frame"] = opt.frame;
  manifest["steps"] = opt.steps;
  write_text_file(opt.out_path + ".manifest.json", manifest.dump(1) + "\n");
}

}  // namespace gridflow
