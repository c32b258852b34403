#include "gridflow/gseq.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace gridflow {

namespace {

constexpr char kMagic[8] = {'G', 'S', 'E', 'Q', '\x00', '\x01', '\x00', '\x00'};
constexpr uint32_t kChannels = 8;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

void put_plane(std::ostream& os, const Plane& p) {
  std::vector<float> buf(p.v.size());
  for (size_t i = 0; i < p.v.size(); ++i) buf[i] = static_cast<float>(p.v[i]);
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

Plane get_plane(std::istream& is, int rows, int cols) {
  Plane p(rows, cols);
  std::vector<float> buf(p.v.size());
  is.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  for (size_t i = 0; i < p.v.size(); ++i) p.v[i] = buf[i];
  return p;
}

bool all_nan(const Plane& p) {
  for (double v : p.v)
    if (!std::isnan(v)) return false;
  return true;
}

bool any_nan(const Plane& p) {
  for (double v : p.v)
    if (std::isnan(v)) return true;
  return false;
}

}  // namespace

std::string sidecar_path(const std::string& gseq_path) {
  const std::string suffix = ".gseq";
  if (gseq_path.size() > suffix.size() &&
      gseq_path.compare(gseq_path.size() - suffix.size(), suffix.size(), suffix) == 0)
    return gseq_path.substr(0, gseq_path.size() - suffix.size()) + ".instances.json";
  return gseq_path + ".instances.json";
}

void write_gseq(const std::string& path, const FrameSequence& seq, bool write_sidecar) {
  seq.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  put<uint32_t>(os, static_cast<uint32_t>(seq.geometry.width_cells));
  put<uint32_t>(os, static_cast<uint32_t>(seq.geometry.height_cells));
  put<uint32_t>(os, static_cast<uint32_t>(seq.frames.size()));
  put<uint32_t>(os, kChannels);
  put<double>(os, seq.geometry.cell_size_m);
  put<double>(os, seq.dt_s);

  const int h = seq.geometry.height_cells, w = seq.geometry.width_cells;
  const Plane nan_plane(h, w, std::numeric_limits<double>::quiet_NaN());
  for (const Frame& f : seq.frames) {
    put<double>(os, f.timestamp_s);
    put<double>(os, f.ego.x_m);
    put<double>(os, f.ego.y_m);
    put<double>(os, f.ego.heading_rad);
    put_plane(os, f.state.p_static);
    put_plane(os, f.state.p_dynamic);
    put_plane(os, f.state.p_unknown);
    put_plane(os, f.velocity.vx);
    put_plane(os, f.velocity.vy);
    put_plane(os, f.semantic.p_vehicle);
    put_plane(os, f.flow ? f.flow->fx : nan_plane);
    put_plane(os, f.flow ? f.flow->fy : nan_plane);
  }
  if (!os) throw ConfigError("write failed: " + path);

  if (write_sidecar) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& insts : seq.instances) {
      nlohmann::json arr = nlohmann::json::array();
      for (const VehicleInstance& v : insts) {
        nlohmann::json corners = nlohmann::json::array();
        for (const auto& c : v.corners) corners.push_back({c[0], c[1]});
        arr.push_back({{"id", v.id},
                       {"centroid", {v.centroid_row, v.centroid_col}},
                       {"corners", corners},
                       {"dynamic", v.dynamic}});
      }
      frames.push_back(arr);
    }
    std::ofstream js(sidecar_path(path));
    if (!js) throw ConfigError("cannot open for writing: " + sidecar_path(path));
    js << frames.dump(1) << "\n";
  }
}

FrameSequence read_gseq(const std::string& path, bool read_sidecar) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ConfigError("not a GSEQ1 file: " + path);

  FrameSequence seq;
  seq.geometry.width_cells = static_cast<int>(get<uint32_t>(is));
  seq.geometry.height_cells = static_cast<int>(get<uint32_t>(is));
  const uint32_t frame_count = get<uint32_t>(is);
  const uint32_t channels = get<uint32_t>(is);
  if (channels != kChannels) throw ConfigError("unsupported GSEQ channel count");
  seq.geometry.cell_size_m = get<double>(is);
  seq.dt_s = get<double>(is);
  seq.geometry.validate();

  const int h = seq.geometry.height_cells, w = seq.geometry.width_cells;
  for (uint32_t i = 0; i < frame_count; ++i) {
    Frame f;
    f.timestamp_s = get<double>(is);
    f.ego.x_m = get<double>(is);
    f.ego.y_m = get<double>(is);
    f.ego.heading_rad = get<double>(is);
    f.state.p_static = get_plane(is, h, w);
    f.state.p_dynamic = get_plane(is, h, w);
    f.state.p_unknown = get_plane(is, h, w);
    f.velocity.vx = get_plane(is, h, w);
    f.velocity.vy = get_plane(is, h, w);
    f.semantic.p_vehicle = get_plane(is, h, w);
    Plane fx = get_plane(is, h, w);
    Plane fy = get_plane(is, h, w);
    if (!is) throw ConfigError("truncated GSEQ file: " + path);
    if (all_nan(fx) && all_nan(fy)) {
      // flow absent
    } else if (any_nan(fx) || any_nan(fy)) {
      throw ConfigError("corrupt flow planes in " + path);
    } else {
      FlowGrid flow;
      flow.fx = std::move(fx);
      flow.fy = std::move(fy);
      f.flow = std::move(flow);
    }
    seq.frames.push_back(std::move(f));
  }
  seq.instances.assign(frame_count, {});

  if (read_sidecar) {
    std::ifstream js(sidecar_path(path));
    if (js) {
      nlohmann::json doc;
      try {
        js >> doc;
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad instances sidecar: " + std::string(e.what()));
      }
      if (!doc.is_array() || doc.size() != frame_count)
        throw ConfigError("instances sidecar does not match frame count");
      for (uint32_t i = 0; i < frame_count; ++i) {
        for (const auto& jv : doc[i]) {
          VehicleInstance v;
          v.id = jv.at("id").get<int>();
          v.centroid_row = jv.at("centroid")[0].get<double>();
          v.centroid_col = jv.at("centroid")[1].get<double>();
          for (int k = 0; k < 4; ++k) {
            v.corners[k][0] = jv.at("corners")[k][0].get<double>();
            v.corners[k][1] = jv.at("corners")[k][1].get<double>();
          }
          v.dynamic = jv.at("dynamic").get<bool>();
          seq.instances[i].push_back(v);
        }
      }
    }
  }
  seq.validate();
  return seq;
}

}  // namespace gridflow
