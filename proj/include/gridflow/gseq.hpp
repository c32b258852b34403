#pragma once

// GSEQ1 grid-sequence binary format.
//
//   magic   8 bytes  "GSEQ\x00\x01\x00\x00"
//   u32 le  width, height, frame_count, channel_count (always 8)
//   f64 le  cell_size_m, dt_s
//   per frame:
//     f64 le timestamp
//     f64 le pose x_m, y_m, heading_rad
//     8 row-major f32-le planes: p_static, p_dynamic, p_unknown, vx, vy,
//     semantic, fx, fy. The two flow planes are all-NaN when flow is absent.
//
// The sidecar <name>.instances.json holds one array per frame of
// {id, centroid:[row,col], corners:[[r,c]x4], dynamic:bool}.

#include <string>

#include "gridflow/types.hpp"

namespace gridflow {

void write_gseq(const std::string& path, const FrameSequence& seq,
                bool write_sidecar = true);
FrameSequence read_gseq(const std::string& path, bool read_sidecar = true);

// scene.gseq -> scene.instances.json
std::string sidecar_path(const std::string& gseq_path);

}  // namespace gridflow
