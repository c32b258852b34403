#include "gridflow/nn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace gridflow::nn {

namespace {

constexpr char kCkptMagic[8] = {'G', 'F', 'C', 'K', '\x00', '\x01', '\x00', '\x00'};
constexpr char kStateMagic[8] = {'G', 'F', 'T', 'S', '\x00', '\x01', '\x00', '\x00'};

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

void put_table_f32(std::ostream& os, const ParamTable& t) {
  put<uint32_t>(os, static_cast<uint32_t>(t.count()));
  for (size_t i = 0; i < t.count(); ++i) {
    put<uint32_t>(os, static_cast<uint32_t>(t.names[i].size()));
    os.write(t.names[i].data(), static_cast<std::streamsize>(t.names[i].size()));
    put<uint32_t>(os, static_cast<uint32_t>(t.shapes[i].size()));
    for (int d : t.shapes[i]) put<uint32_t>(os, static_cast<uint32_t>(d));
    std::vector<float> buf(t.values[i].size());
    for (size_t j = 0; j < buf.size(); ++j) buf[j] = static_cast<float>(t.values[i][j]);
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
}

ParamTable get_table_f32(std::istream& is) {
  ParamTable t;
  const uint32_t n = get<uint32_t>(is);
  for (uint32_t i = 0; i < n; ++i) {
    const uint32_t name_len = get<uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const uint32_t ndim = get<uint32_t>(is);
    std::vector<int> shape(ndim);
    for (uint32_t d = 0; d < ndim; ++d) shape[d] = static_cast<int>(get<uint32_t>(is));
    const int idx = t.add(name, shape);
    std::vector<float> buf(t.values[idx].size());
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    for (size_t j = 0; j < buf.size(); ++j) t.values[idx][j] = buf[j];
  }
  if (!is) throw ConfigError("truncated checkpoint");
  return t;
}

void put_values_f64(std::ostream& os, const ParamTable& t) {
  for (const Vec& v : t.values)
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void get_values_f64(std::istream& is, ParamTable& t) {
  for (Vec& v : t.values)
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamTable& params,
                     const std::string& manifest_json) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  os.write(kCkptMagic, sizeof(kCkptMagic));
  put_table_f32(os, params);
  if (!os) throw ConfigError("write failed: " + path);
  std::ofstream js(path + ".json");
  js << manifest_json << "\n";
}

ParamTable load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("missing checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCkptMagic, sizeof(kCkptMagic)) != 0)
    throw ConfigError("not a checkpoint file: " + path);
  return get_table_f32(is);
}

std::string load_checkpoint_manifest(const std::string& path) {
  std::ifstream js(path + ".json");
  if (!js) throw ConfigError("missing checkpoint manifest: " + path + ".json");
  std::string text((std::istreambuf_iterator<char>(js)), std::istreambuf_iterator<char>());
  return text;
}

void save_train_state(const std::string& path, const ParamTable& params, const AdamState& st,
                      int next_epoch) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  os.write(kStateMagic, sizeof(kStateMagic));
  put<int64_t>(os, st.step_count);
  put<int32_t>(os, next_epoch);
  put<uint64_t>(os, params.total_size());
  put_values_f64(os, params);
  put_values_f64(os, st.m);
  put_values_f64(os, st.v);
  if (!os) throw ConfigError("write failed: " + path);
}

bool load_train_state(const std::string& path, ParamTable& params, AdamState& st,
                      int& next_epoch) {
  if (!std::filesystem::exists(path)) return false;
  std::ifstream is(path, std::ios::binary);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kStateMagic, sizeof(kStateMagic)) != 0)
    throw ConfigError("not a train-state file: " + path);
  st.m = params.zeros_like();
  st.v = params.zeros_like();
  st.step_count = get<int64_t>(is);
  next_epoch = get<int32_t>(is);
  const uint64_t total = get<uint64_t>(is);
  if (total != params.total_size()) throw ConfigError("train state does not match model");
  get_values_f64(is, params);
  get_values_f64(is, st.m);
  get_values_f64(is, st.v);
  if (!is) throw ConfigError("truncated train state: " + path);
  return true;
}

}  // namespace gridflow::nn
