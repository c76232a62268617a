// sim2real-lidar: two-domain LiDAR benchmark and alignment training toolkit
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "s2r/geometry.hpp"
#include "s2r/pointcloud.hpp"

namespace s2r {

// ---------------------------------------------------------------------------
// Canonical text formatting. All JSON-ish artifacts are emitted with sorted
// keys and doubles at 17 significant digits so identical values always
// produce identical bytes.

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// FNV-1a 64-bit content digests (integrity bookkeeping, not cryptography).

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xCBF29CE484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

inline std::string digest_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for read: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::string file_digest(const std::string& path) {
  std::string bytes = read_file_bytes(path);
  return digest_hex(fnv1a64(bytes.data(), bytes.size()));
}

// ---------------------------------------------------------------------------
// JPCD point-cloud container.
//
//   magic "JPCD" | version u32 = 1 | point count u32 | channel count u8 |
//   channel names (u8 length + ASCII each) | N x (3 + d) float32 rows
//
// All integers and floats little-endian; rows are x, y, z then the feature
// channels in declared order.

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline void put_f32(std::string& out, float f) {
  put_u32(out, std::bit_cast<std::uint32_t>(f));
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes, std::string path)
      : bytes_(bytes), path_(std::move(path)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }

  std::uint32_t u32() {
    const char* p = take(4);
    return static_cast<std::uint32_t>(static_cast<unsigned char>(p[0])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(p[1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(p[2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(p[3])) << 24;
  }

  float f32() { return std::bit_cast<float>(u32()); }

  std::string str(std::size_t n) { return std::string(take(n), n); }

 private:
  const char* take(std::size_t n) {
    if (pos_ + n > bytes_.size())
      throw std::runtime_error("truncated file: " + path_);
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_jpcd(const PointCloud& cloud) {
  std::string out;
  const std::size_t n = cloud.size();
  const std::size_t d = cloud.channel_count();
  out.reserve(16 + n * (3 + d) * 4);
  out += "JPCD";
  detail::put_u32(out, 1u);
  detail::put_u32(out, static_cast<std::uint32_t>(n));
  out.push_back(static_cast<char>(d));
  for (const auto& name : cloud.channel_names()) {
    if (name.size() > 255) throw std::invalid_argument("channel name too long: " + name);
    out.push_back(static_cast<char>(name.size()));
    out += name;
  }
  for (std::size_t i = 0; i < n; ++i) {
    CartesianPoint p = cloud.point(i);
    detail::put_f32(out, static_cast<float>(p.x));
    detail::put_f32(out, static_cast<float>(p.y));
    detail::put_f32(out, static_cast<float>(p.z));
    for (std::size_t ch = 0; ch < d; ++ch)
      detail::put_f32(out, static_cast<float>(cloud.feature(i, ch)));
  }
  return out;
}

inline void write_jpcd(const std::string& path, const PointCloud& cloud) {
  write_file_bytes(path, encode_jpcd(cloud));
}

// Domain defaults to the channel-count convention (featureless clouds are
// simulation output) and can be overridden by a dataset index.
inline PointCloud decode_jpcd(const std::string& bytes, const std::string& path) {
  detail::ByteReader r(bytes, path);
  if (r.str(4) != "JPCD") throw std::runtime_error("bad magic, not a JPCD file: " + path);
  std::uint32_t version = r.u32();
  if (version != 1) throw std::runtime_error("unsupported JPCD version in " + path);
  std::uint32_t n = r.u32();
  std::uint8_t d = r.u8();
  std::vector<std::string> channels;
  channels.reserve(d);
  for (std::uint8_t i = 0; i < d; ++i) {
    std::uint8_t len = r.u8();
    channels.push_back(r.str(len));
  }
  PointCloud cloud(d == 0 ? Domain::kSim : Domain::kReal, channels);
  cloud.reserve(n);
  std::vector<double> feats(d);
  for (std::uint32_t i = 0; i < n; ++i) {
    CartesianPoint p;
    p.x = r.f32();
    p.y = r.f32();
    p.z = r.f32();
    for (std::uint8_t ch = 0; ch < d; ++ch) feats[ch] = r.f32();
    cloud.add_point(p, feats);
  }
  return cloud;
}

inline PointCloud read_jpcd(const std::string& path) {
  return decode_jpcd(read_file_bytes(path), path);
}

// ---------------------------------------------------------------------------
// Label file: one JSON object per line.

struct LabeledBox {
  int scene_id = 0;
  Box3D box;
};

inline std::string encode_label_line(const LabeledBox& lb) {
  std::string s = "{\"category_id\":" + std::to_string(lb.box.category_id);
  s += ",\"center\":[" + format_double(lb.box.center.x) + "," +
       format_double(lb.box.center.y) + "," + format_double(lb.box.center.z) + "]";
  s += ",\"scene_id\":" + std::to_string(lb.scene_id);
  s += ",\"size\":[" + format_double(lb.box.length) + "," + format_double(lb.box.width) +
       "," + format_double(lb.box.height) + "]";
  s += ",\"vel\":[" + format_double(lb.box.vx) + "," + format_double(lb.box.vy) + "]";
  s += ",\"yaw_deg\":" + format_double(lb.box.yaw_deg) + "}";
  return s;
}

inline void write_labels(const std::string& path, const std::vector<LabeledBox>& labels) {
  std::string out;
  for (const auto& lb : labels) {
    out += encode_label_line(lb);
    out += '\n';
  }
  write_file_bytes(path, out);
}

inline std::vector<LabeledBox> read_labels(const std::string& path) {
  std::string bytes = read_file_bytes(path);
  std::vector<LabeledBox> labels;
  std::istringstream ss(bytes);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    LabeledBox lb;
    lb.scene_id = j.at("scene_id").get<int>();
    lb.box.category_id = j.at("category_id").get<int>();
    lb.box.center = {j.at("center")[0].get<double>(), j.at("center")[1].get<double>(),
                     j.at("center")[2].get<double>()};
    lb.box.length = j.at("size")[0].get<double>();
    lb.box.width = j.at("size")[1].get<double>();
    lb.box.height = j.at("size")[2].get<double>();
    lb.box.vx = j.at("vel")[0].get<double>();
    lb.box.vy = j.at("vel")[1].get<double>();
    lb.box.yaw_deg = j.at("yaw_deg").get<double>();
    labels.push_back(lb);
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Dataset index.

struct DatasetIndex {
  Domain domain = Domain::kSim;
  std::vector<std::string> channels;
  std::vector<std::string> files;  // relative cloud paths, scene order
  std::string label_file = "labels.jsonl";
  std::vector<std::uint64_t> scene_seeds;
};

inline std::string encode_index(const DatasetIndex& idx) {
  std::string s = "{\"channels\":[";
  for (std::size_t i = 0; i < idx.channels.size(); ++i) {
    if (i) s += ",";
    s += "\"" + json_escape(idx.channels[i]) + "\"";
  }
  s += "],\"domain\":\"";
  s += domain_name(idx.domain);
  s += "\",\"files\":[";
  for (std::size_t i = 0; i < idx.files.size(); ++i) {
    if (i) s += ",";
    s += "\"" + json_escape(idx.files[i]) + "\"";
  }
  s += "],\"label_file\":\"" + json_escape(idx.label_file) + "\",\"scene_seeds\":[";
  for (std::size_t i = 0; i < idx.scene_seeds.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(idx.scene_seeds[i]);
  }
  s += "]}\n";
  return s;
}

inline void write_index(const std::string& path, const DatasetIndex& idx) {
  write_file_bytes(path, encode_index(idx));
}

inline DatasetIndex read_index(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_bytes(path));
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  DatasetIndex idx;
  idx.domain = domain_from_name(j.at("domain").get<std::string>());
  idx.channels = j.at("channels").get<std::vector<std::string>>();
  idx.files = j.at("files").get<std::vector<std::string>>();
  idx.label_file = j.at("label_file").get<std::string>();
  for (const auto& s : j.at("scene_seeds")) idx.scene_seeds.push_back(s.get<std::uint64_t>());
  return idx;
}

}  // namespace s2r
