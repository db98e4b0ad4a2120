// SPDX-License-Identifier: Apache-2.0
//
// Flat binary checkpoint layout:
//   magic "HISTCKP1" (8 bytes)
//   u32 version (=1), u32 tensor count
//   shape table: per tensor { u32 name_len, name bytes, u64 rows, u64 cols }
//   parameter blob: row-major f64 values, tensors in table order
#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "hist/nn.hpp"

namespace hist {

constexpr char kCheckpointMagic[8] = {'H', 'I', 'S', 'T', 'C', 'K', 'P', '1'};
constexpr uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const ParamStore& ps) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, 8);
  uint32_t version = kCheckpointVersion;
  uint32_t count = static_cast<uint32_t>(ps.all().size());
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&count), 4);
  for (const auto& [name, p] : ps.all()) {
    uint32_t len = static_cast<uint32_t>(name.size());
    uint64_t rows = p->v.rows(), cols = p->v.cols();
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(name.data(), len);
    out.write(reinterpret_cast<const char*>(&rows), 8);
    out.write(reinterpret_cast<const char*>(&cols), 8);
  }
  for (const auto& [name, p] : ps.all()) {
    // Eigen stores column-major; the file contract is row-major.
    MatXd rm = p->v;
    for (int i = 0; i < rm.rows(); ++i)
      out.write(reinterpret_cast<const char*>(
                    Eigen::RowVectorXd(rm.row(i)).data()),
                static_cast<std::streamsize>(sizeof(double) * rm.cols()));
  }
  if (!out) throw IoError("short write on checkpoint: " + path);
}

// Loads values into an already-constructed ParamStore; shapes must match.
inline void load_checkpoint(const std::string& path, ParamStore& ps) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw IoError("bad checkpoint magic: " + path);
  uint32_t version = 0, count = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&count), 4);
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version");
  struct Entry {
    std::string name;
    uint64_t rows, cols;
  };
  std::vector<Entry> entries(count);
  for (auto& e : entries) {
    uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    e.name.resize(len);
    in.read(e.name.data(), len);
    in.read(reinterpret_cast<char*>(&e.rows), 8);
    in.read(reinterpret_cast<char*>(&e.cols), 8);
  }
  for (const auto& e : entries) {
    if (!ps.has(e.name))
      throw IoError("checkpoint tensor has no home: " + e.name);
    TPtr p = ps.get(e.name);
    if (static_cast<uint64_t>(p->v.rows()) != e.rows ||
        static_cast<uint64_t>(p->v.cols()) != e.cols)
      throw IoError("checkpoint shape mismatch for " + e.name);
    std::vector<double> buf(e.rows * e.cols);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(sizeof(double) * buf.size()));
    for (uint64_t i = 0; i < e.rows; ++i)
      for (uint64_t j = 0; j < e.cols; ++j)
        p->v(static_cast<int>(i), static_cast<int>(j)) = buf[i * e.cols + j];
  }
  if (!in) throw IoError("truncated checkpoint: " + path);
}

}  // namespace hist
