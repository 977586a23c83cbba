#pragma once

// Binary checkpoint format: little-endian, with a JSON config echo followed
// by named float32 arrays.
//
//   magic   8 bytes  "LRGCKPT1"
//   version u32      currently 1
//   config  u32 len + bytes (UTF-8 JSON, caller-defined)
//   count   u32      number of arrays
//   per array: u32 name len + bytes, u32 rows, u32 cols, rows*cols f32

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "../core.hpp"
#include "tensor.hpp"

namespace lrgen::nn {

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  os.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  char b[4];
  is.read(b, 4);
  if (!is) throw ParseError("truncated checkpoint");
  std::uint32_t v;
  std::memcpy(&v, b, 4);
  return v;
}

}  // namespace detail

struct Checkpoint {
  std::string config;  // JSON echo of whatever settings produced the weights
  std::map<std::string, Tensor> arrays;
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open checkpoint for writing: " + path);
  os.write("LRGCKPT1", 8);
  detail::put_u32(os, 1);
  detail::put_u32(os, static_cast<std::uint32_t>(ck.config.size()));
  os.write(ck.config.data(), static_cast<std::streamsize>(ck.config.size()));
  detail::put_u32(os, static_cast<std::uint32_t>(ck.arrays.size()));
  for (const auto& [name, t] : ck.arrays) {
    detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u32(os, static_cast<std::uint32_t>(t.rows));
    detail::put_u32(os, static_cast<std::uint32_t>(t.cols));
    os.write(reinterpret_cast<const char*>(t.v.data()),
             static_cast<std::streamsize>(t.v.size() * sizeof(float)));
  }
  if (!os) throw Error("short write on checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "LRGCKPT1", 8) != 0)
    throw ParseError("not a checkpoint file: " + path);
  const std::uint32_t version = detail::get_u32(is);
  if (version != 1) throw ParseError("unsupported checkpoint version");
  Checkpoint ck;
  const std::uint32_t clen = detail::get_u32(is);
  ck.config.resize(clen);
  is.read(ck.config.data(), clen);
  const std::uint32_t count = detail::get_u32(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t nlen = detail::get_u32(is);
    std::string name(nlen, '\0');
    is.read(name.data(), nlen);
    const std::uint32_t rows = detail::get_u32(is);
    const std::uint32_t cols = detail::get_u32(is);
    Tensor t(static_cast<int>(rows), static_cast<int>(cols));
    is.read(reinterpret_cast<char*>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(float)));
    if (!is) throw ParseError("truncated checkpoint array: " + name);
    ck.arrays.emplace(std::move(name), std::move(t));
  }
  return ck;
}

// Hash of all array contents, for cheap identity checks between runs.
inline std::uint64_t weights_hash(const Checkpoint& ck) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& [name, t] : ck.arrays) {
    h = fnv1a(name.data(), name.size(), h);
    h = fnv1a(t.v.data(), t.v.size() * sizeof(float), h);
  }
  return h;
}

}  // namespace lrgen::nn
