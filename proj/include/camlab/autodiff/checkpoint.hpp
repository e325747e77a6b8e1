// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>

#include "camlab/autodiff/tensor.hpp"

namespace camlab::ad {

// Layout (all integers little-endian):
//   "CAMLABCK"  u32 version  u64 entry_count
//   per entry:  u32 name_len  name bytes  u32 ndim  u64 dims[ndim]  f64 data[numel]
inline constexpr char kCheckpointMagic[8] = {'C', 'A', 'M', 'L', 'A', 'B', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw IoError("checkpoint: unexpected end of file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("checkpoint: unexpected end of file");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const std::map<std::string, Tensor>& tensors) {
  out.write(kCheckpointMagic, 8);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u64(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(t.dim()));
    for (auto d : t.shape()) detail::put_u64(out, d);
    for (double v : t.data()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
}

inline std::map<std::string, Tensor> read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::string(magic, 8) != std::string(kCheckpointMagic, 8))
    throw IoError("checkpoint: bad magic");
  if (const auto ver = detail::get_u32(in); ver != kCheckpointVersion)
    throw IoError("checkpoint: unsupported version " + std::to_string(ver));
  const auto count = detail::get_u64(in);
  std::map<std::string, Tensor> out;
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto len = detail::get_u32(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw IoError("checkpoint: truncated name");
    const auto ndim = detail::get_u32(in);
    if (ndim == 0 || ndim > 8) throw IoError("checkpoint: bad rank for '" + name + "'");
    Shape shape(ndim);
    for (auto& d : shape) d = detail::get_u64(in);
    std::vector<double> data(numel(shape));
    for (auto& v : data) v = std::bit_cast<double>(detail::get_u64(in));
    out.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

inline void save_checkpoint(const std::string& path, const std::map<std::string, Tensor>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  write_checkpoint(out, tensors);
  if (!out) throw IoError("error while writing checkpoint '" + path + "'");
}

inline std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace camlab::ad
