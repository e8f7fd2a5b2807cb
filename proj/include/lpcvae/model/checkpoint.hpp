#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lpcvae/model/lpcvae.hpp"

namespace lpcvae::model {

inline constexpr char kCheckpointMagic[] = "LPCVAE-CKPT-v1";

/// On-disk model: free-form metadata text (the resolved run configuration and
/// normalization statistics), the run seed, and every named parameter.
///
/// Layout, all integers and floats little-endian:
///   "LPCVAE-CKPT-v1\n"
///   u64 metadata length, metadata bytes
///   u64 seed
///   u64 parameter count, then per parameter:
///     u64 name length, name bytes, u64 rank, rank × u64 dims, numel × f64
struct Checkpoint {
  std::string metadata;
  std::uint64_t seed = 0;
  ParameterSet params;
};

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw IngestionError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline std::string get_bytes(std::istream& in, std::uint64_t n) {
  if (n > (1ULL << 32)) throw IngestionError("checkpoint field length " + std::to_string(n) + " is implausible");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw IngestionError("checkpoint truncated");
  return s;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  out.put('\n');
  detail::put_u64(out, ck.metadata.size());
  out.write(ck.metadata.data(), static_cast<std::streamsize>(ck.metadata.size()));
  detail::put_u64(out, ck.seed);
  detail::put_u64(out, ck.params.size());
  for (const auto& [name, t] : ck.params.items()) {
    detail::put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u64(out, t.rank());
    for (auto d : t.shape()) detail::put_u64(out, d);
    for (double v : t.data()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
}

inline Checkpoint read_checkpoint(std::istream& in) {
  std::string magic(sizeof(kCheckpointMagic), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != std::string(kCheckpointMagic) + "\n")
    throw IngestionError("not an LPCVAE-CKPT-v1 checkpoint");
  Checkpoint ck;
  ck.metadata = detail::get_bytes(in, detail::get_u64(in));
  ck.seed = detail::get_u64(in);
  const auto count = detail::get_u64(in);
  for (std::uint64_t p = 0; p < count; ++p) {
    std::string name = detail::get_bytes(in, detail::get_u64(in));
    const auto rank = detail::get_u64(in);
    if (rank == 0 || rank > 8) throw IngestionError("parameter '" + name + "' has invalid rank");
    ad::Shape shape(rank);
    for (auto& d : shape) d = detail::get_u64(in);
    std::vector<double> values(ad::numel_of(shape));
    for (double& v : values) v = std::bit_cast<double>(detail::get_u64(in));
    ck.params.add(std::move(name), Tensor(std::move(shape), std::move(values), true));
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write checkpoint '" + path + "'");
  write_checkpoint(out, ck);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace lpcvae::model
