#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "pgen/error.hpp"
#include "pgen/model.hpp"

namespace pgen {

// Binary checkpoint: magic "PGEN", format version u32, five u32 config
// values (hidden, emb, vocab, max_len, parameter count), then each
// parameter as name length u32, name bytes, rank u32, dims u32 each,
// values as little-endian IEEE-754 doubles. All integers little-endian.

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError(std::string("checkpoint truncated reading ") + what);
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f64(std::ostream& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline double read_f64(std::istream& in, const char* what) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) {
    throw FormatError(std::string("checkpoint truncated reading ") + what);
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ModelConfig& config,
                            const ParameterStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write("PGEN", 4);
  detail::write_u32(out, kCheckpointVersion);
  detail::write_u32(out, static_cast<std::uint32_t>(config.hidden_dim));
  detail::write_u32(out, static_cast<std::uint32_t>(config.emb_dim));
  detail::write_u32(out, static_cast<std::uint32_t>(config.vocab_size));
  detail::write_u32(out, static_cast<std::uint32_t>(config.max_len));
  detail::write_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, value] : store.items()) {
    detail::write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_u32(out, static_cast<std::uint32_t>(value.rank()));
    for (std::size_t d = 0; d < value.rank(); ++d) {
      detail::write_u32(out, static_cast<std::uint32_t>(value.dim(d)));
    }
    for (std::size_t i = 0; i < value.numel(); ++i) detail::write_f64(out, value[i]);
  }
  if (!out) throw IoError("write failed for " + path);
}

inline std::pair<ModelConfig, ParameterStore> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "PGEN") {
    throw FormatError(path + ": bad checkpoint magic (expected \"PGEN\")");
  }
  std::uint32_t version = detail::read_u32(in, "version");
  if (version != kCheckpointVersion) {
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig config;
  config.hidden_dim = detail::read_u32(in, "hidden_dim");
  config.emb_dim = detail::read_u32(in, "emb_dim");
  config.vocab_size = detail::read_u32(in, "vocab_size");
  config.max_len = detail::read_u32(in, "max_len");
  std::uint32_t count = detail::read_u32(in, "parameter count");
  config.validate();

  ParameterStore store;
  for (std::uint32_t p = 0; p < count; ++p) {
    std::uint32_t name_len = detail::read_u32(in, "name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw FormatError(path + ": truncated parameter name");
    std::uint32_t rank = detail::read_u32(in, "rank");
    std::vector<std::size_t> shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d) shape[d] = detail::read_u32(in, "dim");
    Array value(shape);
    for (std::size_t i = 0; i < value.numel(); ++i) value[i] = detail::read_f64(in, "value");
    store.add(std::move(name), std::move(value));
  }
  return {config, std::move(store)};
}

}  // namespace pgen
