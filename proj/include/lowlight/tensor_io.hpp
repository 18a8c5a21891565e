#ifndef LOWLIGHT_TENSOR_IO_HPP
#define LOWLIGHT_TENSOR_IO_HPP

// TNSR v1 binary tensor files:
//   "TNSR" | u32 version = 1 | u32 dtype (1 = f64 LE) | u32 ndim | ndim x u64 dims | payload
// All integers little-endian, payload row-major IEEE-754 binary64 little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "lowlight/tensor.hpp"

namespace lowlight {

inline constexpr std::uint32_t kTnsrVersion = 1;
inline constexpr std::uint32_t kTnsrDtypeF64 = 1;

namespace detail {

template <typename U>
void put_le(std::vector<unsigned char>& out, U v) {
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<unsigned char>(v >> (8 * b)));
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<U>(p[b]) << (8 * b);
  return v;
}

}  // namespace detail

inline std::vector<unsigned char> encode_tnsr(const Tensor& t) {
  std::vector<unsigned char> out = {'T', 'N', 'S', 'R'};
  detail::put_le<std::uint32_t>(out, kTnsrVersion);
  detail::put_le<std::uint32_t>(out, kTnsrDtypeF64);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.dims()) detail::put_le<std::uint64_t>(out, d);
  out.reserve(out.size() + 8 * t.size());
  for (double v : t.values()) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

inline Tensor decode_tnsr(const std::vector<unsigned char>& bytes) {
  std::size_t pos = 0;
  auto need = [&](std::size_t n, const char* what) {
    if (bytes.size() - pos < n || pos > bytes.size()) {
      throw IoError(std::string("TNSR: truncated while reading ") + what);
    }
  };
  need(16, "header");
  if (std::memcmp(bytes.data(), "TNSR", 4) != 0) throw IoError("TNSR: bad magic");
  pos = 4;
  const auto version = detail::get_le<std::uint32_t>(bytes.data() + pos);
  pos += 4;
  if (version != kTnsrVersion) throw IoError("TNSR: unsupported version " + std::to_string(version));
  const auto dtype = detail::get_le<std::uint32_t>(bytes.data() + pos);
  pos += 4;
  if (dtype != kTnsrDtypeF64) throw IoError("TNSR: unsupported dtype " + std::to_string(dtype));
  const auto ndim = detail::get_le<std::uint32_t>(bytes.data() + pos);
  pos += 4;
  need(8ULL * ndim, "dims");
  Shape dims(ndim);
  const std::size_t max_elems = (bytes.size() - pos - 8ULL * ndim) / 8;
  std::size_t n = 1;
  for (auto& d : dims) {
    d = detail::get_le<std::uint64_t>(bytes.data() + pos);
    pos += 8;
    if (d == 0) throw IoError("TNSR: zero extent");
    if (d > max_elems || n > max_elems / d) throw IoError("TNSR: truncated while reading payload");
    n *= d;
  }
  need(8 * n, "payload");
  if (bytes.size() - pos != 8 * n) throw IoError("TNSR: trailing bytes after payload");
  std::vector<double> data(n);
  for (auto& v : data) {
    v = std::bit_cast<double>(detail::get_le<std::uint64_t>(bytes.data() + pos));
    pos += 8;
  }
  return Tensor(std::move(dims), std::move(data));
}

inline void write_tnsr(const std::string& path, const Tensor& t) {
  const auto bytes = encode_tnsr(t);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing '" + path + "'");
}

inline Tensor read_tnsr(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_tnsr(bytes);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace lowlight

#endif  // LOWLIGHT_TENSOR_IO_HPP
