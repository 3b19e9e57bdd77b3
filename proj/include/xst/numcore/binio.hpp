#pragma once

// Little-endian binary primitives shared by the feature and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace xst::numcore::binio {

class TruncatedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename U>
void put_uint(std::ostream& os, U v) {
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf, sizeof(U));
}

template <typename U>
U get_uint(std::istream& is, const std::string& what) {
  unsigned char buf[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) throw TruncatedError("truncated input while reading " + what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

inline void put_f32(std::ostream& os, float f) { put_uint<std::uint32_t>(os, std::bit_cast<std::uint32_t>(f)); }

inline float get_f32(std::istream& is, const std::string& what) {
  return std::bit_cast<float>(get_uint<std::uint32_t>(is, what));
}

inline void put_string(std::ostream& os, const std::string& s) {
  put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is, const std::string& what, std::size_t max_len = 1 << 20) {
  const auto n = get_uint<std::uint32_t>(is, what + " length");
  if (n > max_len) throw TruncatedError("implausible length " + std::to_string(n) + " for " + what);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw TruncatedError("truncated input while reading " + what);
  return s;
}

}  // namespace xst::numcore::binio
