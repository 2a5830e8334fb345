#ifndef PERCEPT_HASH_HPP
#define PERCEPT_HASH_HPP

#include <array>
#include <cstdio>
#include <string>
#include <string_view>

#include <openssl/sha.h>

namespace percept {

/// Lower-case hex SHA-256 of `data`.
inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest.data());
  std::string out;
  out.reserve(2 * digest.size());
  char byte[3];
  for (unsigned char c : digest) {
    std::snprintf(byte, sizeof(byte), "%02x", c);
    out += byte;
  }
  return out;
}

}  // namespace percept

#endif  // PERCEPT_HASH_HPP
