// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace claimcheck {

// 128-bit content hash (leading half of SHA-256).
struct Digest128 {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  friend bool operator==(const Digest128&, const Digest128&) = default;
  std::string hex() const;
};

struct Digest128Hash {
  std::size_t operator()(const Digest128& d) const noexcept {
    return static_cast<std::size_t>(d.lo ^ (d.hi * 0x9e3779b97f4a7c15ULL));
  }
};

Digest128 content_hash128(std::string_view data);
std::string sha256_hex(std::string_view data);

// Hex SHA-256 of a file's bytes; throws std::runtime_error if unreadable.
std::string file_sha256_hex(const std::filesystem::path& path);

}  // namespace claimcheck
