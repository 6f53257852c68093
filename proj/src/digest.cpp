// SPDX-License-Identifier: Apache-2.0
#include "claimcheck/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace claimcheck {
namespace {

using Sha256 = std::array<unsigned char, 32>;

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};
using MdCtx = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

MdCtx new_sha256_ctx() {
  MdCtx ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest init failed");
  }
  return ctx;
}

Sha256 finish(EVP_MD_CTX* ctx) {
  Sha256 out{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx, out.data(), &len) != 1 || len != out.size()) {
    throw std::runtime_error("sha256: digest final failed");
  }
  return out;
}

std::string to_hex(const unsigned char* bytes, std::size_t n) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s(n * 2, '0');
  for (std::size_t i = 0; i < n; ++i) {
    s[2 * i] = kHex[bytes[i] >> 4];
    s[2 * i + 1] = kHex[bytes[i] & 0x0f];
  }
  return s;
}

Sha256 sha256(std::string_view data) {
  auto ctx = new_sha256_ctx();
  EVP_DigestUpdate(ctx.get(), data.data(), data.size());
  return finish(ctx.get());
}

}  // namespace

std::string Digest128::hex() const {
  unsigned char bytes[16];
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<unsigned char>(hi >> (56 - 8 * i));
    bytes[8 + i] = static_cast<unsigned char>(lo >> (56 - 8 * i));
  }
  return to_hex(bytes, 16);
}

Digest128 content_hash128(std::string_view data) {
  const Sha256 h = sha256(data);
  Digest128 d;
  for (int i = 0; i < 8; ++i) {
    d.hi = (d.hi << 8) | h[i];
    d.lo = (d.lo << 8) | h[8 + i];
  }
  return d;
}

std::string sha256_hex(std::string_view data) {
  const Sha256 h = sha256(data);
  return to_hex(h.data(), h.size());
}

std::string file_sha256_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  auto ctx = new_sha256_ctx();
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    const auto got = in.gcount();
    if (got > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(got));
  }
  const Sha256 h = finish(ctx.get());
  return to_hex(h.data(), h.size());
}

}  // namespace claimcheck
