#include "shardsim/sha256.hpp"

#include <openssl/evp.h>

#include <stdexcept>

namespace shardsim {

Sha256Digest sha256(std::string_view data) {
  Sha256Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != out.size()) {
    throw std::runtime_error("sha256: EVP_Digest failed");
  }
  return out;
}

std::string hex_digest(const Sha256Digest& digest) {
  static const char* kHex = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (std::uint8_t b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xF]);
  }
  return out;
}

std::uint64_t digest_mod(const Sha256Digest& digest, std::uint64_t k) {
  if (k == 0) throw std::invalid_argument("digest_mod: k must be positive");
  // Horner over the big-endian bytes; rem stays < k <= 2^32 in practice but
  // the 128-bit intermediate keeps this correct for any 64-bit k.
  unsigned __int128 rem = 0;
  for (std::uint8_t b : digest) rem = (rem * 256 + b) % k;
  return static_cast<std::uint64_t>(rem);
}

int hash_shard(std::string_view account_id, int k) {
  if (k < 1) throw std::invalid_argument("hash_shard: k must be >= 1");
  return static_cast<int>(
             digest_mod(sha256(account_id), static_cast<std::uint64_t>(k))) +
         1;
}

Sha256Stream::Sha256Stream() : ctx_(EVP_MD_CTX_new()) {
  if (!ctx_ || EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(),
                                 nullptr) != 1) {
    throw std::runtime_error("Sha256Stream: init failed");
  }
}

Sha256Stream::~Sha256Stream() {
  EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_));
}

void Sha256Stream::update(std::string_view data) {
  if (EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data.data(),
                       data.size()) != 1) {
    throw std::runtime_error("Sha256Stream: update failed");
  }
}

Sha256Digest Sha256Stream::finish() {
  Sha256Digest out{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), out.data(), &len) !=
          1 ||
      len != out.size()) {
    throw std::runtime_error("Sha256Stream: finalize failed");
  }
  return out;
}

}  // namespace shardsim
