// SHA-256 plumbing (OpenSSL libcrypto) plus the hash-based shard rule.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace shardsim {

using Sha256Digest = std::array<std::uint8_t, 32>;

Sha256Digest sha256(std::string_view data);

std::string hex_digest(const Sha256Digest& digest);

// Digest interpreted as a big-endian 256-bit integer, reduced mod k.
// Returned in [0, k).
std::uint64_t digest_mod(const Sha256Digest& digest, std::uint64_t k);

// Shard for an account id under the hash rule: (SHA-256 of the UTF-8 id,
// big-endian) mod k, plus 1. Result in 1..k.
int hash_shard(std::string_view account_id, int k);

// Incremental hasher for digesting streams (trace fingerprints).
class Sha256Stream {
 public:
  Sha256Stream();
  Sha256Stream(const Sha256Stream&) = delete;
  Sha256Stream& operator=(const Sha256Stream&) = delete;
  ~Sha256Stream();

  void update(std::string_view data);
  Sha256Digest finish();

 private:
  void* ctx_;  // EVP_MD_CTX, kept opaque to avoid leaking OpenSSL headers
};

}  // namespace shardsim
