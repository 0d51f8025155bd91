#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vsplit {

struct PublicKey {
  mpz_class n;
  mpz_class n_squared;
  std::size_t bits = 0;
  std::uint64_t id = 0;
};

struct PrivateKey {
  mpz_class lambda;
  mpz_class mu;
};

struct KeyPair {
  PublicKey pub;
  PrivateKey priv;
};

/// Paillier key with g = n + 1. Primes are bits/2 long with the two top
/// bits set, so n has exactly `bits` bits. Deterministic under `seed`.
/// bits must be 512 (test), 1024 or 2048.
KeyPair keygen(std::size_t bits, std::uint64_t seed);

/// Test-mode key serialisation (hex fields in JSON).
std::string key_to_json(const KeyPair& key);
KeyPair key_from_json(std::string_view text);

/// Encryption randomness. One stream per sender keeps runs reproducible.
class Encryptor {
 public:
  Encryptor(const PublicKey& pub, std::uint64_t seed);

  mpz_class encrypt(const mpz_class& m);
  /// Draws all randomness serially, then exponentiates in parallel, so the
  /// output does not depend on the thread count.
  std::vector<mpz_class> encrypt_batch(std::span<const mpz_class> plaintexts);
  std::vector<mpz_class> encrypt_batch_serial(std::span<const mpz_class> plaintexts);

  const PublicKey& key() const noexcept { return pub_; }

 private:
  mpz_class random_unit();
  PublicKey pub_;
  gmp_randclass rng_;
};

/// Plaintext in [0, n).
mpz_class decrypt(const KeyPair& key, const mpz_class& c);
/// Enc(a) (+) Enc(b) = Enc(a + b mod n)
mpz_class he_add(const PublicKey& pub, const mpz_class& a, const mpz_class& b);
/// Enc(m) ^ k = Enc(k * m mod n); negative k uses the inverse ciphertext.
mpz_class he_scale(const PublicKey& pub, const mpz_class& c, const mpz_class& k);

/// Wire form: 4-byte big-endian length, then the big-endian magnitude.
std::vector<std::uint8_t> serialize_ciphertext(const mpz_class& c);
mpz_class deserialize_ciphertext(std::span<const std::uint8_t> bytes);
std::size_t wire_size(const mpz_class& c);

}  // namespace vsplit
