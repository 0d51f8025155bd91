#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <vector>

#include "vsplit/core/tensor.hpp"
#include "vsplit/privacy/paillier.hpp"
#include "vsplit/protocol/transcript.hpp"

namespace vsplit {

/// Signed fixed point with scale 2^scale_bits, mapped into Z_n by x -> x mod n.
struct FixedPoint {
  unsigned scale_bits = 24;

  /// Throws RangeError naming `index` when |x| >= 2^(63 - scale_bits) or x is not finite.
  std::int64_t quantize(double x, std::size_t index) const;
  mpz_class encode(double x, const PublicKey& pub, std::size_t index) const;
  /// Values above n/2 are read as negative. `scale_power` counts how many
  /// fixed-point factors the plaintext carries (2 after a plaintext-scalar product).
  double decode(const mpz_class& v, const PublicKey& pub, unsigned scale_power = 1) const;
};

struct EncryptedTensor {
  Shape shape;
  std::vector<mpz_class> cells;
  unsigned scale_power = 1;

  std::size_t size() const noexcept { return cells.size(); }
  std::size_t wire_bytes() const;
};

/// Fixed-point encode and encrypt every element. `parties` bounds the later
/// sum: each encoded magnitude must stay below n / (2 * parties).
EncryptedTensor encrypt_tensor(const Tensor& x, Encryptor& enc, const FixedPoint& fp, std::size_t parties);

/// Element-wise homomorphic sum of same-shape, same-scale tensors.
EncryptedTensor he_sum(const PublicKey& pub, const std::vector<const EncryptedTensor*>& parts);

/// Each column k multiplied by the plaintext weight w[k] (fixed point), so
/// the result carries one more scale factor.
EncryptedTensor he_scale_cols(const PublicKey& pub, const EncryptedTensor& x, const Tensor& w, const FixedPoint& fp);

/// Column sums of g (.) x under encryption: out[k] = sum_r g[r,k] * x[r,k].
EncryptedTensor he_weighted_colsum(const PublicKey& pub, const EncryptedTensor& x, const Tensor& g, const FixedPoint& fp);

Tensor decrypt_tensor(const KeyPair& key, const EncryptedTensor& x, const FixedPoint& fp);

/// One-shot secure aggregation: participant i encrypts parts[i] and sends
/// it to the server, the server combines the ciphertexts and forwards only
/// the aggregate to the decryptor, which returns the decoded sum. Messages
/// go to `transcript` when given.
Tensor secure_sum(const std::vector<Tensor>& parts, const KeyPair& key, std::uint64_t seed, const FixedPoint& fp = {},
                  Transcript* transcript = nullptr, std::size_t round = 0);

}  // namespace vsplit
