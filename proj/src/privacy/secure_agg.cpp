#include "vsplit/privacy/secure_agg.hpp"

#include <cmath>

#include "vsplit/core/errors.hpp"
#include "vsplit/core/rng.hpp"

namespace vsplit {

std::int64_t FixedPoint::quantize(double x, std::size_t index) const {
  const double limit = std::ldexp(1.0, 63 - static_cast<int>(scale_bits));
  if (!std::isfinite(x) || std::abs(x) >= limit)
    throw RangeError("element " + std::to_string(index) + " = " + std::to_string(x) +
                     " cannot be encoded with scale 2^" + std::to_string(scale_bits));
  return std::llround(std::ldexp(x, static_cast<int>(scale_bits)));
}

mpz_class FixedPoint::encode(double x, const PublicKey& pub, std::size_t index) const {
  const std::int64_t q = quantize(x, index);
  mpz_class m;
  mpz_set_si(m.get_mpz_t(), q);
  if (m < 0) m += pub.n;
  return m;
}

double FixedPoint::decode(const mpz_class& v, const PublicKey& pub, unsigned scale_power) const {
  mpz_class s = v;
  if (s > pub.n / 2) s -= pub.n;
  return std::ldexp(s.get_d(), -static_cast<int>(scale_bits * scale_power));
}

std::size_t EncryptedTensor::wire_bytes() const {
  std::size_t n = 0;
  for (const auto& c : cells) n += wire_size(c);
  return n;
}

EncryptedTensor encrypt_tensor(const Tensor& x, Encryptor& enc, const FixedPoint& fp, std::size_t parties) {
  const PublicKey& pub = enc.key();
  const mpz_class bound = pub.n / (2 * static_cast<unsigned long>(std::max<std::size_t>(parties, 1)));
  std::vector<mpz_class> plain(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    plain[i] = fp.encode(x[i], pub, i);
    const mpz_class mag = plain[i] > pub.n / 2 ? mpz_class(pub.n - plain[i]) : plain[i];
    if (mag >= bound) throw RangeError("element " + std::to_string(i) + " would overflow a sum over " +
                                       std::to_string(parties) + " parties");
  }
  return {x.shape(), enc.encrypt_batch(plain), 1};
}

EncryptedTensor he_sum(const PublicKey& pub, const std::vector<const EncryptedTensor*>& parts) {
  if (parts.empty()) throw ContractError("he_sum needs at least one operand");
  EncryptedTensor out = *parts[0];
  for (std::size_t p = 1; p < parts.size(); ++p) {
    if (parts[p]->shape != out.shape || parts[p]->scale_power != out.scale_power)
      throw ProtocolError("encrypted operand " + std::to_string(p) + " has shape " + shape_string(parts[p]->shape) +
                          ", expected " + shape_string(out.shape));
    for (std::size_t i = 0; i < out.size(); ++i) out.cells[i] = he_add(pub, out.cells[i], parts[p]->cells[i]);
  }
  return out;
}

EncryptedTensor he_scale_cols(const PublicKey& pub, const EncryptedTensor& x, const Tensor& w, const FixedPoint& fp) {
  const std::size_t cols = x.shape.size() == 2 ? x.shape[1] : 1;
  if (w.size() != cols) throw DimensionError("he_scale_cols: " + std::to_string(w.size()) + " weights for " +
                                             std::to_string(cols) + " columns");
  std::vector<mpz_class> k(cols);
  for (std::size_t c = 0; c < cols; ++c) mpz_set_si(k[c].get_mpz_t(), fp.quantize(w[c], c));
  EncryptedTensor out{x.shape, std::vector<mpz_class>(x.size()), x.scale_power + 1};
  const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out.cells[i] = he_scale(pub, x.cells[i], k[static_cast<std::size_t>(i) % cols]);
  return out;
}

EncryptedTensor he_weighted_colsum(const PublicKey& pub, const EncryptedTensor& x, const Tensor& g,
                                   const FixedPoint& fp) {
  if (g.shape() != x.shape)
    throw DimensionError("he_weighted_colsum: gradient " + shape_string(g.shape()) + " vs ciphertexts " +
                         shape_string(x.shape));
  const std::size_t rows = g.rows(), cols = g.cols();
  std::vector<mpz_class> terms(x.size());
  const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    mpz_class k;
    mpz_set_si(k.get_mpz_t(), fp.quantize(g[static_cast<std::size_t>(i)], static_cast<std::size_t>(i)));
    terms[i] = he_scale(pub, x.cells[i], k);
  }
  EncryptedTensor out{Shape{cols}, std::vector<mpz_class>(cols, mpz_class(1)), x.scale_power + 1};
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.cells[c] = he_add(pub, out.cells[c], terms[r * cols + c]);
  return out;
}

Tensor decrypt_tensor(const KeyPair& key, const EncryptedTensor& x, const FixedPoint& fp) {
  Tensor out(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fp.decode(decrypt(key, x.cells[i]), key.pub, x.scale_power);
  return out;
}

Tensor secure_sum(const std::vector<Tensor>& parts, const KeyPair& key, std::uint64_t seed, const FixedPoint& fp,
                  Transcript* transcript, std::size_t round) {
  if (parts.empty()) throw ContractError("secure_sum needs at least one participant");
  std::vector<EncryptedTensor> enc;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].shape() != parts[0].shape())
      throw ProtocolError("participant " + std::to_string(i) + " sent shape " + shape_string(parts[i].shape()) +
                          ", expected " + shape_string(parts[0].shape()));
    Encryptor e(key.pub, derive_seed(seed, {i}));
    enc.push_back(encrypt_tensor(parts[i], e, fp, parts.size()));
    if (transcript)
      transcript->record({round, participant_name(i), "server", std::string(kind::ciphertext), enc.back().size(),
                          enc.back().wire_bytes(), true});
  }
  std::vector<const EncryptedTensor*> ptrs;
  for (const auto& e : enc) ptrs.push_back(&e);
  EncryptedTensor agg = he_sum(key.pub, ptrs);
  if (transcript) {
    transcript->record({round, "server", "decryptor", std::string(kind::ciphertext), agg.size(), agg.wire_bytes(), true});
    transcript->record_plain(round, "decryptor", "server", kind::decrypt, agg.size());
  }
  return decrypt_tensor(key, agg, fp);
}

}  // namespace vsplit
