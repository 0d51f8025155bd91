#include "vsplit/privacy/paillier.hpp"

#include "json.hpp"
#include "vsplit/core/errors.hpp"
#include "vsplit/core/rng.hpp"

namespace vsplit {

namespace {

constexpr int kPrimalityReps = 40;
constexpr int kMaxKeygenAttempts = 64;

mpz_class random_prime(gmp_randclass& rng, std::size_t bits) {
  mpz_class x = rng.get_z_bits(bits);
  mpz_setbit(x.get_mpz_t(), bits - 1);
  mpz_setbit(x.get_mpz_t(), bits - 2);
  mpz_class p;
  mpz_nextprime(p.get_mpz_t(), x.get_mpz_t());
  return p;
}

void seed_gmp(gmp_randclass& rng, std::uint64_t seed) {
  mpz_class s;
  mpz_import(s.get_mpz_t(), 1, 1, sizeof seed, 0, 0, &seed);
  rng.seed(s);
}

std::uint64_t key_id(const mpz_class& n) { return hash_string(n.get_str(16)); }

mpz_class from_hex(const nlohmann::json& j, const char* field) {
  mpz_class v;
  if (v.set_str(j.at(field).get<std::string>(), 16) != 0) throw ConfigError(std::string("key field ") + field + " is not hex");
  return v;
}

KeyPair assemble(const mpz_class& n, const mpz_class& lambda, std::size_t bits) {
  KeyPair k;
  k.pub.n = n;
  k.pub.n_squared = n * n;
  k.pub.bits = bits;
  k.pub.id = key_id(n);
  k.priv.lambda = lambda;
  if (mpz_invert(k.priv.mu.get_mpz_t(), lambda.get_mpz_t(), n.get_mpz_t()) == 0)
    throw CryptoError("lambda is not invertible modulo n");
  return k;
}

}  // namespace

KeyPair keygen(std::size_t bits, std::uint64_t seed) {
  if (bits != 512 && bits != 1024 && bits != 2048)
    throw ConfigError("key length must be 512, 1024 or 2048 bits, got " + std::to_string(bits));
  gmp_randclass rng(gmp_randinit_mt);
  seed_gmp(rng, derive_seed(seed, {0x6b6579}));
  for (int attempt = 0; attempt < kMaxKeygenAttempts; ++attempt) {
    const mpz_class p = random_prime(rng, bits / 2);
    const mpz_class q = random_prime(rng, bits / 2);
    if (p == q) continue;
    if (mpz_probab_prime_p(p.get_mpz_t(), kPrimalityReps) == 0 || mpz_probab_prime_p(q.get_mpz_t(), kPrimalityReps) == 0)
      continue;
    const mpz_class n = p * q;
    if (mpz_sizeinbase(n.get_mpz_t(), 2) != bits) continue;
    const mpz_class pm = p - 1, qm = q - 1;
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), n.get_mpz_t(), mpz_class(pm * qm).get_mpz_t());
    if (g != 1) continue;
    mpz_class lambda;
    mpz_lcm(lambda.get_mpz_t(), pm.get_mpz_t(), qm.get_mpz_t());
    return assemble(n, lambda, bits);
  }
  throw CryptoError("prime generation failed after " + std::to_string(kMaxKeygenAttempts) + " attempts");
}

std::string key_to_json(const KeyPair& key) {
  nlohmann::json j{{"bits", key.pub.bits}, {"n", key.pub.n.get_str(16)}, {"lambda", key.priv.lambda.get_str(16)}};
  return j.dump(2);
}

KeyPair key_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    return assemble(from_hex(j, "n"), from_hex(j, "lambda"), j.at("bits").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("key file: ") + e.what());
  }
}

Encryptor::Encryptor(const PublicKey& pub, std::uint64_t seed) : pub_(pub), rng_(gmp_randinit_mt) {
  seed_gmp(rng_, derive_seed(seed, {pub.id}));
}

mpz_class Encryptor::random_unit() {
  for (;;) {
    mpz_class r = rng_.get_z_range(pub_.n);
    if (r == 0) continue;
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), r.get_mpz_t(), pub_.n.get_mpz_t());
    if (g == 1) return r;
  }
}

namespace {

mpz_class encrypt_with(const PublicKey& pub, const mpz_class& m, const mpz_class& r) {
  // (1 + n)^m = 1 + m n  (mod n^2)
  mpz_class gm = (1 + m * pub.n) % pub.n_squared;
  mpz_class rn;
  mpz_powm(rn.get_mpz_t(), r.get_mpz_t(), pub.n.get_mpz_t(), pub.n_squared.get_mpz_t());
  return (gm * rn) % pub.n_squared;
}

void check_plaintext(const PublicKey& pub, const mpz_class& m) {
  if (m < 0 || m >= pub.n) throw RangeError("plaintext outside [0, n)");
}

}  // namespace

mpz_class Encryptor::encrypt(const mpz_class& m) {
  check_plaintext(pub_, m);
  return encrypt_with(pub_, m, random_unit());
}

std::vector<mpz_class> Encryptor::encrypt_batch_serial(std::span<const mpz_class> plaintexts) {
  std::vector<mpz_class> out;
  out.reserve(plaintexts.size());
  for (const auto& m : plaintexts) out.push_back(encrypt(m));
  return out;
}

std::vector<mpz_class> Encryptor::encrypt_batch(std::span<const mpz_class> plaintexts) {
  for (const auto& m : plaintexts) check_plaintext(pub_, m);
  std::vector<mpz_class> r(plaintexts.size());
  for (auto& x : r) x = random_unit();
  std::vector<mpz_class> out(plaintexts.size());
  const auto n = static_cast<std::ptrdiff_t>(plaintexts.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = encrypt_with(pub_, plaintexts[i], r[i]);
  return out;
}

mpz_class decrypt(const KeyPair& key, const mpz_class& c) {
  const auto& pub = key.pub;
  if (c <= 0 || c >= pub.n_squared) throw CryptoError("ciphertext outside (0, n^2)");
  mpz_class u;
  mpz_powm(u.get_mpz_t(), c.get_mpz_t(), key.priv.lambda.get_mpz_t(), pub.n_squared.get_mpz_t());
  mpz_class l = (u - 1) / pub.n;
  return (l * key.priv.mu) % pub.n;
}

mpz_class he_add(const PublicKey& pub, const mpz_class& a, const mpz_class& b) { return (a * b) % pub.n_squared; }

mpz_class he_scale(const PublicKey& pub, const mpz_class& c, const mpz_class& k) {
  mpz_class base = c, exp = k, out;
  if (k < 0) {
    if (mpz_invert(base.get_mpz_t(), c.get_mpz_t(), pub.n_squared.get_mpz_t()) == 0)
      throw CryptoError("ciphertext is not invertible");
    exp = -k;
  }
  mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), pub.n_squared.get_mpz_t());
  return out;
}

std::vector<std::uint8_t> serialize_ciphertext(const mpz_class& c) {
  if (c < 0) throw CryptoError("negative ciphertext");
  const std::size_t len = c == 0 ? 0 : (mpz_sizeinbase(c.get_mpz_t(), 2) + 7) / 8;
  std::vector<std::uint8_t> out(4 + len);
  out[0] = static_cast<std::uint8_t>(len >> 24);
  out[1] = static_cast<std::uint8_t>(len >> 16);
  out[2] = static_cast<std::uint8_t>(len >> 8);
  out[3] = static_cast<std::uint8_t>(len);
  std::size_t written = 0;
  if (len) mpz_export(out.data() + 4, &written, 1, 1, 1, 0, c.get_mpz_t());
  return out;
}

mpz_class deserialize_ciphertext(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw CryptoError("ciphertext shorter than its length prefix");
  const std::size_t len = (std::size_t{bytes[0]} << 24) | (std::size_t{bytes[1]} << 16) | (std::size_t{bytes[2]} << 8) |
                          std::size_t{bytes[3]};
  if (bytes.size() != 4 + len) throw CryptoError("ciphertext length prefix does not match payload");
  mpz_class c;
  if (len) mpz_import(c.get_mpz_t(), len, 1, 1, 1, 0, bytes.data() + 4);
  return c;
}

std::size_t wire_size(const mpz_class& c) { return 4 + (c == 0 ? 0 : (mpz_sizeinbase(c.get_mpz_t(), 2) + 7) / 8); }

}  // namespace vsplit
