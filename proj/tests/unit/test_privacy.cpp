#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "vsplit/core/errors.hpp"
#include "vsplit/core/rng.hpp"
#include "vsplit/privacy/audit.hpp"
#include "vsplit/privacy/paillier.hpp"
#include "vsplit/privacy/psi.hpp"
#include "vsplit/privacy/secure_agg.hpp"

using namespace vsplit;

namespace {

const KeyPair& test_key() {
  static const KeyPair key = keygen(512, 7);
  return key;
}

mpz_class random_below(gmp_randclass& r, const mpz_class& n) { return r.get_z_range(n); }

}  // namespace

TEST_CASE("keygen produces a 512-bit modulus deterministically") {
  const KeyPair& k = test_key();
  CHECK(mpz_sizeinbase(k.pub.n.get_mpz_t(), 2) == 512);
  CHECK(k.pub.n_squared == k.pub.n * k.pub.n);
  KeyPair again = keygen(512, 7);
  CHECK(again.pub.n == k.pub.n);
  CHECK(keygen(512, 8).pub.n != k.pub.n);
  CHECK_THROWS_AS(keygen(768, 1), ConfigError);
}

TEST_CASE("encrypt/decrypt boundaries and round trips") {
  const KeyPair& k = test_key();
  Encryptor enc(k.pub, 1);
  CHECK(decrypt(k, enc.encrypt(0)) == 0);
  mpz_class top = k.pub.n - 1;
  CHECK(decrypt(k, enc.encrypt(top)) == top);
  CHECK(enc.encrypt(5) != enc.encrypt(5));

  gmp_randclass r(gmp_randinit_mt);
  r.seed(11);
  for (int i = 0; i < 100; ++i) {
    mpz_class m = random_below(r, k.pub.n);
    CHECK(decrypt(k, enc.encrypt(m)) == m);
  }
}

TEST_CASE("additive homomorphism on 1000 pairs") {
  const KeyPair& k = test_key();
  Encryptor enc(k.pub, 2);
  gmp_randclass r(gmp_randinit_mt);
  r.seed(12);
  int bad = 0;
  for (int i = 0; i < 1000; ++i) {
    mpz_class a = random_below(r, k.pub.n), b = random_below(r, k.pub.n);
    mpz_class want = (a + b) % k.pub.n;
    if (decrypt(k, he_add(k.pub, enc.encrypt(a), enc.encrypt(b))) != want) ++bad;
  }
  CHECK(bad == 0);
}

TEST_CASE("plaintext scalar, including negative") {
  const KeyPair& k = test_key();
  Encryptor enc(k.pub, 3);
  mpz_class c = enc.encrypt(21);
  CHECK(decrypt(k, he_scale(k.pub, c, 2)) == 42);
  CHECK(decrypt(k, he_scale(k.pub, c, -2)) == k.pub.n - 42);
}

TEST_CASE("ciphertext wire format round trips") {
  const KeyPair& k = test_key();
  Encryptor enc(k.pub, 4);
  mpz_class c = enc.encrypt(123456);
  auto bytes = serialize_ciphertext(c);
  CHECK(bytes.size() == wire_size(c));
  CHECK(deserialize_ciphertext(bytes) == c);
  bytes.pop_back();
  CHECK_THROWS_AS(deserialize_ciphertext(bytes), CryptoError);
}

TEST_CASE("key JSON round trip") {
  const KeyPair& k = test_key();
  KeyPair back = key_from_json(key_to_json(k));
  CHECK(back.pub.n == k.pub.n);
  CHECK(back.priv.lambda == k.priv.lambda);
  CHECK(back.priv.mu == k.priv.mu);
}

TEST_CASE("parallel batch encryption equals serial") {
  const KeyPair& k = test_key();
  std::vector<mpz_class> m;
  for (int i = 0; i < 64; ++i) m.emplace_back(i * 1000 + 7);
  Encryptor a(k.pub, 9), b(k.pub, 9);
  CHECK(a.encrypt_batch(m) == b.encrypt_batch_serial(m));
}

TEST_CASE("fixed point round trip and range") {
  const KeyPair& k = test_key();
  FixedPoint fp;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    double x = u(rng);
    worst = std::max(worst, std::abs(fp.decode(fp.encode(x, k.pub, 0), k.pub) - x));
  }
  CHECK(worst <= std::ldexp(1.0, -24));
  CHECK(fp.decode(fp.encode(-0.5, k.pub, 0), k.pub) == -0.5);
  try {
    fp.encode(std::ldexp(1.0, 39), k.pub, 17);
    FAIL("expected RangeError");
  } catch (const RangeError& e) {
    CHECK(std::string(e.what()).find("element 17") != std::string::npos);
  }
  CHECK_THROWS_AS(fp.encode(std::nan(""), k.pub, 0), RangeError);
}

TEST_CASE("secure_sum examples") {
  const KeyPair& k = test_key();
  Tensor a(Shape{1}, {0.5}), b(Shape{1}, {0.25});
  Tensor s = secure_sum({a, b}, k, 1);
  CHECK(std::abs(s[0] - 0.75) <= 2 * std::ldexp(1.0, -24));

  Tensor z(Shape{2, 3});
  Tensor zs = secure_sum({z, z, z, z}, k, 2);
  for (double v : zs.values()) CHECK(v == 0.0);

  CHECK_THROWS_AS(secure_sum({Tensor(Shape{2}), Tensor(Shape{3})}, k, 3), ProtocolError);
}

TEST_CASE("secure_sum matches the plaintext sum") {
  const KeyPair& k = test_key();
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, 3.0);
  for (std::size_t I : {2u, 4u, 8u}) {
    std::vector<Tensor> parts;
    Tensor plain(Shape{8});
    for (std::size_t i = 0; i < I; ++i) {
      Tensor t(Shape{8});
      for (std::size_t j = 0; j < 8; ++j) {
        t[j] = g(rng);
        plain[j] += t[j];
      }
      parts.push_back(t);
    }
    Transcript tr;
    Tensor s = secure_sum(parts, k, 100 + I, {}, &tr, 1);
    for (std::size_t j = 0; j < 8; ++j) CHECK(std::abs(s[j] - plain[j]) <= I * std::ldexp(1.0, -24));
    CHECK(tr.size() == I + 2);
    CHECK(transcript_audit(tr).clean());
  }
}

TEST_CASE("scaled aggregation and weighted column sums") {
  const KeyPair& k = test_key();
  FixedPoint fp;
  Encryptor enc(k.pub, 31);
  Tensor x(Shape{3, 2}, {1.0, -2.0, 0.5, 4.0, -1.5, 0.25});
  Tensor w(Shape{2}, {0.5, -0.25});
  auto cx = encrypt_tensor(x, enc, fp, 2);
  Tensor scaled = decrypt_tensor(k, he_scale_cols(k.pub, cx, w, fp), fp);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 2; ++c) CHECK(scaled.at(r, c) == doctest::Approx(x.at(r, c) * w[c]).epsilon(1e-9));

  Tensor g(Shape{3, 2}, {0.1, 0.2, -0.3, 0.4, 0.5, -0.6});
  Tensor col = decrypt_tensor(k, he_weighted_colsum(k.pub, cx, g, fp), fp);
  REQUIRE(col.size() == 2);
  for (std::size_t c = 0; c < 2; ++c) {
    double want = 0;
    for (std::size_t r = 0; r < 3; ++r) want += g.at(r, c) * x.at(r, c);
    CHECK(std::abs(col[c] - want) < 1e-6);
  }
}

TEST_CASE("PSI small examples") {
  auto salt = make_psi_salt(1);
  auto r = psi_align({{"a", "b", "c"}, {"b", "c", "d"}}, salt);
  std::set<std::string> got(r.aligned.begin(), r.aligned.end());
  CHECK(got == std::set<std::string>{"b", "c"});
  CHECK(std::is_sorted(r.digests.begin(), r.digests.end()));
  CHECK_THROWS_AS(psi_align({{"a"}, {"b"}}, salt), ProtocolError);
  CHECK_THROWS_AS(psi_align({{"a", "a"}, {"a"}}, salt), InputError);
  CHECK(psi_digest(salt, "a") == psi_digest(salt, "a"));
  CHECK(psi_digest(make_psi_salt(2), "a") != psi_digest(salt, "a"));
}

TEST_CASE("PSI equals plain intersection on random 3-party sets") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<std::string>> sets(3);
    std::set<std::string> all[3];
    for (int p = 0; p < 3; ++p) {
      std::vector<int> pool(2000);
      std::iota(pool.begin(), pool.end(), 0);
      std::shuffle(pool.begin(), pool.end(), rng);
      for (int i = 0; i < 1000; ++i) {
        sets[p].push_back("node:" + std::to_string(pool[i]));
        all[p].insert(sets[p].back());
      }
    }
    std::vector<std::string> plain;
    for (const auto& id : all[0])
      if (all[1].contains(id) && all[2].contains(id)) plain.push_back(id);
    Transcript tr;
    auto r = psi_align(sets, make_psi_salt(trial), &tr);
    std::vector<std::string> got = r.aligned;
    std::sort(got.begin(), got.end());
    CHECK(got == plain);
    CHECK(tr.size() == 6);
    CHECK(transcript_audit(tr).clean());
    for (const auto& m : tr.messages()) CHECK(m.kind == "psi");
    std::string csv = tr.to_csv();
    for (const auto& id : all[0]) REQUIRE(csv.find(id) == std::string::npos);
  }
}

TEST_CASE("audit rules") {
  Transcript plain;
  for (std::size_t i = 0; i < 3; ++i) plain.record_plain(1, participant_name(i), "server", kind::embedding, 40);
  plain.record_plain(1, "server", "p0", kind::gradient, 40);
  auto rep = transcript_audit(plain);
  CHECK(rep.findings.size() == 3);
  for (const auto& f : rep.findings) CHECK(f.rule == "plaintext_embedding");

  const KeyPair& k = test_key();
  Transcript secure;
  secure_sum({Tensor(Shape{4}), Tensor(Shape{4})}, k, 5, {}, &secure, 1);
  secure_sum({Tensor(Shape{4}), Tensor(Shape{4})}, k, 6, {}, &secure, 2);
  CHECK(transcript_audit(secure).clean());

  Transcript bad = secure;
  bad.record_plain(2, "p1", "server", kind::raw_id, 1);
  rep = transcript_audit(bad);
  REQUIRE(rep.findings.size() == 1);
  CHECK(rep.findings[0].rule == "raw_data");

  Transcript extra = secure;
  extra.record_plain(2, "decryptor", "server", kind::decrypt, 4);
  rep = transcript_audit(extra);
  REQUIRE(rep.findings.size() == 1);
  CHECK(rep.findings[0].rule == "decryption");

  Transcript fallback;
  fallback.record({1, "p0", "decryptor", "ciphertext", 4, 512, true});
  fallback.record_plain(1, "decryptor", "server", kind::decrypt, 4);
  rep = transcript_audit(fallback);
  CHECK(rep.clean());
  CHECK(rep.notices.size() == 1);
}

TEST_CASE("transcript CSV round trip") {
  Transcript t;
  t.record_plain(0, "p0", "server", kind::psi, 3);
  t.record({1, "p1", "server", "ciphertext", 2, 260, true});
  auto back = Transcript::from_csv(t.to_csv());
  CHECK(back == t);
  CHECK(back.total_bytes() == 24 + 260);
  CHECK(back.bytes_of_kind("ciphertext") == 260);
  CHECK_THROWS_AS(Transcript::from_csv("round,from\n1,2\n"), ParseError);
}
