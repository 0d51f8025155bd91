#include "vsplit/privacy/psi.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <algorithm>
#include <map>
#include <set>

#include "vsplit/core/errors.hpp"
#include "vsplit/core/rng.hpp"

namespace vsplit {

namespace {

constexpr std::size_t kDigestBytes = 32;

std::string to_hex(const unsigned char* data, std::size_t n) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(2 * n, '0');
  for (std::size_t i = 0; i < n; ++i) {
    out[2 * i] = digits[data[i] >> 4];
    out[2 * i + 1] = digits[data[i] & 0xF];
  }
  return out;
}

}  // namespace

std::string make_psi_salt(std::uint64_t session_seed) {
  Rng rng(derive_seed(session_seed, {0x5A17}));
  unsigned char bytes[kDigestBytes];
  for (auto& b : bytes) b = static_cast<unsigned char>(rng() & 0xFF);
  return to_hex(bytes, kDigestBytes);
}

std::string psi_digest(std::string_view salt, std::string_view id) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!HMAC(EVP_sha256(), salt.data(), static_cast<int>(salt.size()), reinterpret_cast<const unsigned char*>(id.data()),
            id.size(), md, &len))
    throw CryptoError("HMAC-SHA256 failed");
  return to_hex(md, len);
}

PsiResult psi_align(const std::vector<std::vector<std::string>>& id_sets, std::string_view salt, Transcript* transcript,
                    std::size_t round) {
  if (id_sets.size() < 2) throw ContractError("PSI needs at least two participants");

  // Participant side: hash locally, keep the digest -> id map private.
  std::vector<std::map<std::string, std::string>> local(id_sets.size());
  for (std::size_t p = 0; p < id_sets.size(); ++p) {
    for (const auto& id : id_sets[p]) {
      auto [it, fresh] = local[p].emplace(psi_digest(salt, id), id);
      if (!fresh) throw InputError("participant " + std::to_string(p) + " lists id '" + id + "' more than once");
    }
    if (transcript)
      transcript->record({round, participant_name(p), "server", std::string(kind::psi), local[p].size(),
                          local[p].size() * kDigestBytes, false});
  }

  // Server side: sees digests only.
  std::vector<std::string> common;
  for (const auto& [digest, id] : local[0]) {
    bool everywhere = true;
    for (std::size_t p = 1; p < local.size() && everywhere; ++p) everywhere = local[p].contains(digest);
    if (everywhere) common.push_back(digest);
  }
  if (common.empty()) throw ProtocolError("PSI intersection is empty; the participants share no node ids");
  if (transcript)
    for (std::size_t p = 0; p < id_sets.size(); ++p)
      transcript->record({round, "server", participant_name(p), std::string(kind::psi), common.size(),
                          common.size() * kDigestBytes, false});

  PsiResult result;
  result.digests = common;
  for (const auto& d : common) result.aligned.push_back(local[0].at(d));
  return result;
}

}  // namespace vsplit
