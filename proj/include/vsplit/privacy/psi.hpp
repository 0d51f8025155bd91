#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vsplit/protocol/transcript.hpp"

namespace vsplit {

/// Session salt shared by the participants and never sent to the server.
std::string make_psi_salt(std::uint64_t session_seed);

/// Hex HMAC-SHA256 of the id under the salt.
std::string psi_digest(std::string_view salt, std::string_view id);

struct PsiResult {
  std::vector<std::string> aligned;  // ids of the intersection, ordered by digest
  std::vector<std::string> digests;  // matching digests
};

/// Salted-hash intersection. Every participant sends its digests to the
/// server, the server intersects them and returns the common digests, and
/// each participant maps them back to its own ids. Throws InputError on a
/// duplicate id and ProtocolError when the intersection is empty.
PsiResult psi_align(const std::vector<std::vector<std::string>>& id_sets, std::string_view salt,
                    Transcript* transcript = nullptr, std::size_t round = 0);

}  // namespace vsplit
