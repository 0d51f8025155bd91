#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vsplit/protocol/transcript.hpp"

namespace vsplit {

struct AuditFinding {
  std::size_t message = 0;  // index into the transcript, or the first message of the round
  std::string rule;         // plaintext_embedding, raw_data, decryption
  std::string detail;
};

struct AuditReport {
  std::vector<AuditFinding> findings;
  /// Weaker guarantees that are not violations, e.g. concat ciphertexts
  /// sent directly to the decryptor.
  std::vector<std::string> notices;
  std::size_t messages = 0;

  bool clean() const noexcept { return findings.empty(); }
  std::string to_text() const;
};

/// Checks a finished transcript:
///   - every unencrypted embedding message is a finding;
///   - every raw_id, label or features message is a finding;
///   - per round, decryptions must match the ciphertext batches handed to
///     the decryptor, and those must come from the server (an aggregate).
/// Ciphertexts a participant sends straight to the decryptor (the concat
/// fallback) are reported as notices and still need a matching decryption.
AuditReport transcript_audit(const Transcript& transcript);

}  // namespace vsplit
