#include "vsplit/privacy/audit.hpp"

#include <map>
#include <sstream>

namespace vsplit {

namespace {

std::string describe(const Message& m) {
  return "round " + std::to_string(m.round) + " " + m.from + "->" + m.to + " " + m.kind + " (" +
         std::to_string(m.elements) + " elements)";
}

}  // namespace

std::string AuditReport::to_text() const {
  std::ostringstream os;
  os << "messages: " << messages << "\nfindings: " << findings.size() << "\n";
  for (const auto& f : findings) os << "  [" << f.rule << "] message " << f.message << ": " << f.detail << "\n";
  if (!notices.empty()) os << "notices: " << notices.size() << "\n";
  for (const auto& n : notices) os << "  " << n << "\n";
  return os.str();
}

AuditReport transcript_audit(const Transcript& transcript) {
  AuditReport report;
  const auto& msgs = transcript.messages();
  report.messages = msgs.size();

  struct RoundCount {
    std::size_t first = 0;
    std::size_t to_decryptor = 0;
    std::size_t decrypted = 0;
    std::size_t direct = 0;
  };
  std::map<std::size_t, RoundCount> rounds;

  for (std::size_t i = 0; i < msgs.size(); ++i) {
    const Message& m = msgs[i];
    auto [it, fresh] = rounds.try_emplace(m.round);
    if (fresh) it->second.first = i;
    RoundCount& rc = it->second;

    if (m.kind == kind::embedding && !m.encrypted)
      report.findings.push_back({i, "plaintext_embedding", describe(m)});
    if (m.kind == kind::raw_id || m.kind == kind::label || m.kind == kind::features)
      report.findings.push_back({i, "raw_data", describe(m)});
    if (m.to == "decryptor") {
      if (!m.encrypted) {
        report.findings.push_back({i, "decryption", "plaintext sent to the decryptor: " + describe(m)});
      } else {
        ++rc.to_decryptor;
        if (m.from != "server") ++rc.direct;
      }
    }
    if (m.from == "decryptor" && m.kind == kind::decrypt) ++rc.decrypted;
  }

  for (const auto& [round, rc] : rounds) {
    if (rc.decrypted != rc.to_decryptor)
      report.findings.push_back({rc.first, "decryption",
                                 "round " + std::to_string(round) + ": " + std::to_string(rc.decrypted) +
                                     " decryptions for " + std::to_string(rc.to_decryptor) + " ciphertext batches"});
    if (rc.direct > 0)
      report.notices.push_back("round " + std::to_string(round) + ": " + std::to_string(rc.direct) +
                               " participant ciphertext batches decrypted individually (concat fallback)");
  }
  return report;
}

}  // namespace vsplit
