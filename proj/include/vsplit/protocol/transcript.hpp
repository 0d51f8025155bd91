#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vsplit {

/// Message kinds the simulator emits. raw_id, label and features never
/// appear in a correct run; they exist so an audit can flag injected faults.
namespace kind {
inline constexpr std::string_view embedding = "embedding";
inline constexpr std::string_view ciphertext = "ciphertext";
inline constexpr std::string_view hidden = "hidden";
inline constexpr std::string_view gradient = "gradient";
inline constexpr std::string_view psi = "psi";
inline constexpr std::string_view decrypt = "decrypt";
inline constexpr std::string_view raw_id = "raw_id";
inline constexpr std::string_view label = "label";
inline constexpr std::string_view features = "features";
}  // namespace kind

/// Actor names: "p<i>" for participants, "server", "decryptor".
std::string participant_name(std::size_t i);

struct Message {
  std::size_t round = 0;  // 0 is alignment, training rounds count from 1
  std::string from;
  std::string to;
  std::string kind;
  std::size_t elements = 0;
  std::size_t bytes = 0;
  bool encrypted = false;
  friend bool operator==(const Message&, const Message&) = default;
};

/// Append-only message log with CSV export (round,from,to,kind,elements,bytes,encrypted).
class Transcript {
 public:
  void record(Message m);
  /// Plaintext doubles: bytes = elements * 8.
  void record_plain(std::size_t round, std::string from, std::string to, std::string_view kind,
                    std::size_t elements);

  const std::vector<Message>& messages() const noexcept { return messages_; }
  std::size_t size() const noexcept { return messages_.size(); }
  std::size_t total_bytes() const;
  std::size_t bytes_of_kind(std::string_view kind) const;
  void append(const Transcript& other);

  std::string to_csv() const;
  static Transcript from_csv(std::string_view text);
  void write_csv(const std::filesystem::path& path) const;
  static Transcript read_csv(const std::filesystem::path& path);

  friend bool operator==(const Transcript&, const Transcript&) = default;

 private:
  std::vector<Message> messages_;
};

}  // namespace vsplit
