#include "vsplit/protocol/transcript.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "vsplit/core/errors.hpp"

namespace vsplit {

std::string participant_name(std::size_t i) { return "p" + std::to_string(i); }

void Transcript::record(Message m) { messages_.push_back(std::move(m)); }

void Transcript::record_plain(std::size_t round, std::string from, std::string to, std::string_view k,
                              std::size_t elements) {
  record({round, std::move(from), std::move(to), std::string(k), elements, elements * sizeof(double), false});
}

std::size_t Transcript::total_bytes() const {
  std::size_t n = 0;
  for (const auto& m : messages_) n += m.bytes;
  return n;
}

std::size_t Transcript::bytes_of_kind(std::string_view k) const {
  std::size_t n = 0;
  for (const auto& m : messages_)
    if (m.kind == k) n += m.bytes;
  return n;
}

void Transcript::append(const Transcript& other) {
  messages_.insert(messages_.end(), other.messages_.begin(), other.messages_.end());
}

std::string Transcript::to_csv() const {
  std::string out = "round,from,to,kind,elements,bytes,encrypted\n";
  for (const auto& m : messages_) {
    out += std::to_string(m.round) + ',' + m.from + ',' + m.to + ',' + m.kind + ',' + std::to_string(m.elements) +
           ',' + std::to_string(m.bytes) + ',' + (m.encrypted ? "1" : "0") + '\n';
  }
  return out;
}

namespace {

std::size_t parse_size(std::string_view tok, std::size_t line) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty())
    throw ParseError("transcript", line, "malformed integer '" + std::string(tok) + "'");
  return v;
}

}  // namespace

Transcript Transcript::from_csv(std::string_view text) {
  Transcript t;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "round,from,to,kind,elements,bytes,encrypted")
        throw ParseError("transcript", 1, "unexpected header '" + std::string(line) + "'");
      continue;
    }
    std::vector<std::string_view> f;
    for (;;) {
      auto c = line.find(',');
      f.push_back(line.substr(0, c));
      if (c == std::string_view::npos) break;
      line.remove_prefix(c + 1);
    }
    if (f.size() != 7) throw ParseError("transcript", line_no, "expected 7 fields, found " + std::to_string(f.size()));
    if (f[6] != "0" && f[6] != "1") throw ParseError("transcript", line_no, "encrypted must be 0 or 1");
    t.record({parse_size(f[0], line_no), std::string(f[1]), std::string(f[2]), std::string(f[3]),
              parse_size(f[4], line_no), parse_size(f[5], line_no), f[6] == "1"});
  }
  if (line_no == 0) throw ParseError("transcript", 0, "empty transcript");
  return t;
}

void Transcript::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_csv();
  if (!out) throw IoError("write failed for " + path.string());
}

Transcript Transcript::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_csv(ss.str());
}

}  // namespace vsplit
