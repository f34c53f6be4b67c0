#include "drocc/kvtext.hpp"

#include <charconv>
#include <stdexcept>

namespace drocc {

namespace {

std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

KvDocument KvDocument::parse(std::string_view text) {
  KvDocument doc;
  std::string current;
  std::size_t lineno = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = strip(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::invalid_argument("line " + std::to_string(lineno) + ": unterminated section header");
      }
      current = std::string(strip(line.substr(1, line.size() - 2)));
      if (doc.section(current) == nullptr) doc.sections_.emplace_back(current, Entries{});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key = value");
    }
    doc.set(current, std::string(strip(line.substr(0, eq))), std::string(strip(line.substr(eq + 1))));
  }
  return doc;
}

void KvDocument::set(const std::string& section, const std::string& key, std::string value) {
  for (auto& [name, entries] : sections_) {
    if (name != section) continue;
    for (auto& [k, v] : entries) {
      if (k == key) {
        v = std::move(value);
        return;
      }
    }
    entries.emplace_back(key, std::move(value));
    return;
  }
  sections_.emplace_back(section, Entries{{key, std::move(value)}});
}

const std::string* KvDocument::find(std::string_view section, std::string_view key) const {
  const Entries* e = this->section(section);
  if (!e) return nullptr;
  for (const auto& [k, v] : *e) {
    if (k == key) return &v;
  }
  return nullptr;
}

const KvDocument::Entries* KvDocument::section(std::string_view name) const {
  for (const auto& [n, e] : sections_) {
    if (n == name) return &e;
  }
  return nullptr;
}

std::string KvDocument::to_string() const {
  std::string out;
  for (const auto& [name, entries] : sections_) {
    if (!name.empty()) {
      if (!out.empty()) out += '\n';
      out += '[' + name + "]\n";
    }
    for (const auto& [k, v] : entries) out += k + " = " + v + '\n';
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  s = strip(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  }
  return v;
}

long long parse_int(std::string_view s) {
  s = strip(s);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("not an integer: '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string> split_list(std::string_view s, char sep) {
  std::vector<std::string> out;
  s = strip(s);
  if (s.empty()) return out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(strip(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace drocc
