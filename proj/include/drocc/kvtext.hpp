#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace drocc {

/// Flat "[section]" + "key = value" text, order preserving. Lines starting with
/// '#' are comments. Keys outside any section belong to section "".
class KvDocument {
 public:
  using Entries = std::vector<std::pair<std::string, std::string>>;

  static KvDocument parse(std::string_view text);

  void set(const std::string& section, const std::string& key, std::string value);
  const std::string* find(std::string_view section, std::string_view key) const;
  const Entries* section(std::string_view name) const;
  const std::vector<std::pair<std::string, Entries>>& sections() const { return sections_; }

  std::string to_string() const;

 private:
  std::vector<std::pair<std::string, Entries>> sections_;
};

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::vector<std::string> split_list(std::string_view s, char sep = ',');

}  // namespace drocc
