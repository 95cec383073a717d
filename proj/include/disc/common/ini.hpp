#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace disc {

/// Sectioned `key = value` text configuration. Lines starting with '#' or ';'
/// are comments. Keys outside any section belong to the "" section. Entry
/// order is preserved so serialization is deterministic.
class IniDocument {
public:
  struct Entry {
    std::string section;
    std::string key;
    std::string value;
    int line = 0;
  };

  static IniDocument parse(std::string_view text, std::string source = "<config>");
  static IniDocument load(const std::filesystem::path &path);

  const std::string &source() const noexcept { return source_; }
  const std::vector<Entry> &entries() const noexcept { return entries_; }
  std::vector<std::string> sections() const;

  bool has(std::string_view section, std::string_view key) const;
  const Entry *find(std::string_view section, std::string_view key) const;
  void set(const std::string &section, const std::string &key, std::string value);

  std::string get_string(std::string_view section, std::string_view key, std::string fallback) const;
  std::int64_t get_int(std::string_view section, std::string_view key, std::int64_t fallback) const;
  double get_double(std::string_view section, std::string_view key, double fallback) const;
  bool get_bool(std::string_view section, std::string_view key, bool fallback) const;

  /// Throws ConfigError naming the first key in `section` outside `allowed`.
  void require_known_keys(std::string_view section, const std::vector<std::string> &allowed) const;
  /// Throws ConfigError naming the first section outside `allowed`.
  void require_known_sections(const std::vector<std::string> &allowed) const;

  std::string to_string() const;

  /// Diagnostic prefix "source:line: ".
  std::string where(const Entry &entry) const;

private:
  std::string source_;
  std::vector<Entry> entries_;
};

/// FNV-1a, used for configuration digests.
std::uint64_t fnv1a64(std::string_view bytes);

} // namespace disc
