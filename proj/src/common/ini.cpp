#include "disc/common/ini.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "disc/errors.hpp"

namespace disc {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos)
    return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

} // namespace

IniDocument IniDocument::parse(std::string_view text, std::string source) {
  IniDocument doc;
  doc.source_ = std::move(source);
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    const auto raw = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';')
      continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw ConfigError(doc.source_ + ":" + std::to_string(line_no) + ": malformed section header '" +
                          std::string(line) + "'");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(doc.source_ + ":" + std::to_string(line_no) + ": expected 'key = value', got '" +
                        std::string(line) + "'");
    const auto key = trim(line.substr(0, eq));
    if (key.empty())
      throw ConfigError(doc.source_ + ":" + std::to_string(line_no) + ": empty key");
    if (doc.find(section, key))
      throw ConfigError(doc.source_ + ":" + std::to_string(line_no) + ": duplicate key '" + std::string(key) +
                        "' in [" + section + "]");
    doc.entries_.push_back({section, std::string(key), std::string(trim(line.substr(eq + 1))), line_no});
  }
  return doc;
}

IniDocument IniDocument::load(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot read configuration file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::vector<std::string> IniDocument::sections() const {
  std::vector<std::string> out;
  for (const auto &e : entries_)
    if (std::find(out.begin(), out.end(), e.section) == out.end())
      out.push_back(e.section);
  return out;
}

bool IniDocument::has(std::string_view section, std::string_view key) const { return find(section, key) != nullptr; }

const IniDocument::Entry *IniDocument::find(std::string_view section, std::string_view key) const {
  for (const auto &e : entries_)
    if (e.section == section && e.key == key)
      return &e;
  return nullptr;
}

void IniDocument::set(const std::string &section, const std::string &key, std::string value) {
  for (auto &e : entries_)
    if (e.section == section && e.key == key) {
      e.value = std::move(value);
      return;
    }
  // Keep sections contiguous: insert after the last entry of the section.
  auto it = entries_.end();
  for (auto rit = entries_.rbegin(); rit != entries_.rend(); ++rit)
    if (rit->section == section) {
      it = rit.base();
      break;
    }
  entries_.insert(it, Entry{section, key, std::move(value), 0});
}

std::string IniDocument::where(const Entry &entry) const {
  return source_ + ":" + (entry.line > 0 ? std::to_string(entry.line) : std::string("override")) + ": ";
}

std::string IniDocument::get_string(std::string_view section, std::string_view key, std::string fallback) const {
  const auto *e = find(section, key);
  return e ? e->value : std::move(fallback);
}

std::int64_t IniDocument::get_int(std::string_view section, std::string_view key, std::int64_t fallback) const {
  const auto *e = find(section, key);
  if (!e)
    return fallback;
  std::int64_t v = 0;
  const auto *end = e->value.data() + e->value.size();
  auto [ptr, ec] = std::from_chars(e->value.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw ConfigError(where(*e) + "'" + e->key + "' expects an integer, got '" + e->value + "'");
  return v;
}

double IniDocument::get_double(std::string_view section, std::string_view key, double fallback) const {
  const auto *e = find(section, key);
  if (!e)
    return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(e->value, &used);
    if (used != e->value.size())
      throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception &) {
    throw ConfigError(where(*e) + "'" + e->key + "' expects a number, got '" + e->value + "'");
  }
}

bool IniDocument::get_bool(std::string_view section, std::string_view key, bool fallback) const {
  const auto *e = find(section, key);
  if (!e)
    return fallback;
  if (e->value == "true" || e->value == "1" || e->value == "yes")
    return true;
  if (e->value == "false" || e->value == "0" || e->value == "no")
    return false;
  throw ConfigError(where(*e) + "'" + e->key + "' expects true/false, got '" + e->value + "'");
}

void IniDocument::require_known_keys(std::string_view section, const std::vector<std::string> &allowed) const {
  for (const auto &e : entries_) {
    if (e.section != section)
      continue;
    if (std::find(allowed.begin(), allowed.end(), e.key) == allowed.end())
      throw ConfigError(where(e) + "unknown key '" + e.key + "' in [" + e.section + "]");
  }
}

void IniDocument::require_known_sections(const std::vector<std::string> &allowed) const {
  for (const auto &e : entries_)
    if (std::find(allowed.begin(), allowed.end(), e.section) == allowed.end())
      throw ConfigError(where(e) + "unknown section [" + e.section + "]");
}

std::string IniDocument::to_string() const {
  std::ostringstream os;
  std::string current;
  bool first = true;
  for (const auto &e : entries_) {
    if (first || e.section != current) {
      if (!e.section.empty())
        os << (first ? "" : "\n") << '[' << e.section << "]\n";
      current = e.section;
      first = false;
    }
    os << e.key << " = " << e.value << '\n';
  }
  return os.str();
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

} // namespace disc
