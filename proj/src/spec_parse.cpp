#include "wba/spec_parse.hpp"

#include "wba/errors.hpp"

#include <charconv>
#include <cstdlib>
#include <regex>

namespace wba::spec {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::pair<std::string, std::string> split_head(std::string_view s) {
  auto c = s.find(':');
  if (c == std::string_view::npos) return {trim(s), {}};
  return {trim(s.substr(0, c)), std::string(s.substr(c + 1))};
}

std::map<std::string, std::string> parse_kv(std::string_view body, const std::string& field) {
  std::map<std::string, std::string> kv;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    auto comma = body.find(',', pos);
    auto item = body.substr(pos, comma == std::string_view::npos ? body.size() - pos : comma - pos);
    auto t = trim(item);
    if (!t.empty()) {
      auto eq = t.find('=');
      if (eq == std::string::npos) throw ParseError(field, "expected key=value, got '" + t + "'");
      auto key = trim(std::string_view(t).substr(0, eq));
      auto val = trim(std::string_view(t).substr(eq + 1));
      if (key.empty() || val.empty()) throw ParseError(field, "malformed item '" + t + "'");
      if (!kv.emplace(key, val).second) throw ParseError(field, "duplicate key '" + key + "'");
    }
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return kv;
}

void require_keys(const std::map<std::string, std::string>& kv,
                  std::initializer_list<const char*> allowed, const std::string& field) {
  for (const auto& [k, v] : kv) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ParseError(field, "unknown key '" + k + "'");
  }
}

const std::string& get(const std::map<std::string, std::string>& kv, const std::string& key,
                       const std::string& field) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ParseError(field, "missing key '" + key + "'");
  return it->second;
}

std::int64_t to_int(std::string_view s, const std::string& field) {
  auto t = trim(s);
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty())
    throw ParseError(field, "expected integer, got '" + t + "'");
  return v;
}

std::string real_literal(std::string_view s, const std::string& field) {
  static const std::regex re(R"([+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)");
  auto t = trim(s);
  if (!std::regex_match(t, re)) throw ParseError(field, "expected real number, got '" + t + "'");
  return t;
}

double to_double(std::string_view s, const std::string& field) {
  return std::strtod(real_literal(s, field).c_str(), nullptr);
}

}  // namespace wba::spec
