#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>

namespace wba::spec {

std::string trim(std::string_view s);

// "head:rest" -> {head, rest}; rest empty when there is no colon.
std::pair<std::string, std::string> split_head(std::string_view s);

// "a=1,b=2" -> {a:1, b:2}. Unknown keys are rejected by require_keys.
std::map<std::string, std::string> parse_kv(std::string_view body, const std::string& field);

void require_keys(const std::map<std::string, std::string>& kv,
                  std::initializer_list<const char*> allowed, const std::string& field);

const std::string& get(const std::map<std::string, std::string>& kv, const std::string& key,
                       const std::string& field);

std::int64_t to_int(std::string_view s, const std::string& field);
double to_double(std::string_view s, const std::string& field);
// validates a decimal literal and returns it unchanged
std::string real_literal(std::string_view s, const std::string& field);

}  // namespace wba::spec
