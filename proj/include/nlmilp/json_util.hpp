#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "nlmilp/error.hpp"

// Strict JSON readers. Every failure is a kSchemaViolation whose message
// starts with a JSON-pointer-like path to the offending field.
namespace nlmilp::json_util {

using nlohmann::json;

[[noreturn]] void violation(const std::string& path, const std::string& what);

void expect_object(const json& j, const std::string& path,
                   std::initializer_list<std::string_view> allowed);
const json& require(const json& j, const std::string& key, const std::string& path);
std::string get_string(const json& j, const std::string& key, const std::string& path);
std::string get_string_or(const json& j, const std::string& key, const std::string& path,
                          std::string fallback);
double get_number(const json& j, const std::string& key, const std::string& path);
long long get_int(const json& j, const std::string& key, const std::string& path);
bool get_bool_or(const json& j, const std::string& key, const std::string& path, bool fallback);
const json& get_array(const json& j, const std::string& key, const std::string& path);

// Doubles that may be infinite are stored as numbers or the strings
// "inf" / "-inf" (JSON has no infinity literal).
json number_to_json(double value);
double number_from_json(const json& j, const std::string& path);

json read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const json& j);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace nlmilp::json_util
