#include "nlmilp/json_util.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace nlmilp::json_util {

void violation(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::kSchemaViolation, (path.empty() ? std::string("/") : path) + ": " + what);
}

void expect_object(const json& j, const std::string& path,
                   std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) violation(path, "expected object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (auto key : allowed) {
      if (item.key() == key) {
        ok = true;
        break;
      }
    }
    if (!ok) violation(path + "/" + item.key(), "unknown field");
  }
}

const json& require(const json& j, const std::string& key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) violation(path + "/" + key, "missing field");
  return *it;
}

std::string get_string(const json& j, const std::string& key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_string()) violation(path + "/" + key, "expected string");
  return v.get<std::string>();
}

std::string get_string_or(const json& j, const std::string& key, const std::string& path,
                          std::string fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_string()) violation(path + "/" + key, "expected string");
  return it->get<std::string>();
}

double get_number(const json& j, const std::string& key, const std::string& path) {
  return number_from_json(require(j, key, path), path + "/" + key);
}

long long get_int(const json& j, const std::string& key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_number_integer()) violation(path + "/" + key, "expected integer");
  return v.get<long long>();
}

bool get_bool_or(const json& j, const std::string& key, const std::string& path, bool fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_boolean()) violation(path + "/" + key, "expected boolean");
  return it->get<bool>();
}

const json& get_array(const json& j, const std::string& key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_array()) violation(path + "/" + key, "expected array");
  return v;
}

json number_to_json(double value) {
  if (std::isinf(value)) return value > 0 ? json("inf") : json("-inf");
  return value;
}

double number_from_json(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  violation(path, "expected number");
}

json read_file(const std::filesystem::path& path) {
  std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kSchemaViolation,
                path.string() + ": malformed JSON (" + std::string(e.what()) + ")");
  }
}

void write_file(const std::filesystem::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

}  // namespace nlmilp::json_util
