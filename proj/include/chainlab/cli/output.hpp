#pragma once
// File output for the chainlab tool: fixed-precision number formatting,
// RFC 4180 style CSV rows, rounded JSON numbers and a directory sink.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chainlab/cli/config.hpp"
#include "chainlab/errors.hpp"

namespace chainlab::cli {

using json = nlohmann::ordered_json;

// %.<digits>g with NaN and infinities spelled out; '.' is always the decimal point.
inline std::string format_number(double x, int digits) {
  if (std::isnan(x)) return "NaN";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

// The value JSON will carry: rounded to the configured digits, null when not finite.
inline json json_number(double x, int digits) {
  if (!std::isfinite(x)) return nullptr;
  return std::strtod(format_number(x, digits).c_str(), nullptr);
}

inline json json_numbers(const std::vector<double>& xs, int digits) {
  json a = json::array();
  for (double x : xs) a.push_back(json_number(x, digits));
  return a;
}

class CsvWriter {
 public:
  explicit CsvWriter(int digits) : digits_(digits) {}

  // A field needs quoting when it holds a separator, quote or line break.
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + '"';
  }

  CsvWriter& header(std::initializer_list<std::string> names) {
    return row(std::vector<std::string>(names));
  }
  CsvWriter& row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) os_ << (i ? "," : "") << quote(fields[i]);
    os_ << '\n';
    return *this;
  }

  std::string num(double x) const { return format_number(x, digits_); }
  std::string str() const { return os_.str(); }

 private:
  int digits_;
  std::ostringstream os_;
};

/**
 * Output directory. Writes are serialised so concurrent tasks can emit
 * their own files; written() lists them in sorted order.
 */
class OutputSink {
 public:
  explicit OutputSink(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }

  std::filesystem::path write(const std::string& name, const std::string& content) {
    std::lock_guard lock(mutex_);
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error("cannot create output directory '" + dir_.string() + "': " + ec.message());
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw Error("write failed for '" + path.string() + "'");
    written_.push_back(path.string());
    return path;
  }

  std::filesystem::path write_json(const std::string& name, const json& doc) {
    return write(name, doc.dump(2) + "\n");
  }

  std::vector<std::string> written() const {
    std::lock_guard lock(mutex_);
    auto w = written_;
    std::sort(w.begin(), w.end());
    return w;
  }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  std::vector<std::string> written_;
};

}  // namespace chainlab::cli
