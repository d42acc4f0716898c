#include "phagoq/util/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>

#include "phagoq/error.hpp"

namespace phagoq::csv {

std::string num(double v, int significant) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", significant, v);
  if (std::string_view(buf) == "-0") return "0";
  return buf;
}

std::string num(long long v) { return std::to_string(v); }

double to_double(std::string_view s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw IoError("not a number: '" + std::string(s) + "'");
  return v;
}

long long to_int(std::string_view s) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw IoError("not an integer: '" + std::string(s) + "'");
  return v;
}

bool to_flag(std::string_view s) {
  if (s == "1") return true;
  if (s == "0") return false;
  throw IoError("not a 0/1 flag: '" + std::string(s) + "'");
}

Writer::Writer(const std::filesystem::path& path, std::initializer_list<std::string_view> header)
    : Writer(path, std::vector<std::string>(header.begin(), header.end())) {}

Writer::Writer(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()) {
  if (!out_) throw IoError("cannot create '" + path.string() + "'");
  row(header);
}

Writer::~Writer() noexcept(false) {
  if (out_.is_open() && std::uncaught_exceptions() == 0) close();
}

void Writer::row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_) throw InvalidArgument("csv row width mismatch in '" + path_.string() + "'");
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << fields[i];
  }
  out_ << '\n';
}

void Writer::close() {
  out_.close();
  if (out_.fail()) throw IoError("write failed for '" + path_.string() + "'");
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw IoError("missing column '" + std::string(name) + "'");
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (line.back() == ',') fields.emplace_back();
    if (first) {
      t.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != t.header.size()) throw IoError("ragged row in '" + path.string() + "'");
      t.rows.push_back(std::move(fields));
    }
  }
  if (first) throw IoError("empty csv '" + path.string() + "'");
  return t;
}

}  // namespace phagoq::csv
