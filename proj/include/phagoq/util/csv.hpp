#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace phagoq::csv {

// %.<sig>g, with "nan", "inf" and "-inf" spelled out.
std::string num(double v, int significant = 6);
std::string num(long long v);
inline std::string num(int v) { return num(static_cast<long long>(v)); }
inline std::string num(std::size_t v) { return num(static_cast<long long>(v)); }
inline std::string flag(bool b) { return b ? "1" : "0"; }

// Parses what num() writes, including "nan"/"inf".
double to_double(std::string_view s);
long long to_int(std::string_view s);
bool to_flag(std::string_view s);

// Comma-separated writer; fields are never quoted, so callers must not pass
// commas or newlines.
class Writer {
 public:
  Writer(const std::filesystem::path& path, std::initializer_list<std::string_view> header);
  Writer(const std::filesystem::path& path, const std::vector<std::string>& header);
  ~Writer() noexcept(false);
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  void row(const std::vector<std::string>& fields);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_ = 0;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name; throws IoError when missing.
  std::size_t column(std::string_view name) const;
};

Table read(const std::filesystem::path& path);

}  // namespace phagoq::csv
