#pragma once

#include <charconv>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace metapop::app {

// Shortest decimal string that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

// Builds a CSV document in memory; rows end with '\n'.
class CsvBuffer {
 public:
  explicit CsvBuffer(const std::vector<std::string>& header) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) text_ += ',';
      text_ += header[i];
    }
    text_ += '\n';
  }

  CsvBuffer& cell(double v) { return raw(format_double(v)); }
  CsvBuffer& cell(std::size_t v) { return raw(std::to_string(v)); }
  CsvBuffer& cell(std::string_view v) { return raw(v); }
  void end_row() {
    text_ += '\n';
    fresh_ = true;
  }

  const std::string& text() const { return text_; }

 private:
  CsvBuffer& raw(std::string_view v) {
    if (!fresh_) text_ += ',';
    text_ += v;
    fresh_ = false;
    return *this;
  }

  std::string text_;
  bool fresh_ = true;
};

// "x0", "x1", ... with the given prefix.
inline std::vector<std::string> coordinate_columns(std::size_t dim, const std::string& prefix = "x") {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < dim; ++k) out.push_back(prefix + std::to_string(k));
  return out;
}

}  // namespace metapop::app
