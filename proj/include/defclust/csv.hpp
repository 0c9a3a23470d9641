#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

namespace defclust::csv {

/// Shortest decimal text that reads back to the same double.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, res.ptr};
}

inline double parse_number(std::string_view s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  return x;
}

/// One field of a row.
class Cell {
 public:
  Cell(double x) : text_(format_number(x)) {}
  Cell(std::int64_t x) : text_(std::to_string(x)) {}
  Cell(std::uint64_t x) : text_(std::to_string(x)) {}
  Cell(int x) : text_(std::to_string(x)) {}
  Cell(std::string s) : text_(std::move(s)) {}
  Cell(const char* s) : text_(s) {}

  const std::string& text() const noexcept { return text_; }

 private:
  std::string text_;
};

inline std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// RFC 4180 writer: CRLF line ends, fields quoted only when needed.
class Writer {
 public:
  explicit Writer(std::vector<std::string> header) : width_(header.size()) {
    if (header.empty()) throw std::invalid_argument("csv header must not be empty");
    std::vector<Cell> cells(header.begin(), header.end());
    append(cells);
  }

  void row(const std::vector<Cell>& cells) {
    if (cells.size() != width_)
      throw std::invalid_argument("csv row has " + std::to_string(cells.size()) + " fields, header has " +
                                  std::to_string(width_));
    append(cells);
  }

  const std::string& str() const noexcept { return text_; }

 private:
  void append(const std::vector<Cell>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += quote(cells[i].text());
    }
    text_ += "\r\n";
  }

  std::size_t width_;
  std::string text_;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::invalid_argument("no csv column '" + std::string(name) + "'");
  }

  std::vector<double> numbers(std::string_view name) const {
    const auto c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(parse_number(r[c]));
    return out;
  }
};

/// Reads RFC 4180 text; bare LF line ends are accepted too.
inline Table parse(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
  std::size_t i = 0;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    records.push_back(std::move(record));
    record.clear();
    any = false;
  };
  while (i < text.size()) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          i += 2;
          continue;
        }
        quoted = false;
      } else {
        field += c;
      }
      ++i;
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      any = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      end_record();
      ++i;
    } else if (c == '\n') {
      end_record();
    } else {
      field += c;
      any = true;
    }
    ++i;
  }
  if (quoted) throw std::invalid_argument("csv: unterminated quoted field");
  if (any || !field.empty() || !record.empty()) end_record();
  if (records.empty()) throw std::invalid_argument("csv: no header");

  Table t;
  t.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size())
      throw std::invalid_argument("csv: record " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                                  " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

}  // namespace defclust::csv
