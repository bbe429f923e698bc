#include "covidsem/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "covidsem/errors.hpp"

namespace covidsem {

int CsvTable::col(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

int CsvTable::need_col(const std::string& name) const {
  int c = col(name);
  if (c < 0) throw DataError("missing required column '" + name + "'");
  return c;
}

// Character-level state machine so quoted fields may hold commas, escaped
// quotes and line breaks; blank records between rows are skipped.
CsvTable parse_csv(std::istream& in, const std::string& origin) {
  CsvTable t;
  std::vector<std::string> fields;
  std::string field;
  enum class Mode { field_start, unquoted, quoted, quote_done };
  Mode mode = Mode::field_start;
  bool record_started = false;
  size_t lineno = 1, record_line = 1;

  auto fail = [&](size_t ln, const std::string& msg) {
    throw DataError(origin + ":" + std::to_string(ln) + ": " + msg);
  };
  auto end_field = [&]() {
    fields.push_back(std::move(field));
    field.clear();
    mode = Mode::field_start;
  };
  auto end_record = [&]() {
    end_field();
    if (t.header.empty()) {
      t.header = std::move(fields);
    } else {
      if (fields.size() != t.header.size())
        fail(record_line, "expected " + std::to_string(t.header.size()) + " fields, got " +
                              std::to_string(fields.size()));
      t.rows.push_back(std::move(fields));
    }
    fields.clear();
    record_started = false;
  };

  int ci;
  while ((ci = in.get()) != EOF) {
    char c = static_cast<char>(ci);
    if (mode == Mode::quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get();
          field += '"';
        } else {
          mode = Mode::quote_done;
        }
      } else {
        if (c == '\n') ++lineno;
        field += c;
      }
      continue;
    }
    if (c == '\r') {
      if (in.peek() == '\n') in.get();
      c = '\n';
    }
    if (c == '\n') {
      ++lineno;
      if (record_started) end_record();
      record_line = lineno;
      continue;
    }
    record_started = true;
    switch (mode) {
      case Mode::field_start:
        if (c == '"')
          mode = Mode::quoted;
        else if (c == ',')
          end_field();
        else {
          mode = Mode::unquoted;
          field += c;
        }
        break;
      case Mode::unquoted:
        if (c == '"') fail(lineno, "stray quote");
        if (c == ',')
          end_field();
        else
          field += c;
        break;
      case Mode::quote_done:
        if (c != ',') fail(lineno, "stray quote");
        end_field();
        break;
      case Mode::quoted:
        break;  // handled above
    }
  }
  if (mode == Mode::quoted) fail(record_line, "unterminated quote");
  if (record_started) end_record();
  if (t.header.empty()) throw DataError(origin + ": empty file");
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_csv(in, path);
}

std::string csv_escape(const std::string& f) {
  if (f.find_first_of(",\"\n") == std::string::npos) return f;
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string fmt_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& context) {
  if (s.empty()) throw DataError(context + ": empty numeric field");
  if (s == "nan") return std::nan("");
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DataError(context + ": bad number '" + s + "'");
  return v;
}

long long parse_count(const std::string& s, const std::string& context) {
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DataError(context + ": bad count '" + s + "'");
  if (v < 0) throw DataError(context + ": negative count '" + s + "'");
  return v;
}

}  // namespace covidsem
