#include "dualq/csv.hpp"

#include <cstdio>
#include <stdexcept>

namespace dualq::csv {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

Writer::Writer(const std::string& path, const std::string& schema) : out_(path) {
  if (!out_) throw std::runtime_error("csv: cannot open " + path);
  out_ << "# dualq-csv-schema: " << schema << "/v1\n";
}

void Writer::header(std::initializer_list<std::string_view> cols) {
  bool first = true;
  for (auto c : cols) {
    if (!first) out_ << ',';
    out_ << c;
    first = false;
  }
  out_ << '\n';
}

void Writer::sep() {
  if (row_open_) out_ << ',';
  row_open_ = true;
}

Writer& Writer::field(double v) {
  sep();
  out_ << format_double(v);
  return *this;
}

Writer& Writer::field(int v) {
  sep();
  out_ << v;
  return *this;
}

Writer& Writer::field(int64_t v) {
  sep();
  out_ << v;
  return *this;
}

Writer& Writer::field(uint64_t v) {
  sep();
  out_ << v;
  return *this;
}

Writer& Writer::field(std::string_view v) {
  sep();
  out_ << v;
  return *this;
}

void Writer::end_row() {
  out_ << '\n';
  row_open_ = false;
}

}  // namespace dualq::csv
