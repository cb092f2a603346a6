#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>

namespace dualq::csv {

// %.12g, enough digits that a reload round-trips doubles in practice while
// keeping files diffable.
std::string format_double(double v);

// Comma-separated writer.  First line is always
//   # dualq-csv-schema: <schema>/v1
// so downstream tooling can dispatch on file kind without trusting names.
class Writer {
 public:
  Writer(const std::string& path, const std::string& schema);

  void header(std::initializer_list<std::string_view> cols);
  Writer& field(double v);
  Writer& field(int v);
  Writer& field(int64_t v);
  Writer& field(uint64_t v);
  Writer& field(std::string_view v);
  void end_row();

 private:
  void sep();
  std::ofstream out_;
  bool row_open_ = false;
};

}  // namespace dualq::csv
