#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace deconv {

// CSV files open with a pinned schema comment line, then the header row.
// Numeric formatting is fixed (17 significant digits) so reruns from a
// manifest reproduce outputs byte for byte.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& schema,
            const std::vector<std::string>& columns)
      : out_(path) {
    if (!out_) throw std::runtime_error("cannot open output file '" + path + "'");
    out_ << "# schema: " << schema << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i)
      out_ << columns[i] << (i + 1 < columns.size() ? "," : "\n");
  }

  void row(const std::vector<double>& values) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (std::size_t i = 0; i < values.size(); ++i)
      os << values[i] << (i + 1 < values.size() ? "," : "\n");
    out_ << os.str();
  }

 private:
  std::ofstream out_;
};

}  // namespace deconv
