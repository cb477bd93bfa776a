#include "unlearn/csv.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <string>
#include <string_view>

#include "unlearn/errors.hpp"

namespace unlearn {
namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw InputError("line " + std::to_string(line) + ": " + msg);
}

template <typename T>
T parse_number(std::string_view text, std::size_t line, const char* what) {
  text = trim(text);
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    fail(line, std::string("cannot parse ") + what + " '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

int CsvTable::inferred_class_count() const {
  if (labels.empty()) return 0;
  return *std::max_element(labels.begin(), labels.end()) + 1;
}

CsvTable read_dataset_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    throw InputError("line 1: missing header row");
  }
  ++line_no;
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
    line.erase(0, 3);
  }
  const auto header = split_fields(line);
  if (header.size() < 3 || trim(header[0]) != "id" || trim(header[1]) != "label") {
    fail(line_no, "header must start with 'id,label,' followed by f0.. or x0.. columns");
  }
  const auto first = trim(header[2]);
  const char prefix = first.empty() ? '\0' : first.front();
  if (prefix != 'f' && prefix != 'x') {
    fail(line_no, "value columns must be named f0.. (features) or x0.. (raw inputs)");
  }
  const std::size_t width = header.size() - 2;
  for (std::size_t c = 0; c < width; ++c) {
    const std::string expected = std::string(1, prefix) + std::to_string(c);
    if (trim(header[c + 2]) != expected) {
      fail(line_no, "expected column '" + expected + "', found '" + std::string(trim(header[c + 2])) + "'");
    }
  }

  CsvTable table;
  table.mode = prefix == 'f' ? CsvMode::features : CsvMode::raw;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != width + 2) {
      fail(line_no, "expected " + std::to_string(width + 2) + " fields, found " +
                        std::to_string(fields.size()));
    }
    table.ids.push_back(parse_number<SampleId>(fields[0], line_no, "id"));
    const int label = parse_number<int>(fields[1], line_no, "label");
    if (label < 0) fail(line_no, "label must be non-negative");
    table.labels.push_back(label);
    for (std::size_t c = 0; c < width; ++c) {
      values.push_back(parse_number<double>(fields[c + 2], line_no, "value"));
    }
  }
  const auto rows = static_cast<Index>(table.ids.size());
  table.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, static_cast<Index>(width));
  return table;
}

CsvTable read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open '" + path.string() + "'");
  }
  return read_dataset_csv(in);
}

std::string format_double(double value) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

void write_dataset_csv(std::ostream& out, CsvMode mode, const std::vector<SampleId>& ids,
                       const std::vector<int>& labels, const Matrix& values) {
  if (static_cast<Index>(ids.size()) != values.rows() || labels.size() != ids.size()) {
    throw ContractViolation("write_dataset_csv: ids, labels and values disagree on row count");
  }
  const char prefix = mode == CsvMode::features ? 'f' : 'x';
  out << "id,label";
  for (Index c = 0; c < values.cols(); ++c) out << ',' << prefix << c;
  out << '\n';
  for (Index r = 0; r < values.rows(); ++r) {
    out << ids[static_cast<std::size_t>(r)] << ',' << labels[static_cast<std::size_t>(r)];
    for (Index c = 0; c < values.cols(); ++c) out << ',' << format_double(values(r, c));
    out << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path& path, CsvMode mode,
                       const std::vector<SampleId>& ids, const std::vector<int>& labels,
                       const Matrix& values) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot write '" + path.string() + "'");
  }
  write_dataset_csv(out, mode, ids, labels, values);
}

}  // namespace unlearn
