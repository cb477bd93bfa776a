#pragma once

// Dataset CSV files (UTF-8, header row):
//   id,label,f0,...,f{d-1}   pre-extracted features
//   id,label,x0,...,x{m-1}   raw inputs, passed through a FeatureExtractor
// Labels are 0-based. Parse errors carry 1-based line numbers.

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "unlearn/analytic.hpp"
#include "unlearn/features.hpp"

namespace unlearn {

enum class CsvMode { features, raw };

struct CsvTable {
  CsvMode mode = CsvMode::raw;
  std::vector<SampleId> ids;
  std::vector<int> labels;
  Matrix values;  // n x (d or m)

  /// max label + 1; 0 for an empty table.
  int inferred_class_count() const;
};

CsvTable read_dataset_csv(std::istream& in);
CsvTable read_dataset_csv(const std::filesystem::path& path);

void write_dataset_csv(std::ostream& out, CsvMode mode, const std::vector<SampleId>& ids,
                       const std::vector<int>& labels, const Matrix& values);
void write_dataset_csv(const std::filesystem::path& path, CsvMode mode,
                       const std::vector<SampleId>& ids, const std::vector<int>& labels,
                       const Matrix& values);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace unlearn
