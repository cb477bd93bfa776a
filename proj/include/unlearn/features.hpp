#pragma once

// Frozen feature extraction and dataset encoding.
//
// A seeded Gaussian projection followed by an optional ReLU stands in for a
// frozen pre-trained backbone: it is drawn once from the seed and never
// changes afterwards, so extraction is a pure function of (seed, input).

#include <cstdint>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "unlearn/analytic.hpp"

namespace unlearn {

enum class Nonlinearity { relu, identity };

const char* to_string(Nonlinearity g);
Nonlinearity parse_nonlinearity(std::string_view name);

class FeatureExtractor {
 public:
  /// Projection entries drawn i.i.d. N(0, 1) / sqrt(input_dim).
  FeatureExtractor(std::uint64_t seed, Index input_dim, Index feature_dim,
                   Nonlinearity nonlinearity = Nonlinearity::relu);

  /// Uses a caller-supplied input_dim x feature_dim projection (seed = 0).
  static FeatureExtractor from_projection(Matrix projection, Nonlinearity nonlinearity);

  Vector extract(std::span<const double> input) const;
  /// Row-wise extract over an n x input_dim matrix.
  Matrix extract_rows(const Matrix& inputs) const;

  std::uint64_t seed() const noexcept { return seed_; }
  Index input_dim() const noexcept { return projection_.rows(); }
  Index feature_dim() const noexcept { return projection_.cols(); }
  Nonlinearity nonlinearity() const noexcept { return nonlinearity_; }
  const Matrix& projection() const noexcept { return projection_; }

 private:
  FeatureExtractor(Matrix projection, std::uint64_t seed, Nonlinearity nonlinearity);

  Matrix projection_;
  std::uint64_t seed_;
  Nonlinearity nonlinearity_;
};

Vector one_hot(int label, int class_count);

/// Raw inputs with integer labels, one row per sample.
struct RawDataset {
  std::vector<SampleId> ids;
  Matrix inputs;  // n x input_dim
  std::vector<int> labels;
  int class_count = 0;

  Index size() const noexcept { return inputs.rows(); }
};

struct SyntheticSpec {
  int class_count = 10;
  int samples_per_class = 100;
  Index input_dim = 32;
  double cluster_spread = 1.0;
  std::uint64_t seed = 0;
};

/// Gaussian clusters: one mean per class (drawn from the seed), noise scaled
/// by cluster_spread. `draw` selects an independent noise stream over the
/// same class means, giving held-out samples; ids start at draw * total.
RawDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t draw = 0);

/// Encoded rows (id, feature, label, one-hot), stored column-wise.
class EncodedDataset {
 public:
  struct Row {
    SampleId id;
    Vector feature;
    int label;
    Vector one_hot;
  };

  EncodedDataset(std::vector<SampleId> ids, Matrix features, std::vector<int> labels,
                 int class_count);
  static EncodedDataset empty(Index feature_dim, int class_count);

  Index size() const noexcept { return features_.rows(); }
  Index feature_dim() const noexcept { return features_.cols(); }
  int class_count() const noexcept { return class_count_; }

  const std::vector<SampleId>& ids() const noexcept { return ids_; }
  const Matrix& features() const noexcept { return features_; }
  const Matrix& one_hot() const noexcept { return one_hot_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  Row row(Index i) const;

  bool contains(SampleId id) const { return index_.contains(id); }
  /// Row position of an id; throws ContractViolation if absent.
  Index index_of(SampleId id) const;

  /// Rows for the given ids, in the given order.
  FeatureBatch select(std::span<const SampleId> ids) const;
  EncodedDataset subset(std::span<const SampleId> ids) const;
  FeatureBatch as_batch() const;

 private:
  std::vector<SampleId> ids_;
  Matrix features_;
  std::vector<int> labels_;
  Matrix one_hot_;
  int class_count_;
  std::unordered_map<SampleId, Index> index_;
};

EncodedDataset encode(const FeatureExtractor& extractor, const RawDataset& raw);

}  // namespace unlearn
