#include "unlearn/features.hpp"

#include <cmath>
#include <string>

#include "unlearn/errors.hpp"
#include "unlearn/random.hpp"

namespace unlearn {

const char* to_string(Nonlinearity g) {
  switch (g) {
    case Nonlinearity::relu:
      return "relu";
    case Nonlinearity::identity:
      return "identity";
  }
  return "unknown";
}

Nonlinearity parse_nonlinearity(std::string_view name) {
  if (name == "relu") return Nonlinearity::relu;
  if (name == "identity") return Nonlinearity::identity;
  throw InputError("unknown nonlinearity '" + std::string(name) + "'");
}

FeatureExtractor::FeatureExtractor(Matrix projection, std::uint64_t seed, Nonlinearity nonlinearity)
    : projection_(std::move(projection)), seed_(seed), nonlinearity_(nonlinearity) {
  if (projection_.rows() <= 0 || projection_.cols() <= 0) {
    throw ContractViolation("extractor dimensions must be positive");
  }
  if (!projection_.allFinite()) {
    throw ContractViolation("extractor projection contains NaN or Inf");
  }
}

FeatureExtractor::FeatureExtractor(std::uint64_t seed, Index input_dim, Index feature_dim,
                                   Nonlinearity nonlinearity)
    : FeatureExtractor(
          [&] {
            if (input_dim <= 0 || feature_dim <= 0) {
              throw ContractViolation("extractor dimensions must be positive");
            }
            Rng rng(derive_seed(seed, "projection"));
            const double scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
            Matrix p(input_dim, feature_dim);
            // Filled row by row so the draw order does not depend on storage order.
            for (Index r = 0; r < input_dim; ++r)
              for (Index c = 0; c < feature_dim; ++c) p(r, c) = rng.normal() * scale;
            return p;
          }(),
          seed, nonlinearity) {}

FeatureExtractor FeatureExtractor::from_projection(Matrix projection, Nonlinearity nonlinearity) {
  return FeatureExtractor(std::move(projection), 0, nonlinearity);
}

Vector FeatureExtractor::extract(std::span<const double> input) const {
  if (static_cast<Index>(input.size()) != input_dim()) {
    throw ContractViolation("extract: input length " + std::to_string(input.size()) +
                            " does not match input_dim " + std::to_string(input_dim()));
  }
  const Eigen::Map<const Vector> x(input.data(), static_cast<Index>(input.size()));
  Vector out = projection_.transpose() * x;
  if (nonlinearity_ == Nonlinearity::relu) out = out.cwiseMax(0.0);
  return out;
}

Matrix FeatureExtractor::extract_rows(const Matrix& inputs) const {
  if (inputs.cols() != input_dim()) {
    throw ContractViolation("extract_rows: input width " + std::to_string(inputs.cols()) +
                            " does not match input_dim " + std::to_string(input_dim()));
  }
  // Per-row products keep batch extraction bit-identical to extract().
  Matrix out(inputs.rows(), feature_dim());
  for (Index r = 0; r < inputs.rows(); ++r) {
    const Vector x = inputs.row(r).transpose();
    out.row(r) = extract(std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))).transpose();
  }
  return out;
}

Vector one_hot(int label, int class_count) {
  if (class_count <= 0) {
    throw InputError("class_count must be positive");
  }
  if (label < 0 || label >= class_count) {
    throw InputError("label " + std::to_string(label) + " outside [0, " +
                     std::to_string(class_count) + ")");
  }
  Vector v = Vector::Zero(class_count);
  v(label) = 1.0;
  return v;
}

RawDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t draw) {
  if (spec.class_count <= 0 || spec.samples_per_class <= 0 || spec.input_dim <= 0) {
    throw InputError("synthetic spec counts must be positive");
  }
  if (!(spec.cluster_spread >= 0.0) || !std::isfinite(spec.cluster_spread)) {
    throw InputError("cluster_spread must be finite and non-negative");
  }
  const Index dim = spec.input_dim;
  Matrix means(spec.class_count, dim);
  Rng mean_rng(derive_seed(spec.seed, "class-means"));
  for (Index k = 0; k < means.rows(); ++k)
    for (Index c = 0; c < dim; ++c) means(k, c) = mean_rng.normal();

  Rng noise_rng(derive_seed(mix_seed(spec.seed) ^ draw, "sample-noise"));
  const auto total = static_cast<std::uint64_t>(spec.class_count) *
                     static_cast<std::uint64_t>(spec.samples_per_class);
  RawDataset out;
  out.class_count = spec.class_count;
  out.inputs.resize(static_cast<Index>(total), dim);
  out.ids.reserve(total);
  out.labels.reserve(total);
  Index r = 0;
  for (int k = 0; k < spec.class_count; ++k) {
    for (int s = 0; s < spec.samples_per_class; ++s, ++r) {
      for (Index c = 0; c < dim; ++c) {
        out.inputs(r, c) = means(k, c) + spec.cluster_spread * noise_rng.normal();
      }
      out.ids.push_back(draw * total + static_cast<std::uint64_t>(r));
      out.labels.push_back(k);
    }
  }
  return out;
}

EncodedDataset::EncodedDataset(std::vector<SampleId> ids, Matrix features, std::vector<int> labels,
                               int class_count)
    : ids_(std::move(ids)),
      features_(std::move(features)),
      labels_(std::move(labels)),
      one_hot_(Matrix::Zero(features_.rows(), class_count)),
      class_count_(class_count) {
  if (class_count_ <= 0) {
    throw InputError("class_count must be positive");
  }
  if (static_cast<Index>(ids_.size()) != features_.rows() ||
      static_cast<Index>(labels_.size()) != features_.rows()) {
    throw ContractViolation("dataset ids, features and labels disagree on row count");
  }
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const int label = labels_[i];
    if (label < 0 || label >= class_count_) {
      throw InputError("row " + std::to_string(i) + ": label " + std::to_string(label) +
                       " outside [0, " + std::to_string(class_count_) + ")");
    }
    one_hot_(static_cast<Index>(i), label) = 1.0;
    if (!index_.emplace(ids_[i], static_cast<Index>(i)).second) {
      throw InputError("row " + std::to_string(i) + ": duplicate sample id " +
                       std::to_string(ids_[i]));
    }
  }
  if (!features_.allFinite()) {
    throw InputError("dataset features contain NaN or Inf");
  }
}

EncodedDataset EncodedDataset::empty(Index feature_dim, int class_count) {
  return EncodedDataset({}, Matrix(0, feature_dim), {}, class_count);
}

EncodedDataset::Row EncodedDataset::row(Index i) const {
  if (i < 0 || i >= size()) {
    throw ContractViolation("row index " + std::to_string(i) + " out of range");
  }
  const auto k = static_cast<std::size_t>(i);
  return Row{ids_[k], features_.row(i).transpose(), labels_[k], one_hot_.row(i).transpose()};
}

Index EncodedDataset::index_of(SampleId id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) {
    throw ContractViolation("sample id " + std::to_string(id) + " is not in the dataset");
  }
  return it->second;
}

FeatureBatch EncodedDataset::select(std::span<const SampleId> ids) const {
  const auto n = static_cast<Index>(ids.size());
  Matrix f(n, feature_dim());
  Matrix y(n, class_count_);
  for (Index r = 0; r < n; ++r) {
    const Index src = index_of(ids[static_cast<std::size_t>(r)]);
    f.row(r) = features_.row(src);
    y.row(r) = one_hot_.row(src);
  }
  return FeatureBatch(std::move(f), std::move(y), std::vector<SampleId>(ids.begin(), ids.end()));
}

EncodedDataset EncodedDataset::subset(std::span<const SampleId> ids) const {
  const auto n = static_cast<Index>(ids.size());
  Matrix f(n, feature_dim());
  std::vector<int> labels;
  labels.reserve(ids.size());
  for (Index r = 0; r < n; ++r) {
    const Index src = index_of(ids[static_cast<std::size_t>(r)]);
    f.row(r) = features_.row(src);
    labels.push_back(labels_[static_cast<std::size_t>(src)]);
  }
  return EncodedDataset(std::vector<SampleId>(ids.begin(), ids.end()), std::move(f),
                        std::move(labels), class_count_);
}

FeatureBatch EncodedDataset::as_batch() const { return FeatureBatch(features_, one_hot_, ids_); }

EncodedDataset encode(const FeatureExtractor& extractor, const RawDataset& raw) {
  if (raw.inputs.rows() > 0 && raw.inputs.cols() != extractor.input_dim()) {
    throw ContractViolation("encode: raw input width " + std::to_string(raw.inputs.cols()) +
                            " does not match extractor input_dim " +
                            std::to_string(extractor.input_dim()));
  }
  if (static_cast<Index>(raw.labels.size()) != raw.size() ||
      static_cast<Index>(raw.ids.size()) != raw.size()) {
    throw ContractViolation("encode: raw ids, inputs and labels disagree on row count");
  }
  for (std::size_t i = 0; i < raw.labels.size(); ++i) {
    if (raw.labels[i] < 0 || raw.labels[i] >= raw.class_count) {
      throw InputError("row " + std::to_string(i) + ": label " + std::to_string(raw.labels[i]) +
                       " outside [0, " + std::to_string(raw.class_count) + ")");
    }
  }
  if (!raw.inputs.allFinite()) {
    for (Index r = 0; r < raw.inputs.rows(); ++r) {
      if (!raw.inputs.row(r).allFinite()) {
        throw InputError("row " + std::to_string(r) + ": input contains NaN or Inf");
      }
    }
  }
  Matrix features = raw.size() == 0 ? Matrix(0, extractor.feature_dim()) : extractor.extract_rows(raw.inputs);
  return EncodedDataset(raw.ids, std::move(features), raw.labels, raw.class_count);
}

}  // namespace unlearn
