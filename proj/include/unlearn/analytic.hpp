#pragma once

// Closed-form ridge classifier and its recursive learn/unlearn updates.
//
// The model solves  min_W  sum_j ||y_j - f_j W||^2 + gamma ||W||^2  over the
// retained samples. Alongside W we keep the tracking matrix
// T = (sum_j f_j^T f_j + gamma I)^-1, which is all that is needed to add or
// remove a batch of samples exactly without revisiting the retained data.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace unlearn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using SampleId = std::uint64_t;

inline constexpr double kDefaultGamma = 1e-3;

// Factorizations whose condition estimate exceeds this are rejected.
inline constexpr double kMaxConditionNumber = 1e12;

class AnalyticModel {
 public:
  AnalyticModel(Matrix weights, double gamma);

  /// All-zero weights: the closed-form answer for an empty training set.
  static AnalyticModel zero(Index feature_dim, Index class_count, double gamma);

  const Matrix& weights() const noexcept { return weights_; }
  double gamma() const noexcept { return gamma_; }
  Index feature_dim() const noexcept { return weights_.rows(); }
  Index class_count() const noexcept { return weights_.cols(); }

 private:
  Matrix weights_;
  double gamma_;
};

/// Inverse of the regularized Gram matrix of the samples currently learned.
///
/// The regularized Gram matrix itself (sum f^T f + gamma I, an aggregate with
/// no per-sample content) travels alongside T. Updates adjust it by +-F^T F and
/// use it for one Newton step on T, which removes the rounding drift that
/// long chains of rank-n downdates otherwise accumulate.
class TrackingMatrix {
 public:
  TrackingMatrix(Matrix matrix, Matrix regularized_gram, double gamma);
  /// Recovers the regularized Gram matrix by inverting `matrix`.
  TrackingMatrix(Matrix matrix, double gamma);

  /// (gamma I)^-1, the state before any sample has been learned.
  static TrackingMatrix initial(Index feature_dim, double gamma);

  const Matrix& matrix() const noexcept { return matrix_; }
  const Matrix& regularized_gram() const noexcept { return gram_; }
  double gamma() const noexcept { return gamma_; }
  Index dim() const noexcept { return matrix_.rows(); }

 private:
  Matrix matrix_;
  Matrix gram_;
  double gamma_;
};

/// Rows of features (n x d_F) with matching one-hot labels (n x d_C).
/// Empty batches keep their column counts so dimension checks still apply.
class FeatureBatch {
 public:
  FeatureBatch(Matrix features, Matrix labels, std::vector<SampleId> sample_ids);

  static FeatureBatch empty(Index feature_dim, Index class_count);

  const Matrix& features() const noexcept { return features_; }
  const Matrix& labels() const noexcept { return labels_; }
  const std::vector<SampleId>& sample_ids() const noexcept { return ids_; }

  Index size() const noexcept { return features_.rows(); }
  bool is_empty() const noexcept { return features_.rows() == 0; }
  Index feature_dim() const noexcept { return features_.cols(); }
  Index class_count() const noexcept { return labels_.cols(); }

 private:
  Matrix features_;
  Matrix labels_;
  std::vector<SampleId> ids_;
};

struct AnalyticState {
  TrackingMatrix tracking;
  AnalyticModel model;
};

struct Prediction {
  Matrix scores;
  std::vector<int> classes;
};

/// sum_j ||y_j - f_j W||^2 + gamma ||W||_F^2 over the batch.
double objective_value(const AnalyticModel& model, const FeatureBatch& batch);

/// Closed-form fit: W = (F^T F + gamma I)^-1 F^T Y and T = (F^T F + gamma I)^-1.
AnalyticState joint_fit(const FeatureBatch& batch, double gamma);

/// (A + B C D)^-1 from A^-1 without forming A:
///   A^-1 - A^-1 B (C^-1 + D A^-1 B)^-1 D A^-1.
/// Throws SingularityError if C or the m x m core cannot be safely inverted.
Matrix woodbury_update(const Matrix& a_inv, const Matrix& b, const Matrix& c,
                       const Matrix& d);

/// Adds a batch of new samples:
///   T' = T - T F^T (I + F T F^T)^-1 F T
///   W' = W - T' F^T (F W - Y)
/// T' is then polished with one Newton step against the updated Gram matrix.
AnalyticState learn_update(const TrackingMatrix& tracking, const AnalyticModel& model,
                           const FeatureBatch& batch);

/// Removes a batch of previously learned samples from the tracking matrix:
///   T' = T + T F^T (I - F T F^T)^-1 F T
/// followed by the same Newton step as learn_update.
/// Throws UnlearnabilityError (with no state change) when the core is not
/// safely positive definite.
TrackingMatrix unlearn_tracking(const TrackingMatrix& tracking, const FeatureBatch& forget);

/// Removes a batch from the weights given the already-updated tracking matrix:
///   W' = (I + T' F^T F) W - T' F^T Y
AnalyticModel unlearn_model(const AnalyticModel& model, const TrackingMatrix& tracking_after,
                            const FeatureBatch& forget);

/// unlearn_tracking followed by unlearn_model.
AnalyticState unlearn_update(const AnalyticState& state, const FeatureBatch& forget);

/// scores = features * W; ties in the per-row argmax go to the lowest class.
Prediction predict(const AnalyticModel& model, const Matrix& features);

}  // namespace unlearn
