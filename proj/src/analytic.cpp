#include "unlearn/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "unlearn/errors.hpp"

namespace unlearn {
namespace {

void require_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw ContractViolation("gamma must be positive and finite, got " + std::to_string(gamma));
  }
}

void require_dims(const char* what, Index got, Index expected) {
  if (got != expected) {
    throw ContractViolation(std::string(what) + ": expected " + std::to_string(expected) +
                            ", got " + std::to_string(got));
  }
}

void symmetrize(Matrix& m) { m = 0.5 * (m + m.transpose()).eval(); }

void check_batch(const FeatureBatch& batch, Index feature_dim, Index class_count) {
  require_dims("batch feature columns", batch.feature_dim(), feature_dim);
  require_dims("batch label columns", batch.class_count(), class_count);
}

void check_pair(const TrackingMatrix& tracking, const AnalyticModel& model) {
  require_dims("tracking matrix dimension", tracking.dim(), model.feature_dim());
  if (tracking.gamma() != model.gamma()) {
    throw ContractViolation("tracking matrix and model were built with different gamma");
  }
}

// Factorizes the symmetric n x n core of a rank-n update. Returns the
// factorization or throws E naming `what`.
template <typename E>
Eigen::LDLT<Matrix> factorize_core(Matrix core, const char* what, bool require_pd) {
  symmetrize(core);
  Eigen::LDLT<Matrix> ldlt(core);
  if (ldlt.info() != Eigen::Success) {
    throw E(std::string(what) + " could not be factorized");
  }
  if (require_pd && ldlt.vectorD().minCoeff() <= 0.0) {
    throw E(std::string(what) + " is not positive definite");
  }
  // Both cores are I plus or minus a PSD term, so pivots are also measured
  // against the unit scale of the identity: rcond alone is 1 for any 1 x 1 core.
  const Vector pivots = ldlt.vectorD().cwiseAbs();
  const double rcond = std::min(ldlt.rcond(), pivots.minCoeff() / std::max(1.0, pivots.maxCoeff()));
  if (!(rcond * kMaxConditionNumber >= 1.0)) {
    throw E(std::string(what) + " is ill-conditioned (condition estimate " +
            std::to_string(1.0 / rcond) + ")");
  }
  return ldlt;
}

Matrix gram_from_tracking(const Matrix& tracking) {
  if (tracking.rows() == 0 || tracking.rows() != tracking.cols() || !tracking.allFinite()) {
    throw ContractViolation("tracking matrix must be square, non-empty and finite");
  }
  Eigen::LDLT<Matrix> ldlt(tracking);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0) {
    throw StateIntegrityError("tracking matrix is not positive definite");
  }
  Matrix gram = ldlt.solve(Matrix::Identity(tracking.rows(), tracking.cols()));
  symmetrize(gram);
  return gram;
}

// One Newton-Schulz step toward gram^-1: T + T (I - gram T).
Matrix polish(const Matrix& tracking, const Matrix& gram) {
  const Index d = tracking.rows();
  Matrix out = tracking + tracking * (Matrix::Identity(d, d) - gram * tracking);
  symmetrize(out);
  return out;
}

}  // namespace

AnalyticModel::AnalyticModel(Matrix weights, double gamma) : weights_(std::move(weights)), gamma_(gamma) {
  require_gamma(gamma_);
  if (weights_.rows() == 0 || weights_.cols() == 0) {
    throw ContractViolation("model needs positive feature and class dimensions");
  }
  if (!weights_.allFinite()) {
    throw StateIntegrityError("model weights contain NaN or Inf");
  }
}

AnalyticModel AnalyticModel::zero(Index feature_dim, Index class_count, double gamma) {
  return AnalyticModel(Matrix::Zero(feature_dim, class_count), gamma);
}

TrackingMatrix::TrackingMatrix(Matrix matrix, Matrix regularized_gram, double gamma)
    : matrix_(std::move(matrix)), gram_(std::move(regularized_gram)), gamma_(gamma) {
  require_gamma(gamma_);
  if (matrix_.rows() == 0 || matrix_.rows() != matrix_.cols()) {
    throw ContractViolation("tracking matrix must be square and non-empty");
  }
  if (gram_.rows() != matrix_.rows() || gram_.cols() != matrix_.cols()) {
    throw ContractViolation("regularized Gram matrix must match the tracking matrix shape");
  }
  if (!matrix_.allFinite() || !gram_.allFinite()) {
    throw StateIntegrityError("tracking matrix contains NaN or Inf");
  }
  if ((matrix_ - matrix_.transpose()).norm() > 1e-10 * matrix_.norm() ||
      (gram_ - gram_.transpose()).norm() > 1e-10 * gram_.norm()) {
    throw ContractViolation("tracking matrix is not symmetric");
  }
}

TrackingMatrix::TrackingMatrix(Matrix matrix, double gamma)
    : TrackingMatrix(matrix, gram_from_tracking(matrix), gamma) {}

TrackingMatrix TrackingMatrix::initial(Index feature_dim, double gamma) {
  require_gamma(gamma);
  return TrackingMatrix(Matrix::Identity(feature_dim, feature_dim) / gamma,
                        Matrix::Identity(feature_dim, feature_dim) * gamma, gamma);
}

FeatureBatch::FeatureBatch(Matrix features, Matrix labels, std::vector<SampleId> sample_ids)
    : features_(std::move(features)), labels_(std::move(labels)), ids_(std::move(sample_ids)) {
  const auto n = features_.rows();
  if (labels_.rows() != n || static_cast<Index>(ids_.size()) != n) {
    throw ContractViolation("batch features, labels and ids disagree on row count");
  }
  if (!features_.allFinite()) {
    throw InputError("batch features contain NaN or Inf");
  }
  for (Index r = 0; r < n; ++r) {
    int ones = 0;
    for (Index c = 0; c < labels_.cols(); ++c) {
      const double v = labels_(r, c);
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        ones = -1;
        break;
      }
    }
    if (ones != 1) {
      throw InputError("label row " + std::to_string(r) + " is not one-hot");
    }
  }
  std::unordered_set<SampleId> seen;
  seen.reserve(ids_.size());
  for (const auto id : ids_) {
    if (!seen.insert(id).second) {
      throw InputError("duplicate sample id " + std::to_string(id) + " in batch");
    }
  }
}

FeatureBatch FeatureBatch::empty(Index feature_dim, Index class_count) {
  return FeatureBatch(Matrix(0, feature_dim), Matrix(0, class_count), {});
}

double objective_value(const AnalyticModel& model, const FeatureBatch& batch) {
  check_batch(batch, model.feature_dim(), model.class_count());
  if (batch.is_empty()) {
    return model.gamma() * model.weights().squaredNorm();
  }
  const Matrix residual = batch.labels() - batch.features() * model.weights();
  return residual.squaredNorm() + model.gamma() * model.weights().squaredNorm();
}

AnalyticState joint_fit(const FeatureBatch& batch, double gamma) {
  require_gamma(gamma);
  const Index d = batch.feature_dim();
  if (d == 0 || batch.class_count() == 0) {
    throw ContractViolation("joint_fit needs positive feature and class dimensions");
  }
  const Matrix& f = batch.features();
  Matrix regularized = Matrix::Identity(d, d) * gamma;
  regularized.selfadjointView<Eigen::Lower>().rankUpdate(f.transpose());
  regularized.triangularView<Eigen::StrictlyUpper>() = regularized.transpose();

  Eigen::LLT<Matrix> llt(regularized);
  if (llt.info() != Eigen::Success) {
    throw StateIntegrityError("regularized Gram matrix is not positive definite");
  }
  Matrix tracking = llt.solve(Matrix::Identity(d, d));
  symmetrize(tracking);
  Matrix weights = llt.solve(f.transpose() * batch.labels());
  return {TrackingMatrix(std::move(tracking), std::move(regularized), gamma),
          AnalyticModel(std::move(weights), gamma)};
}

Matrix woodbury_update(const Matrix& a_inv, const Matrix& b, const Matrix& c, const Matrix& d) {
  const Index n = a_inv.rows();
  const Index m = c.rows();
  if (a_inv.cols() != n || c.cols() != m || b.rows() != n || b.cols() != m || d.rows() != m ||
      d.cols() != n) {
    throw ContractViolation("woodbury_update: incompatible shapes");
  }
  if (m == 0) {
    return a_inv;
  }

  Eigen::PartialPivLU<Matrix> c_lu(c);
  if (!(c_lu.rcond() * kMaxConditionNumber >= 1.0)) {
    throw SingularityError("woodbury_update: C is singular or ill-conditioned");
  }
  const Matrix a_inv_b = a_inv * b;
  const Matrix d_a_inv = d * a_inv;
  const Matrix core = c_lu.inverse() + d * a_inv_b;
  Eigen::PartialPivLU<Matrix> core_lu(core);
  if (!(core_lu.rcond() * kMaxConditionNumber >= 1.0)) {
    throw SingularityError("woodbury_update: core (C^-1 + D A^-1 B) is singular or ill-conditioned");
  }
  return a_inv - a_inv_b * core_lu.solve(d_a_inv);
}

AnalyticState learn_update(const TrackingMatrix& tracking, const AnalyticModel& model,
                           const FeatureBatch& batch) {
  check_pair(tracking, model);
  check_batch(batch, model.feature_dim(), model.class_count());
  if (batch.is_empty()) {
    return {tracking, model};
  }
  const Matrix& f = batch.features();
  const Matrix& t = tracking.matrix();
  const Matrix tf = t * f.transpose();
  Matrix core = Matrix::Identity(f.rows(), f.rows()) + f * tf;
  // I + F T F^T is I plus a PSD matrix; failure here means T was corrupted.
  const auto ldlt = factorize_core<StateIntegrityError>(std::move(core), "learn core (I + F T F^T)", true);

  Matrix gram = tracking.regularized_gram() + f.transpose() * f;
  symmetrize(gram);
  Matrix updated = t - tf * ldlt.solve(tf.transpose());
  symmetrize(updated);
  updated = polish(updated, gram);
  Matrix weights = model.weights() - updated * (f.transpose() * (f * model.weights() - batch.labels()));
  return {TrackingMatrix(std::move(updated), std::move(gram), tracking.gamma()),
          AnalyticModel(std::move(weights), model.gamma())};
}

TrackingMatrix unlearn_tracking(const TrackingMatrix& tracking, const FeatureBatch& forget) {
  require_dims("forget batch feature columns", forget.feature_dim(), tracking.dim());
  if (forget.is_empty()) {
    return tracking;
  }
  const Matrix& f = forget.features();
  const Matrix& t = tracking.matrix();
  const Matrix tf = t * f.transpose();
  Matrix core = Matrix::Identity(f.rows(), f.rows()) - f * tf;
  const auto ldlt =
      factorize_core<UnlearnabilityError>(std::move(core), "unlearn core (I - F T F^T)", true);

  Matrix gram = tracking.regularized_gram() - f.transpose() * f;
  symmetrize(gram);
  Matrix updated = t + tf * ldlt.solve(tf.transpose());
  symmetrize(updated);
  updated = polish(updated, gram);
  return TrackingMatrix(std::move(updated), std::move(gram), tracking.gamma());
}

AnalyticModel unlearn_model(const AnalyticModel& model, const TrackingMatrix& tracking_after,
                            const FeatureBatch& forget) {
  check_pair(tracking_after, model);
  check_batch(forget, model.feature_dim(), model.class_count());
  if (forget.is_empty()) {
    return model;
  }
  // (I + T F^T F) W - T F^T Y, grouped so that no d_F x d_F product is formed.
  const Matrix& f = forget.features();
  Matrix weights = model.weights() +
                   tracking_after.matrix() * (f.transpose() * (f * model.weights() - forget.labels()));
  return AnalyticModel(std::move(weights), model.gamma());
}

AnalyticState unlearn_update(const AnalyticState& state, const FeatureBatch& forget) {
  check_pair(state.tracking, state.model);
  check_batch(forget, state.model.feature_dim(), state.model.class_count());
  TrackingMatrix tracking = unlearn_tracking(state.tracking, forget);
  AnalyticModel model = unlearn_model(state.model, tracking, forget);
  return {std::move(tracking), std::move(model)};
}

Prediction predict(const AnalyticModel& model, const Matrix& features) {
  require_dims("feature columns", features.cols(), model.feature_dim());
  Prediction out;
  out.scores = features * model.weights();
  out.classes.resize(static_cast<std::size_t>(features.rows()));
  for (Index r = 0; r < out.scores.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < out.scores.cols(); ++c) {
      if (out.scores(r, c) > out.scores(r, best)) best = c;
    }
    out.classes[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace unlearn
