#pragma once

// Test-only reference computations. None of these share code paths with the
// library's update routines: sums are straight loops, solves go through a
// QR factorization of the augmented least-squares system, and inverses use
// full-pivot LU on explicitly assembled matrices.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "unlearn/analytic.hpp"
#include "unlearn/random.hpp"

namespace unlearn::testing {

inline double rel_frobenius(const Matrix& a, const Matrix& reference) {
  return (a - reference).norm() / std::max(reference.norm(), 1e-30);
}

inline Matrix random_matrix(Rng& rng, Index rows, Index cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  return m;
}

/// Batch with Gaussian features, uniformly random classes and ids starting at id0.
inline FeatureBatch random_batch(Rng& rng, Index n, Index d, Index classes, SampleId id0 = 0) {
  Matrix f = random_matrix(rng, n, d);
  Matrix y = Matrix::Zero(n, classes);
  std::vector<SampleId> ids(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r) {
    y(r, static_cast<Index>(rng.below(static_cast<std::uint64_t>(classes)))) = 1.0;
    ids[static_cast<std::size_t>(r)] = id0 + static_cast<SampleId>(r);
  }
  return FeatureBatch(std::move(f), std::move(y), std::move(ids));
}

/// Rows `keep` of a batch (in the given order).
inline FeatureBatch take_rows(const FeatureBatch& b, const std::vector<Index>& keep) {
  Matrix f(static_cast<Index>(keep.size()), b.feature_dim());
  Matrix y(static_cast<Index>(keep.size()), b.class_count());
  std::vector<SampleId> ids;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    f.row(static_cast<Index>(i)) = b.features().row(keep[i]);
    y.row(static_cast<Index>(i)) = b.labels().row(keep[i]);
    ids.push_back(b.sample_ids()[static_cast<std::size_t>(keep[i])]);
  }
  return FeatureBatch(std::move(f), std::move(y), std::move(ids));
}

inline FeatureBatch concat(const FeatureBatch& a, const FeatureBatch& b) {
  Matrix f(a.size() + b.size(), a.feature_dim());
  f << a.features(), b.features();
  Matrix y(a.size() + b.size(), a.class_count());
  y << a.labels(), b.labels();
  std::vector<SampleId> ids = a.sample_ids();
  ids.insert(ids.end(), b.sample_ids().begin(), b.sample_ids().end());
  return FeatureBatch(std::move(f), std::move(y), std::move(ids));
}

/// sum_j ||y_j - f_j W||^2 + gamma ||W||^2 by scalar loops.
inline double naive_objective(const Matrix& w, double gamma, const Matrix& f, const Matrix& y) {
  double total = 0.0;
  for (Index j = 0; j < f.rows(); ++j) {
    for (Index c = 0; c < w.cols(); ++c) {
      double pred = 0.0;
      for (Index k = 0; k < w.rows(); ++k) pred += f(j, k) * w(k, c);
      const double r = y(j, c) - pred;
      total += r * r;
    }
  }
  double reg = 0.0;
  for (Index k = 0; k < w.rows(); ++k)
    for (Index c = 0; c < w.cols(); ++c) reg += w(k, c) * w(k, c);
  return total + gamma * reg;
}

/// sum_j f_j^T f_j + gamma I, accumulated sample by sample.
inline Matrix naive_regularized_gram(const Matrix& f, double gamma) {
  const Index d = f.cols();
  Matrix g = Matrix::Identity(d, d) * gamma;
  for (Index j = 0; j < f.rows(); ++j)
    for (Index a = 0; a < d; ++a)
      for (Index b = 0; b < d; ++b) g(a, b) += f(j, a) * f(j, b);
  return g;
}

/// Ridge solution via Householder QR of [F; sqrt(gamma) I] W = [Y; 0].
/// Never forms the Gram matrix.
inline Matrix qr_ridge_solve(const Matrix& f, const Matrix& y, double gamma) {
  const Index n = f.rows();
  const Index d = f.cols();
  Matrix a(n + d, d);
  a << f, Matrix::Identity(d, d) * std::sqrt(gamma);
  Matrix b(n + d, y.cols());
  b << y, Matrix::Zero(d, y.cols());
  return a.colPivHouseholderQr().solve(b);
}

/// (sum f_j^T f_j + gamma I)^-1 through full-pivot LU.
inline Matrix dense_tracking(const Matrix& f, double gamma) {
  return naive_regularized_gram(f, gamma).fullPivLu().inverse();
}

// FNV-1a over the raw bytes of a matrix (column-major), for content hashes.
inline std::uint64_t content_hash(const Matrix& m, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
  const auto n = static_cast<std::size_t>(m.size()) * sizeof(double);
  for (std::size_t i = 0; i < n; ++i) h = (h ^ bytes[i]) * 0x100000001b3ULL;
  return h;
}

}  // namespace unlearn::testing
