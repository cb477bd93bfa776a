#pragma once

// Re-training oracle and the gap metrics that compare an unlearned model
// against it: parameter distance, accuracy gaps on retained / forgotten /
// test rows, and a residual-threshold membership-inference indicator.

#include <iosfwd>
#include <set>
#include <span>
#include <vector>

#include "unlearn/analytic.hpp"
#include "unlearn/features.hpp"

namespace unlearn {

/// Ids learned so far and ids forgotten so far. Only ids are kept, never
/// features. Every mutation validates the whole request first and leaves the
/// ledger untouched on error.
class SampleLedger {
 public:
  void check_learn(std::span<const SampleId> ids) const;
  void check_forget(std::span<const SampleId> ids) const;

  void record_learned(std::span<const SampleId> ids);
  void record_forgotten(std::span<const SampleId> ids);

  const std::set<SampleId>& learned_ids() const noexcept { return learned_; }
  const std::set<SampleId>& forgotten_ids() const noexcept { return forgotten_; }
  bool is_retained(SampleId id) const { return learned_.contains(id) && !forgotten_.contains(id); }
  std::size_t retained_count() const noexcept { return learned_.size() - forgotten_.size(); }

  /// Builds a ledger from persisted sets; throws ContractViolation unless
  /// forgotten is a subset of learned.
  static SampleLedger restore(std::set<SampleId> learned, std::set<SampleId> forgotten);

  friend bool operator==(const SampleLedger&, const SampleLedger&) = default;

 private:
  std::set<SampleId> learned_;
  std::set<SampleId> forgotten_;
};

struct GapReport {
  double delta_params = 0.0;
  double delta_retain = 0.0;  // percentage points
  double delta_forget = 0.0;
  double delta_test = 0.0;
  double delta_mia = 0.0;  // percentage points
  int request_index = 0;
  bool forgotten_empty = false;  // delta_forget / delta_mia not measurable
  bool retained_empty = false;   // delta_retain / delta_mia not measurable

  double max_delta() const;
};

/// Closed-form fit over exactly the retained rows (learned minus forgotten),
/// taken in dataset order. This is the only operation that reads retained
/// data; it exists to play the re-training reference.
AnalyticModel oracle_retrain(const EncodedDataset& dataset, const SampleLedger& ledger, double gamma);

/// Percentage of rows whose predicted class equals the label.
double accuracy(const AnalyticModel& model, const EncodedDataset& rows);

/// ||W_a - W_b||_F / max(||W_b||_F, 1e-30); b is the reference.
double params_gap(const AnalyticModel& a, const AnalyticModel& b);

namespace mia {

/// Per-row squared residual ||y - f W||^2.
std::vector<double> residual_scores(const AnalyticModel& model, const EncodedDataset& rows);

struct ThresholdFit {
  double threshold;       // rows with score <= threshold are called members
  double balanced_error;  // mean of the member and non-member error rates
};

/// Picks the threshold (from -inf and every observed score) that minimizes the
/// balanced error; ties go to the smallest threshold.
ThresholdFit fit_threshold(std::span<const double> member_scores,
                           std::span<const double> nonmember_scores);

double member_rate(std::span<const double> scores, double threshold);

}  // namespace mia

/// |member-rate(unlearned) - member-rate(retrained)| on the forgotten rows, in
/// [0, 1]. Each model gets its own threshold fit on retained (members) vs
/// test (non-members) residuals.
double mia_gap(const AnalyticModel& unlearned, const AnalyticModel& retrained,
               const EncodedDataset& dataset, const SampleLedger& ledger,
               const EncodedDataset& test_rows);

/// All five gaps against oracle_retrain. delta_forget covers every id
/// forgotten so far.
GapReport gap_report(const AnalyticModel& unlearned, const EncodedDataset& dataset,
                     const SampleLedger& ledger, const EncodedDataset& test_rows, int request_index);

/// Same, with a re-trained reference the caller already has.
GapReport gap_report(const AnalyticModel& unlearned, const AnalyticModel& retrained,
                     const EncodedDataset& dataset, const SampleLedger& ledger,
                     const EncodedDataset& test_rows, int request_index);

/// request,delta_params,delta_retain,delta_forget,delta_test,delta_mia
void write_gap_csv(std::ostream& out, std::span<const GapReport> reports);

}  // namespace unlearn
