#include "unlearn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <unordered_set>

#include "unlearn/csv.hpp"
#include "unlearn/errors.hpp"

namespace unlearn {
namespace {

void check_distinct(std::span<const SampleId> ids, const char* what) {
  std::unordered_set<SampleId> seen;
  seen.reserve(ids.size());
  for (const auto id : ids) {
    if (!seen.insert(id).second) {
      throw ContractViolation(std::string(what) + ": id " + std::to_string(id) +
                              " appears twice in one request");
    }
  }
}

// Ids of dataset rows that satisfy pred, in dataset order.
template <typename Pred>
std::vector<SampleId> ids_where(const EncodedDataset& dataset, Pred pred) {
  std::vector<SampleId> out;
  for (const auto id : dataset.ids()) {
    if (pred(id)) out.push_back(id);
  }
  return out;
}

void check_ledger_ids(const EncodedDataset& dataset, const SampleLedger& ledger) {
  for (const auto id : ledger.learned_ids()) {
    if (!dataset.contains(id)) {
      throw ContractViolation("ledger id " + std::to_string(id) + " is not in the dataset");
    }
  }
}

}  // namespace

void SampleLedger::check_learn(std::span<const SampleId> ids) const {
  check_distinct(ids, "learn request");
  for (const auto id : ids) {
    if (learned_.contains(id)) {
      throw ContractViolation("learn request: id " + std::to_string(id) + " was already learned");
    }
  }
}

void SampleLedger::check_forget(std::span<const SampleId> ids) const {
  check_distinct(ids, "forget request");
  for (const auto id : ids) {
    if (!learned_.contains(id)) {
      throw ContractViolation("forget request: id " + std::to_string(id) + " was never learned");
    }
    if (forgotten_.contains(id)) {
      throw ContractViolation("forget request: id " + std::to_string(id) + " was already forgotten");
    }
  }
}

void SampleLedger::record_learned(std::span<const SampleId> ids) {
  check_learn(ids);
  learned_.insert(ids.begin(), ids.end());
}

void SampleLedger::record_forgotten(std::span<const SampleId> ids) {
  check_forget(ids);
  forgotten_.insert(ids.begin(), ids.end());
}

SampleLedger SampleLedger::restore(std::set<SampleId> learned, std::set<SampleId> forgotten) {
  if (!std::includes(learned.begin(), learned.end(), forgotten.begin(), forgotten.end())) {
    throw ContractViolation("ledger: forgotten ids must be a subset of learned ids");
  }
  SampleLedger ledger;
  ledger.learned_ = std::move(learned);
  ledger.forgotten_ = std::move(forgotten);
  return ledger;
}

double GapReport::max_delta() const {
  return std::max({delta_params, delta_retain, delta_forget, delta_test, delta_mia});
}

AnalyticModel oracle_retrain(const EncodedDataset& dataset, const SampleLedger& ledger, double gamma) {
  check_ledger_ids(dataset, ledger);
  const auto retained = ids_where(dataset, [&](SampleId id) { return ledger.is_retained(id); });
  return joint_fit(dataset.select(retained), gamma).model;
}

double accuracy(const AnalyticModel& model, const EncodedDataset& rows) {
  if (rows.size() == 0) {
    throw InputError("accuracy over an empty row set is undefined");
  }
  const auto prediction = predict(model, rows.features());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < prediction.classes.size(); ++i) {
    if (prediction.classes[i] == rows.labels()[i]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(rows.size());
}

double params_gap(const AnalyticModel& a, const AnalyticModel& b) {
  if (a.feature_dim() != b.feature_dim() || a.class_count() != b.class_count()) {
    throw ContractViolation("params_gap: models have different shapes");
  }
  return (a.weights() - b.weights()).norm() / std::max(b.weights().norm(), 1e-30);
}

namespace mia {

std::vector<double> residual_scores(const AnalyticModel& model, const EncodedDataset& rows) {
  if (rows.feature_dim() != model.feature_dim() || rows.class_count() != model.class_count()) {
    throw ContractViolation("residual_scores: row dimensions do not match the model");
  }
  const Matrix residual = rows.one_hot() - rows.features() * model.weights();
  std::vector<double> scores(static_cast<std::size_t>(rows.size()));
  for (Index r = 0; r < residual.rows(); ++r) {
    scores[static_cast<std::size_t>(r)] = residual.row(r).squaredNorm();
  }
  return scores;
}

ThresholdFit fit_threshold(std::span<const double> member_scores,
                           std::span<const double> nonmember_scores) {
  if (member_scores.empty() || nonmember_scores.empty()) {
    throw InputError("membership threshold needs both members and non-members");
  }
  struct Point {
    double score;
    bool member;
  };
  std::vector<Point> points;
  points.reserve(member_scores.size() + nonmember_scores.size());
  for (const double s : member_scores) points.push_back({s, true});
  for (const double s : nonmember_scores) points.push_back({s, false});
  std::sort(points.begin(), points.end(), [](const Point& a, const Point& b) { return a.score < b.score; });

  const auto n_members = static_cast<std::uint64_t>(member_scores.size());
  const auto n_nonmembers = static_cast<std::uint64_t>(nonmember_scores.size());
  // Scaled balanced error: (missed members) * Nn + (false members) * Nm.
  // Integer so that ties are exact.
  auto scaled_error = [&](std::uint64_t members_below, std::uint64_t nonmembers_below) {
    return (n_members - members_below) * n_nonmembers + nonmembers_below * n_members;
  };

  double best_threshold = -std::numeric_limits<double>::infinity();
  std::uint64_t best = scaled_error(0, 0);
  std::uint64_t members_below = 0;
  std::uint64_t nonmembers_below = 0;
  for (std::size_t i = 0; i < points.size();) {
    const double value = points[i].score;
    for (; i < points.size() && points[i].score == value; ++i) {
      (points[i].member ? members_below : nonmembers_below) += 1;
    }
    const auto err = scaled_error(members_below, nonmembers_below);
    if (err < best) {
      best = err;
      best_threshold = value;
    }
  }
  const double denom = 2.0 * static_cast<double>(n_members) * static_cast<double>(n_nonmembers);
  return {best_threshold, static_cast<double>(best) / denom};
}

double member_rate(std::span<const double> scores, double threshold) {
  if (scores.empty()) {
    throw InputError("member rate over an empty score set is undefined");
  }
  const auto members = std::count_if(scores.begin(), scores.end(), [&](double s) { return s <= threshold; });
  return static_cast<double>(members) / static_cast<double>(scores.size());
}

}  // namespace mia

namespace {

struct Partition {
  EncodedDataset retained;
  EncodedDataset forgotten;
};

Partition partition(const EncodedDataset& dataset, const SampleLedger& ledger) {
  check_ledger_ids(dataset, ledger);
  const auto retained = ids_where(dataset, [&](SampleId id) { return ledger.is_retained(id); });
  const auto forgotten = ids_where(dataset, [&](SampleId id) { return ledger.forgotten_ids().contains(id); });
  return {dataset.subset(retained), dataset.subset(forgotten)};
}

double forgotten_member_rate(const AnalyticModel& model, const Partition& parts,
                             const EncodedDataset& test_rows) {
  const auto members = mia::residual_scores(model, parts.retained);
  const auto nonmembers = mia::residual_scores(model, test_rows);
  const auto fit = mia::fit_threshold(members, nonmembers);
  return mia::member_rate(mia::residual_scores(model, parts.forgotten), fit.threshold);
}

double mia_gap(const AnalyticModel& unlearned, const AnalyticModel& retrained, const Partition& parts,
               const EncodedDataset& test_rows) {
  if (parts.forgotten.size() == 0 || parts.retained.size() == 0 || test_rows.size() == 0) {
    throw InputError("mia_gap needs non-empty forgotten, retained and test sets");
  }
  return std::abs(forgotten_member_rate(unlearned, parts, test_rows) -
                  forgotten_member_rate(retrained, parts, test_rows));
}

}  // namespace

double mia_gap(const AnalyticModel& unlearned, const AnalyticModel& retrained,
               const EncodedDataset& dataset, const SampleLedger& ledger,
               const EncodedDataset& test_rows) {
  return mia_gap(unlearned, retrained, partition(dataset, ledger), test_rows);
}

GapReport gap_report(const AnalyticModel& unlearned, const EncodedDataset& dataset,
                     const SampleLedger& ledger, const EncodedDataset& test_rows, int request_index) {
  const auto retrained = oracle_retrain(dataset, ledger, unlearned.gamma());
  return gap_report(unlearned, retrained, dataset, ledger, test_rows, request_index);
}

GapReport gap_report(const AnalyticModel& unlearned, const AnalyticModel& retrained,
                     const EncodedDataset& dataset, const SampleLedger& ledger,
                     const EncodedDataset& test_rows, int request_index) {
  const auto parts = partition(dataset, ledger);
  GapReport report;
  report.request_index = request_index;
  report.delta_params = params_gap(unlearned, retrained);
  report.delta_test = std::abs(accuracy(unlearned, test_rows) - accuracy(retrained, test_rows));

  report.retained_empty = parts.retained.size() == 0;
  report.forgotten_empty = parts.forgotten.size() == 0;
  if (!report.retained_empty) {
    report.delta_retain =
        std::abs(accuracy(unlearned, parts.retained) - accuracy(retrained, parts.retained));
  }
  if (!report.forgotten_empty) {
    report.delta_forget =
        std::abs(accuracy(unlearned, parts.forgotten) - accuracy(retrained, parts.forgotten));
  }
  if (!report.forgotten_empty && !report.retained_empty) {
    report.delta_mia = 100.0 * mia_gap(unlearned, retrained, parts, test_rows);
  }
  return report;
}

void write_gap_csv(std::ostream& out, std::span<const GapReport> reports) {
  out << "request,delta_params,delta_retain,delta_forget,delta_test,delta_mia\n";
  for (const auto& r : reports) {
    out << r.request_index << ',' << format_double(r.delta_params) << ','
        << format_double(r.delta_retain) << ',' << format_double(r.delta_forget) << ','
        << format_double(r.delta_test) << ',' << format_double(r.delta_mia) << '\n';
  }
}

}  // namespace unlearn
