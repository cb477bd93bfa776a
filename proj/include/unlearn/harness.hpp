#pragma once

// Request-stream driver: learn requests build the initial (T, W), then
// forget requests are applied one by one (extract -> update T -> update W),
// with optional verification against the re-training oracle.

#include <cstdint>
#include <exception>
#include <optional>
#include <stdexcept>
#include <vector>

#include "unlearn/analytic.hpp"
#include "unlearn/features.hpp"
#include "unlearn/verify.hpp"

namespace unlearn {

struct StreamConfig {
  int learn_chunks = 1;           // M
  std::size_t forget_total = 0;   // ids sampled for forgetting
  int forget_requests = 0;        // K
  std::uint64_t seed = 0;
};

struct RequestStream {
  std::vector<FeatureBatch> learn_requests;
  std::vector<FeatureBatch> forget_requests;
  StreamConfig config;
  Index feature_dim = 0;
  Index class_count = 0;

  std::size_t size() const noexcept { return learn_requests.size() + forget_requests.size(); }

  /// Learn ids pairwise distinct, forget batches pairwise disjoint, every
  /// forget id learned. Throws ContractViolation otherwise.
  void validate() const;
};

/// Learn batches: the dataset split in order into M contiguous chunks.
/// Forget batches: forget_total ids drawn without replacement under the seed,
/// split into K batches; remainders go to the earliest chunks/batches.
RequestStream build_stream(const EncodedDataset& dataset, const StreamConfig& config);

/// Single-writer holder of (T, W) and the id ledger. Every request is
/// validated against the ledger before any state changes, and a failed
/// update leaves the session as it was.
class Session {
 public:
  Session(Index feature_dim, Index class_count, double gamma);
  Session(AnalyticState state, SampleLedger ledger, std::size_t completed_requests);

  void learn(const FeatureBatch& batch);
  void forget(const FeatureBatch& batch);

  const AnalyticState& state() const noexcept { return state_; }
  const AnalyticModel& model() const noexcept { return state_.model; }
  const TrackingMatrix& tracking() const noexcept { return state_.tracking; }
  const SampleLedger& ledger() const noexcept { return ledger_; }
  double gamma() const noexcept { return state_.model.gamma(); }

  /// Requests applied so far, counted in stream order (learn, then forget).
  std::size_t completed_requests() const noexcept { return completed_; }

 private:
  AnalyticState state_;
  SampleLedger ledger_;
  std::size_t completed_ = 0;
};

enum class RequestKind { learn, forget };
const char* to_string(RequestKind kind);

struct RunOptions {
  int verify_every = 0;  // attach a GapReport every v-th forget request; 0 = never
  bool time = true;
  /// Stop once this many stream requests have completed (for split runs).
  std::optional<std::size_t> stop_after;
};

/// Rows the verifier needs; only consulted when verify_every > 0.
struct VerifyContext {
  const EncodedDataset* dataset = nullptr;
  const EncodedDataset* test_rows = nullptr;
};

struct RunRecord {
  struct Entry {
    std::size_t request_index;  // position in the stream, 0-based
    RequestKind kind;
    std::size_t batch_size;
    double wall_time_seconds;
    std::optional<GapReport> gap;
  };
  std::vector<Entry> per_request;
  double cumulative_time_seconds = 0.0;
  double gamma = 0.0;
  int verify_every = 0;
  StreamConfig stream;

  std::vector<GapReport> gap_reports() const;
  double time_for(RequestKind kind) const;
};

/// Raised when a request fails mid-run. The session still holds the state
/// after the last completed request.
class RequestFailed : public std::runtime_error {
 public:
  RequestFailed(std::size_t request_index, std::exception_ptr cause, const std::string& what);
  std::size_t request_index() const noexcept { return index_; }
  [[noreturn]] void rethrow_cause() const { std::rethrow_exception(cause_); }

 private:
  std::size_t index_;
  std::exception_ptr cause_;
};

/// Applies the stream to the session, resuming at session.completed_requests().
/// Wall time covers the update calls only, never verification.
RunRecord run_stream(Session& session, const RequestStream& stream, const RunOptions& options,
                     const VerifyContext& verify = {});

/// Fresh session with T = (gamma I)^-1 and W = 0.
RunRecord run_stream(const RequestStream& stream, double gamma, const RunOptions& options,
                     const VerifyContext& verify = {});

struct BenchConfig {
  std::vector<std::size_t> sizes;  // retained-set sizes N
  std::size_t forget_size = 100;
  Index feature_dim = 64;
  int repeats = 20;
  int warmup = 3;
  int class_count = 10;
  Index input_dim = 32;
  double gamma = kDefaultGamma;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::size_t retained_size;
  std::size_t forget_size;
  double mean_seconds;
  double stddev_seconds;
  int repeats;
};

/// Mean and standard deviation of the wall time of one forget request
/// (T and W update) for each N. repeats = 0 yields an empty table.
std::vector<BenchRow> bench_scaling(const BenchConfig& config);

void write_bench_csv(std::ostream& out, std::span<const BenchRow> rows);
/// request,kind,batch_size,wall_time_seconds,cumulative_seconds
void write_timing_csv(std::ostream& out, const RunRecord& record);

}  // namespace unlearn
