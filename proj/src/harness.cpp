#include "unlearn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>
#include <unordered_set>

#include "unlearn/csv.hpp"
#include "unlearn/errors.hpp"
#include "unlearn/random.hpp"

namespace unlearn {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Sizes of `parts` chunks covering `total` items, remainder to the earliest.
std::vector<std::size_t> chunk_sizes(std::size_t total, std::size_t parts) {
  std::vector<std::size_t> sizes(parts, total / parts);
  for (std::size_t i = 0; i < total % parts; ++i) ++sizes[i];
  return sizes;
}

void check_stream_dims(const FeatureBatch& batch, const RequestStream& stream) {
  if (batch.feature_dim() != stream.feature_dim || batch.class_count() != stream.class_count) {
    throw ContractViolation("stream batch dimensions disagree with the stream");
  }
}

}  // namespace

void RequestStream::validate() const {
  std::unordered_set<SampleId> learned;
  for (const auto& batch : learn_requests) {
    check_stream_dims(batch, *this);
    for (const auto id : batch.sample_ids()) {
      if (!learned.insert(id).second) {
        throw ContractViolation("stream: id " + std::to_string(id) + " is learned twice");
      }
    }
  }
  std::unordered_set<SampleId> forgotten;
  for (const auto& batch : forget_requests) {
    check_stream_dims(batch, *this);
    for (const auto id : batch.sample_ids()) {
      if (!learned.contains(id)) {
        throw ContractViolation("stream: forget id " + std::to_string(id) + " is never learned");
      }
      if (!forgotten.insert(id).second) {
        throw ContractViolation("stream: forget batches overlap on id " + std::to_string(id));
      }
    }
  }
}

RequestStream build_stream(const EncodedDataset& dataset, const StreamConfig& config) {
  const auto n = static_cast<std::size_t>(dataset.size());
  if (config.learn_chunks <= 0) {
    throw InputError("learn_chunks must be positive");
  }
  if (config.forget_total > n) {
    throw InputError("forget_total " + std::to_string(config.forget_total) +
                     " exceeds dataset size " + std::to_string(n));
  }
  if (config.forget_requests < 0 || (config.forget_total > 0 && config.forget_requests == 0)) {
    throw InputError("forget_requests must be positive when forget_total > 0");
  }

  RequestStream stream;
  stream.config = config;
  stream.feature_dim = dataset.feature_dim();
  stream.class_count = dataset.class_count();

  const auto& ids = dataset.ids();
  std::size_t offset = 0;
  for (const auto size : chunk_sizes(n, static_cast<std::size_t>(config.learn_chunks))) {
    stream.learn_requests.push_back(
        dataset.select(std::span<const SampleId>(ids.data() + offset, size)));
    offset += size;
  }

  std::vector<SampleId> pool = ids;
  Rng rng(derive_seed(config.seed, "forget-sampling"));
  rng.shuffle(std::span<SampleId>(pool));
  offset = 0;
  if (config.forget_requests > 0) {
    for (const auto size :
         chunk_sizes(config.forget_total, static_cast<std::size_t>(config.forget_requests))) {
      stream.forget_requests.push_back(
          dataset.select(std::span<const SampleId>(pool.data() + offset, size)));
      offset += size;
    }
  }
  return stream;
}

Session::Session(Index feature_dim, Index class_count, double gamma)
    : state_{TrackingMatrix::initial(feature_dim, gamma), AnalyticModel::zero(feature_dim, class_count, gamma)} {}

Session::Session(AnalyticState state, SampleLedger ledger, std::size_t completed_requests)
    : state_(std::move(state)), ledger_(std::move(ledger)), completed_(completed_requests) {}

void Session::learn(const FeatureBatch& batch) {
  ledger_.check_learn(batch.sample_ids());
  auto next = learn_update(state_.tracking, state_.model, batch);
  ledger_.record_learned(batch.sample_ids());
  state_ = std::move(next);
  ++completed_;
}

void Session::forget(const FeatureBatch& batch) {
  ledger_.check_forget(batch.sample_ids());
  auto next = unlearn_update(state_, batch);
  ledger_.record_forgotten(batch.sample_ids());
  state_ = std::move(next);
  ++completed_;
}

const char* to_string(RequestKind kind) { return kind == RequestKind::learn ? "learn" : "forget"; }

std::vector<GapReport> RunRecord::gap_reports() const {
  std::vector<GapReport> out;
  for (const auto& e : per_request) {
    if (e.gap) out.push_back(*e.gap);
  }
  return out;
}

double RunRecord::time_for(RequestKind kind) const {
  double total = 0.0;
  for (const auto& e : per_request) {
    if (e.kind == kind) total += e.wall_time_seconds;
  }
  return total;
}

RequestFailed::RequestFailed(std::size_t request_index, std::exception_ptr cause, const std::string& what)
    : std::runtime_error(what), index_(request_index), cause_(std::move(cause)) {}

RunRecord run_stream(Session& session, const RequestStream& stream, const RunOptions& options,
                     const VerifyContext& verify) {
  stream.validate();
  if (session.model().feature_dim() != stream.feature_dim ||
      session.model().class_count() != stream.class_count) {
    throw ContractViolation("session and stream dimensions differ");
  }
  if (options.verify_every < 0) {
    throw InputError("verify_every must be non-negative");
  }
  if (options.verify_every > 0 && (verify.dataset == nullptr || verify.test_rows == nullptr)) {
    throw ContractViolation("verification requested without dataset and test rows");
  }

  RunRecord record;
  record.gamma = session.gamma();
  record.verify_every = options.verify_every;
  record.stream = stream.config;

  const std::size_t learn_count = stream.learn_requests.size();
  const std::size_t end = std::min(stream.size(), options.stop_after.value_or(stream.size()));
  for (std::size_t index = session.completed_requests(); index < end; ++index) {
    const bool is_learn = index < learn_count;
    const auto& batch = is_learn ? stream.learn_requests[index] : stream.forget_requests[index - learn_count];
    double elapsed = 0.0;
    try {
      const auto start = Clock::now();
      if (is_learn) {
        session.learn(batch);
      } else {
        session.forget(batch);
      }
      if (options.time) elapsed = seconds_since(start);
    } catch (const std::exception& e) {
      throw RequestFailed(index, std::current_exception(),
                          "request " + std::to_string(index) + " failed: " + e.what());
    }

    RunRecord::Entry entry{index, is_learn ? RequestKind::learn : RequestKind::forget,
                           static_cast<std::size_t>(batch.size()), elapsed, std::nullopt};
    if (!is_learn && options.verify_every > 0) {
      const auto forget_number = static_cast<int>(index - learn_count + 1);
      if (forget_number % options.verify_every == 0) {
        entry.gap = gap_report(session.model(), *verify.dataset, session.ledger(), *verify.test_rows,
                               forget_number);
      }
    }
    record.cumulative_time_seconds += elapsed;
    record.per_request.push_back(std::move(entry));
  }
  return record;
}

RunRecord run_stream(const RequestStream& stream, double gamma, const RunOptions& options,
                     const VerifyContext& verify) {
  Session session(stream.feature_dim, stream.class_count, gamma);
  return run_stream(session, stream, options, verify);
}

std::vector<BenchRow> bench_scaling(const BenchConfig& config) {
  if (config.repeats < 0 || config.warmup < 0) {
    throw InputError("repeats and warmup must be non-negative");
  }
  if (config.feature_dim <= 0 || config.input_dim <= 0 || config.class_count <= 0) {
    throw InputError("bench dimensions must be positive");
  }
  std::vector<BenchRow> rows;
  if (config.repeats == 0) return rows;

  const FeatureExtractor extractor(derive_seed(config.seed, "extractor"), config.input_dim,
                                   config.feature_dim);
  for (const auto n : config.sizes) {
    if (n == 0 || config.forget_size > n) {
      throw InputError("bench: forget_size must not exceed N, and N must be positive");
    }
    SyntheticSpec spec;
    spec.class_count = config.class_count;
    spec.samples_per_class =
        static_cast<int>((n + static_cast<std::size_t>(config.class_count) - 1) /
                         static_cast<std::size_t>(config.class_count));
    spec.input_dim = config.input_dim;
    spec.seed = derive_seed(config.seed, "bench-data");
    const auto full = encode(extractor, generate_synthetic(spec));

    Rng rng(derive_seed(config.seed ^ n, "bench-sampling"));
    std::vector<SampleId> ids = full.ids();
    rng.shuffle(std::span<SampleId>(ids));
    ids.resize(n);
    const auto dataset = full.subset(ids);
    const auto fitted = joint_fit(dataset.as_batch(), config.gamma);

    std::vector<double> times;
    for (int rep = 0; rep < config.warmup + config.repeats; ++rep) {
      rng.shuffle(std::span<SampleId>(ids));
      const auto forget = dataset.select(std::span<const SampleId>(ids.data(), config.forget_size));
      const auto start = Clock::now();
      const auto updated = unlearn_update(fitted, forget);
      const double elapsed = seconds_since(start);
      if (rep >= config.warmup) times.push_back(elapsed);
    }
    const double mean = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
    double var = 0.0;
    for (const double t : times) var += (t - mean) * (t - mean);
    const double stddev = times.size() > 1 ? std::sqrt(var / static_cast<double>(times.size() - 1)) : 0.0;
    rows.push_back({n, config.forget_size, mean, stddev, config.repeats});
  }
  return rows;
}

void write_bench_csv(std::ostream& out, std::span<const BenchRow> rows) {
  out << "n,forget_size,mean_seconds,stddev_seconds,repeats\n";
  for (const auto& r : rows) {
    out << r.retained_size << ',' << r.forget_size << ',' << format_double(r.mean_seconds) << ','
        << format_double(r.stddev_seconds) << ',' << r.repeats << '\n';
  }
}

void write_timing_csv(std::ostream& out, const RunRecord& record) {
  out << "request,kind,batch_size,wall_time_seconds,cumulative_seconds\n";
  double cumulative = 0.0;
  for (const auto& e : record.per_request) {
    cumulative += e.wall_time_seconds;
    out << e.request_index << ',' << to_string(e.kind) << ',' << e.batch_size << ','
        << format_double(e.wall_time_seconds) << ',' << format_double(cumulative) << '\n';
  }
}

}  // namespace unlearn
