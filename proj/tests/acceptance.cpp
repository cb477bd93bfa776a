// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "unlearn/analytic.hpp"
#include "unlearn/features.hpp"
#include "unlearn/harness.hpp"
#include "unlearn/persistence.hpp"
#include "unlearn/random.hpp"
#include "unlearn/verify.hpp"

namespace {

using namespace unlearn;
using testing::content_hash;
using testing::dense_tracking;
using testing::naive_regularized_gram;
using testing::qr_ridge_solve;
using testing::random_matrix;
using testing::rel_frobenius;

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool ok;
  std::string detail;
};

struct Criterion {
  const char* name;
  double time_limit_seconds;  // <= 0: no limit
  std::function<Outcome()> check;
};

std::string fmt(const char* format, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

struct Split {
  EncodedDataset train;
  EncodedDataset test;
};

Split synthetic_split(std::uint64_t seed, int classes, int train_per_class, int test_per_class, Index input_dim,
                      Index dfeat, double spread = 1.0) {
  const FeatureExtractor ex(derive_seed(seed, "extractor"), input_dim, dfeat);
  SyntheticSpec spec{.class_count = classes,
                     .samples_per_class = train_per_class,
                     .input_dim = input_dim,
                     .cluster_spread = spread,
                     .seed = seed};
  auto train = encode(ex, generate_synthetic(spec, 0));
  spec.samples_per_class = test_per_class;
  auto test = encode(ex, generate_synthetic(spec, 1));
  return {std::move(train), std::move(test)};
}

// Rows of the dataset whose id is retained by the ledger, in dataset order.
FeatureBatch retained_rows(const EncodedDataset& ds, const SampleLedger& ledger) {
  std::vector<SampleId> ids;
  for (const auto id : ds.ids())
    if (ledger.is_retained(id)) ids.push_back(id);
  return ds.select(ids);
}

double tracking_identity_error(const TrackingMatrix& t, const FeatureBatch& retained, double gamma) {
  const Matrix product = t.matrix() * naive_regularized_gram(retained.features(), gamma);
  return (product - Matrix::Identity(product.rows(), product.cols())).cwiseAbs().maxCoeff();
}

// --- criteria --------------------------------------------------------------

Outcome exactness_desk_scale() {
  double worst = 0;
  std::size_t reports = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto data = synthetic_split(seed, 10, 400, 100, 32, 64);
    const auto stream = build_stream(
        data.train, {.learn_chunks = 8, .forget_total = 1000, .forget_requests = 25, .seed = derive_seed(seed, "stream")});
    const auto record = run_stream(stream, kDefaultGamma, {.verify_every = 1}, {&data.train, &data.test});
    for (const auto& r : record.gap_reports()) {
      worst = std::max(worst, r.max_delta());
      ++reports;
    }
  }
  return {reports == 500 && worst <= 1e-6,
          fmt("%.0f reports over 20 seeds, max delta %.3g (limit 1e-6)", static_cast<double>(reports), worst)};
}

struct MicroResult {
  double worst_weights = 0;
  double worst_tracking = 0;
  int checks = 0;
};

MicroResult micro_instances() {
  MicroResult out;
  Rng rng(derive_seed(2024, "micro"));
  for (int instance = 0; instance < 100; ++instance) {
    const Index dfeat = 2 + static_cast<Index>(rng.below(15));  // <= 16
    const int classes = 2 + static_cast<int>(rng.below(5));
    const int per_class = 10 + static_cast<int>(rng.below(static_cast<std::uint64_t>(200 / classes - 9)));
    const auto data = synthetic_split(rng.below(1u << 30), classes, per_class, 1, 8, dfeat);
    const auto n = static_cast<std::size_t>(data.train.size());  // <= 200
    const int k = 1 + static_cast<int>(rng.below(5));
    const std::size_t forget_total = static_cast<std::size_t>(k) + rng.below(n / 2);
    const auto stream = build_stream(data.train, {.learn_chunks = 1 + static_cast<int>(rng.below(4)),
                                                  .forget_total = forget_total,
                                                  .forget_requests = k,
                                                  .seed = rng.below(1u << 30)});
    Session session(dfeat, classes, kDefaultGamma);
    for (std::size_t i = 0; i < stream.size(); ++i) {
      run_stream(session, stream, {.time = false, .stop_after = i + 1});
      const auto retained = retained_rows(data.train, session.ledger());
      out.worst_tracking =
          std::max(out.worst_tracking, tracking_identity_error(session.tracking(), retained, kDefaultGamma));
      if (i >= stream.learn_requests.size()) {
        const Matrix reference = qr_ridge_solve(retained.features(), retained.labels(), kDefaultGamma);
        out.worst_weights = std::max(out.worst_weights, rel_frobenius(session.model().weights(), reference));
      }
      ++out.checks;
    }
  }
  return out;
}

MicroResult& micro_cache() {
  static MicroResult result = micro_instances();
  return result;
}

Outcome exactness_micro() {
  const auto& r = micro_cache();
  return {r.worst_weights <= 1e-8,
          fmt("100 instances, max relative W error %.3g (limit 1e-8)", r.worst_weights)};
}

Outcome tracking_identity() {
  const auto& r = micro_cache();
  // The desk-scale streams are covered too: re-run one seed and check every update.
  double worst = r.worst_tracking;
  const auto data = synthetic_split(7, 10, 400, 1, 32, 64);
  const auto stream = build_stream(data.train, {.learn_chunks = 8, .forget_total = 1000, .forget_requests = 25, .seed = 7});
  Session session(64, 10, kDefaultGamma);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    run_stream(session, stream, {.time = false, .stop_after = i + 1});
    worst = std::max(worst, tracking_identity_error(session.tracking(), retained_rows(data.train, session.ledger()),
                                                    kDefaultGamma));
  }
  return {worst <= 1e-8, fmt("%.0f updates, max |T(G + gamma I) - I| %.3g (limit 1e-8)",
                             static_cast<double>(r.checks + static_cast<int>(stream.size())), worst)};
}

Outcome optimality() {
  Rng rng(derive_seed(11, "optimality"));
  double worst = 0;
  for (int instance = 0; instance < 20; ++instance) {
    const Index dfeat = 4 + static_cast<Index>(rng.below(29));
    const auto data = synthetic_split(rng.below(1u << 30), 2 + static_cast<int>(rng.below(8)),
                                      20 + static_cast<int>(rng.below(60)), 1, 16, dfeat);
    const auto batch = data.train.as_batch();
    const auto fit = joint_fit(batch, kDefaultGamma);
    const double f0 = objective_value(fit.model, batch);
    for (int dir = 0; dir < 20; ++dir) {
      Matrix u = random_matrix(rng, dfeat, batch.class_count());
      u /= u.norm();
      const double h = 1e-5;
      const double plus = objective_value(AnalyticModel(fit.model.weights() + h * u, kDefaultGamma), batch);
      const double minus = objective_value(AnalyticModel(fit.model.weights() - h * u, kDefaultGamma), batch);
      worst = std::max(worst, std::abs((plus - minus) / (2 * h)) / (1 + std::abs(f0)));
    }
  }
  return {worst <= 1e-5, fmt("400 directional derivatives, max relative %.3g (limit 1e-5)", worst)};
}

Outcome woodbury() {
  Rng rng(derive_seed(5, "woodbury"));
  double worst = 0;
  for (int instance = 0; instance < 50; ++instance) {
    const Index d = 1 + static_cast<Index>(rng.below(32));
    const Index m = 1 + static_cast<Index>(rng.below(8));
    const Matrix x = random_matrix(rng, d, d);
    const Matrix a = x * x.transpose() + static_cast<double>(d) * Matrix::Identity(d, d);
    const Matrix y = random_matrix(rng, m, m);
    const Matrix c = y * y.transpose() + static_cast<double>(m) * Matrix::Identity(m, m);
    const Matrix b = random_matrix(rng, d, m);
    const Matrix expected = (a + b * c * b.transpose()).fullPivLu().inverse();
    const Matrix got = woodbury_update(a.fullPivLu().inverse(), b, c, b.transpose());
    worst = std::max(worst, rel_frobenius(got, expected));
  }
  return {worst <= 1e-10, fmt("50 instances, max relative error %.3g (limit 1e-10)", worst)};
}

Outcome round_trip_and_order() {
  double worst_round_trip = 0;
  double worst_order = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto data = synthetic_split(derive_seed(seed, "round-trip"), 10, 100, 1, 32, 64);
    const auto stream =
        build_stream(data.train, {.learn_chunks = 2, .forget_total = 250, .forget_requests = 5, .seed = seed});
    const auto base = learn_update(TrackingMatrix::initial(64, kDefaultGamma), AnalyticModel::zero(64, 10, kDefaultGamma),
                                   stream.learn_requests[0]);
    const auto restored = unlearn_update(learn_update(base.tracking, base.model, stream.learn_requests[1]),
                                         stream.learn_requests[1]);
    worst_round_trip = std::max({worst_round_trip, rel_frobenius(restored.model.weights(), base.model.weights()),
                                 rel_frobenius(restored.tracking.matrix(), base.tracking.matrix())});

    const auto full = joint_fit(data.train.as_batch(), kDefaultGamma);
    std::vector<std::size_t> order{0, 1, 2, 3, 4};
    Rng rng(derive_seed(seed, "order"));
    rng.shuffle(std::span<std::size_t>(order));
    auto forward = full;
    auto permuted = full;
    for (std::size_t i = 0; i < 5; ++i) {
      forward = unlearn_update(forward, stream.forget_requests[i]);
      permuted = unlearn_update(permuted, stream.forget_requests[order[i]]);
    }
    worst_order = std::max(worst_order, rel_frobenius(permuted.model.weights(), forward.model.weights()));
  }
  return {worst_round_trip <= 1e-9 && worst_order <= 1e-8,
          fmt("20 seeds, round trip %.3g (limit 1e-9), order %.3g (limit 1e-8)", worst_round_trip, worst_order)};
}

Outcome n_independence() {
  const auto rows = bench_scaling(
      {.sizes = {1000, 10000}, .forget_size = 100, .feature_dim = 64, .repeats = 50, .warmup = 10, .seed = 1});
  const double ratio = rows[1].mean_seconds / rows[0].mean_seconds;
  return {ratio >= 0.5 && ratio <= 2.0,
          fmt("mean per-request %.3g s (N=1000) vs %.3g s (N=10000), ratio %.3f (allowed [0.5, 2])",
              rows[0].mean_seconds, rows[1].mean_seconds, ratio)};
}

Outcome request_count_robustness() {
  const auto data = synthetic_split(17, 10, 400, 1, 32, 64);
  const auto s25 = build_stream(data.train, {.learn_chunks = 8, .forget_total = 1000, .forget_requests = 25, .seed = 3});
  const auto s50 = build_stream(data.train, {.learn_chunks = 8, .forget_total = 1000, .forget_requests = 50, .seed = 3});
  double t25 = 0;
  double t50 = 0;
  run_stream(s25, kDefaultGamma, {});  // warm-up
  for (int rep = 0; rep < 5; ++rep) {
    t25 += run_stream(s25, kDefaultGamma, {}).time_for(RequestKind::forget);
    t50 += run_stream(s50, kDefaultGamma, {}).time_for(RequestKind::forget);
  }
  const double ratio = t50 / t25;
  return {ratio <= 2.5, fmt("forget time K=25 %.3g s, K=50 %.3g s, ratio %.3f (limit 2.5)", t25 / 5, t50 / 5, ratio)};
}

Outcome resumability() {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "unlearn_acceptance";
  fs::create_directories(dir);
  int identical = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto data = synthetic_split(derive_seed(seed, "resume"), 10, 100, 1, 32, 64);
    const auto stream =
        build_stream(data.train, {.learn_chunks = 4, .forget_total = 300, .forget_requests = 10, .seed = seed});
    Session straight(64, 10, kDefaultGamma);
    run_stream(straight, stream, {.time = false});

    Rng rng(derive_seed(seed, "split-point"));
    const std::size_t split = 1 + rng.below(stream.size() - 1);
    Session first(64, 10, kDefaultGamma);
    run_stream(first, stream, {.time = false, .stop_after = split});
    const auto path = dir / ("seed" + std::to_string(seed) + ".state");
    save_state(path, PersistedState::capture(first));
    auto resumed = load_state(path).to_session();
    run_stream(resumed, stream, {.time = false});
    if (resumed.model().weights() == straight.model().weights() &&
        content_hash(resumed.tracking().matrix()) == content_hash(straight.tracking().matrix())) {
      ++identical;
    }
  }
  fs::remove_all(dir);
  return {identical == 10, fmt("%.0f/10 split runs bit-identical to straight runs", identical)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"exactness-desk-scale", 60, exactness_desk_scale},
      {"exactness-micro", 5, exactness_micro},
      {"tracking-identity", 0, tracking_identity},
      {"optimality", 5, optimality},
      {"woodbury", 2, woodbury},
      {"round-trip-and-order", 10, round_trip_and_order},
      {"n-independence", 0, n_independence},
      {"request-count-robustness", 0, request_count_robustness},
      {"resumability", 0, resumability},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome outcome{false, ""};
    const auto start = Clock::now();
    try {
      outcome = c.check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    bool ok = outcome.ok;
    std::string timing = fmt(" [%.2f s", seconds);
    if (c.time_limit_seconds > 0) {
      timing += fmt(", limit %.0f s", c.time_limit_seconds);
      ok = ok && seconds < c.time_limit_seconds;
    }
    timing += "]";
    std::printf("%s %s: %s%s\n", ok ? "PASS" : "FAIL", c.name, outcome.detail.c_str(), timing.c_str());
    std::fflush(stdout);
    failures += ok ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
