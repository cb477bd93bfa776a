// unlearn: command-line driver for exact continual unlearning experiments.
//
//   unlearn gen-data --classes 10 --per-class 500 --input-dim 32 --out data.csv
//   unlearn run      --data data.csv --requests 25 --verify-every 1 --out gaps.csv --state s.bin
//   unlearn verify   --state s.bin --data data.csv
//   unlearn resume   --state s.bin --data data.csv
//   unlearn bench    --sizes 1000,10000 --forget-size 100 --dfeat 64 --repeats 20
//
// Exit codes: 0 success, 1 contract/input errors, 2 integrity errors.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "unlearn/analytic.hpp"
#include "unlearn/csv.hpp"
#include "unlearn/errors.hpp"
#include "unlearn/features.hpp"
#include "unlearn/harness.hpp"
#include "unlearn/persistence.hpp"
#include "unlearn/random.hpp"
#include "unlearn/verify.hpp"

namespace {

using namespace unlearn;

struct DataOptions {
  std::string data;
  std::string test;
  double test_fraction = 0.2;
  Index dfeat = 64;
  std::string nonlinearity = "relu";
  int classes = 0;
};

struct LoadedData {
  EncodedDataset train;
  EncodedDataset test;
  std::optional<ExtractorConfig> extractor;
};

EncodedDataset encode_table(const CsvTable& table, int class_count,
                            const std::optional<ExtractorConfig>& extractor) {
  if (table.mode == CsvMode::features) {
    return EncodedDataset(table.ids, table.values, table.labels, class_count);
  }
  if (!extractor) {
    throw InputError("raw-input CSV needs an extractor configuration");
  }
  if (table.values.cols() != extractor->input_dim) {
    throw InputError("CSV has " + std::to_string(table.values.cols()) +
                     " input columns, extractor expects " + std::to_string(extractor->input_dim));
  }
  RawDataset raw{table.ids, table.values, table.labels, class_count};
  return encode(extractor->build(), raw);
}

// Reads the training CSV (and optional test CSV), encodes raw inputs through
// the extractor, and carves out a seeded test split when no test file is given.
LoadedData load_data(const DataOptions& opts, std::uint64_t seed,
                     std::optional<ExtractorConfig> extractor, std::optional<Index> expected_class_count) {
  const auto table = read_dataset_csv(opts.data);
  std::optional<CsvTable> test_table;
  if (!opts.test.empty()) test_table = read_dataset_csv(opts.test);

  int class_count = std::max(opts.classes, table.inferred_class_count());
  if (test_table) class_count = std::max(class_count, test_table->inferred_class_count());
  if (expected_class_count) {
    if (class_count > *expected_class_count) {
      throw InputError("data has more classes than the saved model");
    }
    class_count = static_cast<int>(*expected_class_count);
  }
  if (class_count <= 0) throw InputError("dataset is empty");

  if (table.mode == CsvMode::raw && !extractor) {
    extractor = ExtractorConfig{derive_seed(seed, "extractor"), table.values.cols(), opts.dfeat,
                                parse_nonlinearity(opts.nonlinearity)};
  }
  if (table.mode == CsvMode::features) extractor.reset();
  if (test_table && test_table->mode != table.mode) {
    throw InputError("data and test CSV use different column modes");
  }

  auto all = encode_table(table, class_count, extractor);
  if (test_table) {
    return {std::move(all), encode_table(*test_table, class_count, extractor), extractor};
  }
  if (!(opts.test_fraction > 0.0 && opts.test_fraction < 1.0)) {
    throw InputError("--test-fraction must be in (0, 1) when no --test file is given");
  }
  std::vector<SampleId> shuffled = all.ids();
  Rng rng(derive_seed(seed, "test-split"));
  rng.shuffle(std::span<SampleId>(shuffled));
  const auto n_test = static_cast<std::size_t>(std::llround(opts.test_fraction * static_cast<double>(shuffled.size())));
  const std::set<SampleId> test_ids(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<SampleId> train_ids;
  std::vector<SampleId> test_order;
  for (const auto id : all.ids()) (test_ids.contains(id) ? test_order : train_ids).push_back(id);
  return {all.subset(train_ids), all.subset(test_order), extractor};
}

void write_file(const std::string& path, const auto& writer) {
  if (path.empty() || path == "-") {
    writer(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  writer(out);
}

void print_summary(const RunRecord& record, const Session& session) {
  const auto gaps = record.gap_reports();
  double worst = 0.0;
  for (const auto& g : gaps) worst = std::max(worst, g.max_delta());
  std::cerr << "requests completed: " << session.completed_requests() << "\n"
            << "learn time (s):     " << record.time_for(RequestKind::learn) << "\n"
            << "forget time (s):    " << record.time_for(RequestKind::forget) << "\n"
            << "retained samples:   " << session.ledger().retained_count() << "\n";
  if (!gaps.empty()) std::cerr << "max gap over " << gaps.size() << " reports: " << worst << "\n";
}

struct RunFlags {
  DataOptions data;
  double gamma = kDefaultGamma;
  int learn_chunks = 8;
  std::size_t forget_total = 1000;
  int requests = 5;
  std::uint64_t seed = 0;
  int verify_every = 0;
  std::string out;
  std::string state;
  std::string timing;
  std::optional<std::size_t> stop_after;
};

// Runs the stream and always persists the session (even after a failed
// request) when a state path was given.
int execute(Session& session, const LoadedData& loaded, const RequestStream& stream, const RunFlags& flags,
            const PersistedState& base) {
  RunOptions options;
  options.verify_every = flags.verify_every;
  options.stop_after = flags.stop_after;
  auto persist = [&] {
    if (flags.state.empty()) return;
    auto snapshot = PersistedState::capture(session);
    snapshot.extractor = base.extractor;
    snapshot.run = base.run;
    save_state(flags.state, snapshot);
  };
  RunRecord record;
  try {
    record = run_stream(session, stream, options, VerifyContext{&loaded.train, &loaded.test});
  } catch (const RequestFailed& e) {
    std::cerr << "error: " << e.what() << "\n";
    persist();
    e.rethrow_cause();
  }
  persist();
  if (flags.verify_every > 0) {
    const auto gaps = record.gap_reports();
    write_file(flags.out, [&](std::ostream& os) { write_gap_csv(os, gaps); });
  }
  if (!flags.timing.empty()) {
    write_file(flags.timing, [&](std::ostream& os) { write_timing_csv(os, record); });
  }
  print_summary(record, session);
  return 0;
}

void add_data_flags(CLI::App* cmd, DataOptions& d, bool with_encoding) {
  cmd->add_option("--data", d.data, "dataset CSV (id,label,f*|x*)")->required();
  cmd->add_option("--test", d.test, "held-out CSV; default is a seeded split of --data");
  cmd->add_option("--test-fraction", d.test_fraction, "fraction held out when --test is absent");
  cmd->add_option("--classes", d.classes, "class count (default: max label + 1)");
  if (with_encoding) {
    cmd->add_option("--dfeat", d.dfeat, "feature dimension for raw-input CSVs");
    cmd->add_option("--nonlinearity", d.nonlinearity, "relu or identity");
  }
}

int cmd_run(const RunFlags& flags) {
  const auto loaded = load_data(flags.data, flags.seed, std::nullopt, std::nullopt);
  const StreamConfig config{flags.learn_chunks, flags.forget_total, flags.requests,
                            derive_seed(flags.seed, "stream")};
  const auto stream = build_stream(loaded.train, config);
  Session session(loaded.train.feature_dim(), loaded.train.class_count(), flags.gamma);
  PersistedState base;
  base.extractor = loaded.extractor;
  base.run = RunMetadata{flags.seed, flags.data.test.empty() ? flags.data.test_fraction : 0.0, config};
  return execute(session, loaded, stream, flags, base);
}

int cmd_resume(RunFlags flags) {
  const auto saved = load_state(flags.state);
  if (!saved.run) throw InputError("state file carries no run metadata; cannot rebuild the stream");
  flags.seed = saved.run->seed;
  if (flags.data.test.empty()) flags.data.test_fraction = saved.run->test_fraction;
  const auto loaded = load_data(flags.data, flags.seed, saved.extractor, saved.class_count);
  if (loaded.train.feature_dim() != saved.feature_dim) {
    throw InputError("data feature dimension does not match the saved state");
  }
  const auto stream = build_stream(loaded.train, saved.run->stream);
  auto session = saved.to_session();
  return execute(session, loaded, stream, flags, saved);
}

int cmd_verify(const std::string& state_path, DataOptions data, const std::string& out) {
  const auto saved = load_state(state_path);
  std::uint64_t seed = 0;
  if (saved.run) {
    seed = saved.run->seed;
    if (data.test.empty()) data.test_fraction = saved.run->test_fraction;
  }
  const auto loaded = load_data(data, seed, saved.extractor, saved.class_count);
  const auto session = saved.to_session();
  const int learn_requests = saved.run ? saved.run->stream.learn_chunks : 0;
  const int forget_index = std::max(0, static_cast<int>(saved.completed_requests) - learn_requests);
  const auto report = gap_report(session.model(), loaded.train, session.ledger(), loaded.test, forget_index);
  write_file(out, [&](std::ostream& os) { write_gap_csv(os, std::span<const GapReport>(&report, 1)); });
  return 0;
}

int cmd_bench(const BenchConfig& config, const std::string& out) {
  const auto rows = bench_scaling(config);
  write_file(out, [&](std::ostream& os) { write_bench_csv(os, rows); });
  return 0;
}

int cmd_gen(const SyntheticSpec& spec, std::uint64_t draw, Index dfeat, const std::string& nonlinearity,
            const std::string& out) {
  const auto raw = generate_synthetic(spec, draw);
  if (dfeat > 0) {
    const FeatureExtractor extractor(derive_seed(spec.seed, "extractor"), spec.input_dim, dfeat,
                                     parse_nonlinearity(nonlinearity));
    const auto encoded = encode(extractor, raw);
    write_file(out, [&](std::ostream& os) {
      write_dataset_csv(os, CsvMode::features, encoded.ids(), encoded.labels(), encoded.features());
    });
  } else {
    write_file(out, [&](std::ostream& os) { write_dataset_csv(os, CsvMode::raw, raw.ids, raw.labels, raw.inputs); });
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact continual unlearning for closed-form ridge classifiers"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  SyntheticSpec gen_spec;
  std::uint64_t gen_draw = 0;
  Index gen_dfeat = 0;
  std::string gen_nonlinearity = "relu";
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "write a synthetic Gaussian-cluster dataset as CSV");
  gen->add_option("--classes", gen_spec.class_count)->check(CLI::PositiveNumber);
  gen->add_option("--per-class", gen_spec.samples_per_class)->check(CLI::PositiveNumber);
  gen->add_option("--input-dim", gen_spec.input_dim)->check(CLI::PositiveNumber);
  gen->add_option("--spread", gen_spec.cluster_spread)->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", gen_spec.seed);
  gen->add_option("--draw", gen_draw, "independent noise draw (held-out sets use draw >= 1)");
  gen->add_option("--dfeat", gen_dfeat, "emit extracted features (f*) of this dimension instead of raw x*");
  gen->add_option("--nonlinearity", gen_nonlinearity);
  gen->add_option("--out", gen_out, "output CSV (default stdout)");

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "learn the data, then process forget requests");
  add_data_flags(run, run_flags.data, true);
  run->add_option("--gamma", run_flags.gamma)->check(CLI::PositiveNumber);
  run->add_option("--learn-chunks", run_flags.learn_chunks)->check(CLI::PositiveNumber);
  run->add_option("--forget-total", run_flags.forget_total);
  run->add_option("--requests", run_flags.requests)->check(CLI::NonNegativeNumber);
  run->add_option("--seed", run_flags.seed);
  run->add_option("--verify-every", run_flags.verify_every)->check(CLI::NonNegativeNumber);
  run->add_option("--out", run_flags.out, "gap report CSV (default stdout)");
  run->add_option("--state", run_flags.state, "write the final session state here");
  run->add_option("--timing", run_flags.timing, "per-request timing CSV");
  run->add_option("--stop-after", run_flags.stop_after, "stop after this many stream requests");

  RunFlags resume_flags;
  auto* resume = app.add_subcommand("resume", "continue a saved run where it stopped");
  add_data_flags(resume, resume_flags.data, false);
  resume->add_option("--state", resume_flags.state)->required();
  resume->add_option("--verify-every", resume_flags.verify_every)->check(CLI::NonNegativeNumber);
  resume->add_option("--out", resume_flags.out);
  resume->add_option("--timing", resume_flags.timing);
  resume->add_option("--stop-after", resume_flags.stop_after);

  std::string verify_state;
  std::string verify_out;
  DataOptions verify_data;
  auto* verify = app.add_subcommand("verify", "compare a saved model with the re-training oracle");
  add_data_flags(verify, verify_data, false);
  verify->add_option("--state", verify_state)->required();
  verify->add_option("--out", verify_out);

  BenchConfig bench_config;
  bench_config.sizes = {1000, 10000};
  std::string bench_out;
  auto* bench = app.add_subcommand("bench", "time single forget requests across retained-set sizes");
  bench->add_option("--sizes", bench_config.sizes)->delimiter(',');
  bench->add_option("--forget-size", bench_config.forget_size);
  bench->add_option("--dfeat", bench_config.feature_dim)->check(CLI::PositiveNumber);
  bench->add_option("--repeats", bench_config.repeats)->check(CLI::NonNegativeNumber);
  bench->add_option("--gamma", bench_config.gamma)->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_config.seed);
  bench->add_option("--out", bench_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen(gen_spec, gen_draw, gen_dfeat, gen_nonlinearity, gen_out);
    if (*run) return cmd_run(run_flags);
    if (*resume) return cmd_resume(resume_flags);
    if (*verify) return cmd_verify(verify_state, verify_data, verify_out);
    if (*bench) return cmd_bench(bench_config, bench_out);
  } catch (const IntegrityError& e) {
    std::cerr << "integrity error: " << e.what() << "\n";
    return 2;
  } catch (const StateIntegrityError& e) {
    std::cerr << "integrity error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
