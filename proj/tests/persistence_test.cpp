#include "unlearn/persistence.hpp"

#include <cstring>
#include <fstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "unlearn/errors.hpp"

namespace unlearn {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("unlearn_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const char* name) const { return path_ / name; }

 private:
  fs::path path_;
};

struct Fixture {
  EncodedDataset dataset;
  RequestStream stream;
};

Fixture fixture(std::uint64_t seed) {
  const SyntheticSpec spec{.class_count = 5, .samples_per_class = 40, .input_dim = 12, .seed = seed};
  auto ds = encode(FeatureExtractor(derive_seed(seed, "extractor"), 12, 24), generate_synthetic(spec));
  auto stream = build_stream(ds, {.learn_chunks = 5, .forget_total = 100, .forget_requests = 10, .seed = seed});
  return {std::move(ds), std::move(stream)};
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

TEST(Crc32, KnownVector) {
  const std::string text = "123456789";
  EXPECT_EQ(crc32({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()}), 0xCBF43926U);
}

TEST(Persistence, FreshStateRoundTrip) {
  TempDir dir;
  const Session session(6, 3, 0.25);
  auto state = PersistedState::capture(session);
  state.extractor = ExtractorConfig{42, 12, 6, Nonlinearity::identity};
  save_state(dir / "fresh.state", state);
  const auto loaded = load_state(dir / "fresh.state");
  EXPECT_EQ(loaded.gamma, 0.25);
  EXPECT_EQ(loaded.weights, state.weights);
  EXPECT_EQ(loaded.tracking, state.tracking);
  EXPECT_EQ(loaded.extractor, state.extractor);
  EXPECT_EQ(loaded.ledger, state.ledger);
  EXPECT_FALSE(loaded.run.has_value());
  EXPECT_EQ(serialize_state(loaded), serialize_state(state));
}

TEST(Persistence, MidRunRoundTripIsBitIdentical) {
  TempDir dir;
  const auto fx = fixture(3);
  Session session(24, 5, kDefaultGamma);
  run_stream(session, fx.stream, {.stop_after = 8});
  auto state = PersistedState::capture(session);
  state.run = RunMetadata{3, 0.2, fx.stream.config};
  save_state(dir / "mid.state", state);
  const auto loaded = load_state(dir / "mid.state");
  EXPECT_EQ(testing::content_hash(loaded.weights), testing::content_hash(session.model().weights()));
  EXPECT_EQ(testing::content_hash(loaded.tracking), testing::content_hash(session.tracking().matrix()));
  EXPECT_EQ(loaded.regularized_gram, session.tracking().regularized_gram());
  EXPECT_EQ(loaded.ledger, session.ledger());
  EXPECT_EQ(loaded.completed_requests, 8U);
  ASSERT_TRUE(loaded.run.has_value());
  EXPECT_EQ(loaded.run->stream.forget_requests, 10);
  EXPECT_EQ(loaded.run->test_fraction, 0.2);
}

TEST(Persistence, SplitRunMatchesStraightRun) {
  TempDir dir;
  const auto fx = fixture(4);
  // 5 learn + 10 forget requests; split after 10, then finish the last 5.
  Session straight(24, 5, kDefaultGamma);
  run_stream(straight, fx.stream, {});

  Session first(24, 5, kDefaultGamma);
  run_stream(first, fx.stream, {.stop_after = 10});
  save_state(dir / "split.state", PersistedState::capture(first));
  auto resumed = load_state(dir / "split.state").to_session();
  run_stream(resumed, fx.stream, {});

  EXPECT_EQ(resumed.completed_requests(), 15U);
  EXPECT_EQ(resumed.model().weights(), straight.model().weights());
  EXPECT_EQ(resumed.tracking().matrix(), straight.tracking().matrix());
  EXPECT_EQ(resumed.ledger(), straight.ledger());
}

TEST(Persistence, TruncatedFileIsIntegrityError) {
  TempDir dir;
  const auto fx = fixture(5);
  Session session(24, 5, kDefaultGamma);
  run_stream(session, fx.stream, {.stop_after = 6});
  save_state(dir / "full.state", PersistedState::capture(session));
  const auto bytes = read_bytes(dir / "full.state");
  for (const std::size_t keep : {std::size_t{0}, std::size_t{5}, std::size_t{12}, std::size_t{30}, bytes.size() / 2,
                                 bytes.size() - 1}) {
    write_bytes(dir / "cut.state", {bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(keep)});
    EXPECT_THROW(load_state(dir / "cut.state"), IntegrityError) << "kept " << keep << " bytes";
  }
}

TEST(Persistence, FlippedByteFailsChecksum) {
  TempDir dir;
  save_state(dir / "ok.state", PersistedState::capture(Session(4, 2, 1.0)));
  auto bytes = read_bytes(dir / "ok.state");
  bytes[bytes.size() - 40] ^= 0x01;
  write_bytes(dir / "bad.state", bytes);
  try {
    load_state(dir / "bad.state");
    FAIL() << "expected IntegrityError";
  } catch (const VersionError&) {
    FAIL() << "checksum failure must not be reported as a version error";
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos) << e.what();
  }
}

TEST(Persistence, BadMagicIsIntegrityError) {
  auto bytes = serialize_state(PersistedState::capture(Session(3, 2, 1.0)));
  bytes[0] = 'X';
  EXPECT_THROW(deserialize_state(bytes), IntegrityError);
}

TEST(Persistence, VersionMismatchIsVersionError) {
  auto bytes = serialize_state(PersistedState::capture(Session(3, 2, 1.0)));
  const std::uint32_t future = kStateFormatVersion + 1;
  std::memcpy(bytes.data() + 8, &future, sizeof future);
  EXPECT_THROW(deserialize_state(bytes), VersionError);
}

TEST(Persistence, MissingFileIsInputError) {
  EXPECT_THROW(load_state("/nonexistent/dir/none.state"), InputError);
}

}  // namespace
}  // namespace unlearn
