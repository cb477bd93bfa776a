#pragma once

// Lossless session snapshots.
//
// File layout (all integers little-endian):
//   8 bytes   magic "ULRNSTAT"
//   u32       format version
//   u64       header length L
//   L bytes   JSON header (version, dims, gamma, extractor, counts, run metadata)
//   payload   W (d_F x d_C, row-major f64), T (d_F x d_F, row-major f64),
//             regularized Gram (d_F x d_F, row-major f64),
//             learned ids (u64), forgotten ids (u64)
//   u32       CRC-32 of every preceding byte

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "unlearn/features.hpp"
#include "unlearn/harness.hpp"

namespace unlearn {

inline constexpr std::uint32_t kStateFormatVersion = 1;

struct ExtractorConfig {
  std::uint64_t seed = 0;
  Index input_dim = 0;
  Index feature_dim = 0;
  Nonlinearity nonlinearity = Nonlinearity::relu;

  FeatureExtractor build() const { return FeatureExtractor(seed, input_dim, feature_dim, nonlinearity); }
  friend bool operator==(const ExtractorConfig&, const ExtractorConfig&) = default;
};

/// How the CLI built the stream, so a later `resume` or `verify` can rebuild it.
struct RunMetadata {
  std::uint64_t seed = 0;
  double test_fraction = 0.0;
  StreamConfig stream;
};

struct PersistedState {
  std::uint32_t format_version = kStateFormatVersion;
  double gamma = kDefaultGamma;
  Index feature_dim = 0;
  Index class_count = 0;
  std::optional<ExtractorConfig> extractor;  // absent for pre-extracted features
  Matrix weights;
  Matrix tracking;
  Matrix regularized_gram;
  SampleLedger ledger;
  std::size_t completed_requests = 0;
  std::optional<RunMetadata> run;
  std::uint32_t checksum = 0;  // as read from disk; ignored when saving

  static PersistedState capture(const Session& session);
  Session to_session() const;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize_state(const PersistedState& state);
/// Throws IntegrityError on bad magic, truncation or checksum mismatch, and
/// VersionError on an unknown format version.
PersistedState deserialize_state(std::span<const std::uint8_t> bytes);

/// Writes to a temporary sibling and renames, so readers never see a partial file.
void save_state(const std::filesystem::path& path, const PersistedState& state);
PersistedState load_state(const std::filesystem::path& path);

}  // namespace unlearn
