#include "unlearn/persistence.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <string>
#include <system_error>

#include <zlib.h>

#include <json.hpp>

#include "unlearn/errors.hpp"

namespace unlearn {
namespace {

constexpr std::array<char, 8> kMagic = {'U', 'L', 'R', 'N', 'S', 'T', 'A', 'T'};

static_assert(std::numeric_limits<double>::is_iec559, "state files store IEEE-754 doubles");

class Writer {
 public:
  template <typename T>
  void put(T value) {
    auto bits = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
    bytes_.insert(bytes_.end(), bits.begin(), bits.end());
  }
  void put_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void put_matrix(const Matrix& m) {
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) put(m(r, c));
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::array<std::uint8_t, sizeof(T)> bits;
    std::memcpy(bits.data(), bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
    pos_ += sizeof(T);
    return std::bit_cast<T>(bits);
  }
  std::string_view get_bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string_view out(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return out;
  }
  Matrix get_matrix(Index rows, Index cols, const char* what) {
    need(static_cast<std::size_t>(rows * cols) * sizeof(double), what);
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) m(r, c) = get<double>(what);
    return m;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (n > bytes_.size() - pos_) {
      throw IntegrityError(std::string("state file truncated while reading ") + what);
    }
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

nlohmann::json header_json(const PersistedState& s) {
  nlohmann::json h;
  h["format_version"] = kStateFormatVersion;
  h["checksum"] = "crc32";
  h["byte_order"] = "little";
  h["gamma"] = s.gamma;
  h["feature_dim"] = s.feature_dim;
  h["class_count"] = s.class_count;
  if (s.extractor) {
    h["extractor"] = {{"seed", s.extractor->seed},
                      {"input_dim", s.extractor->input_dim},
                      {"feature_dim", s.extractor->feature_dim},
                      {"nonlinearity", to_string(s.extractor->nonlinearity)}};
  } else {
    h["extractor"] = nullptr;
  }
  h["learned_count"] = s.ledger.learned_ids().size();
  h["forgotten_count"] = s.ledger.forgotten_ids().size();
  h["completed_requests"] = s.completed_requests;
  if (s.run) {
    h["run"] = {{"seed", s.run->seed},
                {"test_fraction", s.run->test_fraction},
                {"learn_chunks", s.run->stream.learn_chunks},
                {"forget_total", s.run->stream.forget_total},
                {"forget_requests", s.run->stream.forget_requests},
                {"stream_seed", s.run->stream.seed}};
  } else {
    h["run"] = nullptr;
  }
  h["payload"] = {"weights", "tracking", "regularized_gram", "learned_ids", "forgotten_ids"};
  return h;
}

}  // namespace

PersistedState PersistedState::capture(const Session& session) {
  PersistedState s;
  s.gamma = session.gamma();
  s.feature_dim = session.model().feature_dim();
  s.class_count = session.model().class_count();
  s.weights = session.model().weights();
  s.tracking = session.tracking().matrix();
  s.regularized_gram = session.tracking().regularized_gram();
  s.ledger = session.ledger();
  s.completed_requests = session.completed_requests();
  return s;
}

Session PersistedState::to_session() const {
  return Session(AnalyticState{TrackingMatrix(tracking, regularized_gram, gamma), AnalyticModel(weights, gamma)},
                 ledger,
                 completed_requests);
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t off = 0; off < bytes.size(); off += kChunk) {
    const auto n = std::min(kChunk, bytes.size() - off);
    crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> serialize_state(const PersistedState& state) {
  if (state.weights.rows() != state.feature_dim || state.weights.cols() != state.class_count ||
      state.tracking.rows() != state.feature_dim || state.tracking.cols() != state.feature_dim ||
      state.regularized_gram.rows() != state.feature_dim || state.regularized_gram.cols() != state.feature_dim) {
    throw ContractViolation("serialize_state: matrix shapes disagree with recorded dimensions");
  }
  Writer w;
  w.put_bytes(std::string_view(kMagic.data(), kMagic.size()));
  w.put(kStateFormatVersion);
  const std::string header = header_json(state).dump();
  w.put(static_cast<std::uint64_t>(header.size()));
  w.put_bytes(header);
  w.put_matrix(state.weights);
  w.put_matrix(state.tracking);
  w.put_matrix(state.regularized_gram);
  for (const auto id : state.ledger.learned_ids()) w.put(static_cast<std::uint64_t>(id));
  for (const auto id : state.ledger.forgotten_ids()) w.put(static_cast<std::uint64_t>(id));
  w.put(crc32(w.bytes()));
  return std::move(w.bytes());
}

PersistedState deserialize_state(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.get_bytes(kMagic.size(), "magic");
  if (magic != std::string_view(kMagic.data(), kMagic.size())) {
    throw IntegrityError("not a state file (bad magic)");
  }
  const auto version = r.get<std::uint32_t>("format version");
  if (version != kStateFormatVersion) {
    throw VersionError("unsupported state format version " + std::to_string(version) +
                       " (expected " + std::to_string(kStateFormatVersion) + ")");
  }
  if (bytes.size() < sizeof(std::uint32_t) + kMagic.size() + sizeof(std::uint32_t)) {
    throw IntegrityError("state file truncated");
  }
  const auto body = bytes.first(bytes.size() - sizeof(std::uint32_t));
  Reader trailer(bytes.last(sizeof(std::uint32_t)));
  const auto stored_crc = trailer.get<std::uint32_t>("checksum");
  if (crc32(body) != stored_crc) {
    throw IntegrityError("state file checksum mismatch (corrupt or truncated)");
  }

  Reader in(body);
  in.get_bytes(kMagic.size(), "magic");
  in.get<std::uint32_t>("format version");
  const auto header_len = in.get<std::uint64_t>("header length");
  if (header_len > in.remaining()) {
    throw IntegrityError("state header length exceeds file size");
  }
  const auto header_text = in.get_bytes(static_cast<std::size_t>(header_len), "header");

  PersistedState s;
  try {
    const auto h = nlohmann::json::parse(header_text);
    if (h.at("format_version").get<std::uint32_t>() != version) {
      throw VersionError("header and prefix disagree on format version");
    }
    if (h.at("checksum").get<std::string>() != "crc32") {
      throw IntegrityError("unknown checksum algorithm");
    }
    s.format_version = version;
    s.checksum = stored_crc;
    s.gamma = h.at("gamma").get<double>();
    s.feature_dim = h.at("feature_dim").get<Index>();
    s.class_count = h.at("class_count").get<Index>();
    if (const auto& e = h.at("extractor"); !e.is_null()) {
      s.extractor = ExtractorConfig{e.at("seed").get<std::uint64_t>(), e.at("input_dim").get<Index>(),
                                    e.at("feature_dim").get<Index>(),
                                    parse_nonlinearity(e.at("nonlinearity").get<std::string>())};
    }
    s.completed_requests = h.at("completed_requests").get<std::size_t>();
    if (const auto& run = h.at("run"); !run.is_null()) {
      RunMetadata meta;
      meta.seed = run.at("seed").get<std::uint64_t>();
      meta.test_fraction = run.at("test_fraction").get<double>();
      meta.stream.learn_chunks = run.at("learn_chunks").get<int>();
      meta.stream.forget_total = run.at("forget_total").get<std::size_t>();
      meta.stream.forget_requests = run.at("forget_requests").get<int>();
      meta.stream.seed = run.at("stream_seed").get<std::uint64_t>();
      s.run = meta;
    }
    if (s.feature_dim <= 0 || s.class_count <= 0) {
      throw IntegrityError("state header has non-positive dimensions");
    }
    const auto learned_count = h.at("learned_count").get<std::size_t>();
    const auto forgotten_count = h.at("forgotten_count").get<std::size_t>();

    const auto d = s.feature_dim;
    const auto expected = static_cast<std::size_t>(d * s.class_count + 2 * d * d) * sizeof(double) +
                          (learned_count + forgotten_count) * sizeof(std::uint64_t);
    if (in.remaining() != expected) {
      throw IntegrityError("state payload size does not match header");
    }
    s.weights = in.get_matrix(d, s.class_count, "weights");
    s.tracking = in.get_matrix(d, d, "tracking matrix");
    s.regularized_gram = in.get_matrix(d, d, "regularized Gram matrix");
    std::set<SampleId> learned;
    std::set<SampleId> forgotten;
    for (std::size_t i = 0; i < learned_count; ++i) learned.insert(in.get<std::uint64_t>("learned ids"));
    for (std::size_t i = 0; i < forgotten_count; ++i) forgotten.insert(in.get<std::uint64_t>("forgotten ids"));
    if (learned.size() != learned_count || forgotten.size() != forgotten_count) {
      throw IntegrityError("state ledger contains duplicate ids");
    }
    s.ledger = SampleLedger::restore(std::move(learned), std::move(forgotten));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("malformed state header: ") + e.what());
  } catch (const ContractViolation& e) {
    throw IntegrityError(std::string("inconsistent state: ") + e.what());
  } catch (const InputError& e) {
    throw IntegrityError(std::string("inconsistent state: ") + e.what());
  }
  return s;
}

void save_state(const std::filesystem::path& path, const PersistedState& state) {
  const auto bytes = serialize_state(state);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InputError("cannot move state into '" + path.string() + "': " + ec.message());
}

PersistedState load_state(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_state(bytes);
}

}  // namespace unlearn
