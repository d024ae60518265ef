#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

#include "advx/core.hpp"
#include "advx/metrics.hpp"

namespace advx {

class OracleError : public std::runtime_error {
 public:
  enum class Kind { budget_exhausted, transport, malformed };
  OracleError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Black-box explanation model: only the final output is observable.
class ExplanationOracle {
 public:
  virtual ~ExplanationOracle() = default;
  virtual OracleOutput predict(const RgbImage& image) = 0;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual Embedding embed(const WordList& sentence) = 0;
};

/// Hashed bag of words: every normalized token is hashed with 64-bit FNV-1a into
/// one of `dimension` buckets; the count vector is L2-normalized.
class HashedBagOfWords final : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDefaultDimension = 256;
  explicit HashedBagOfWords(std::size_t dimension = kDefaultDimension) : dimension_(dimension) {}

  Embedding embed(const WordList& sentence) override;
  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t bucket(std::string_view token) const noexcept;

 private:
  std::size_t dimension_;
};

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// Deterministic desk-scale stand-in for the explanation model. See docs/mock_oracle.md.
OracleOutput mock_predict(const RgbImage& image);

class MockOracle final : public ExplanationOracle {
 public:
  OracleOutput predict(const RgbImage& image) override { return mock_predict(image); }
};

/// Counts logical queries against an optional budget (0 = unlimited).
class QueryLedger {
 public:
  explicit QueryLedger(std::uint64_t budget = 0) : budget_(budget) {}

  /// Reserves one query; returns its 1-based index. Throws OracleError(budget_exhausted).
  std::uint64_t acquire();
  std::uint64_t issued() const noexcept { return issued_.load(); }
  std::uint64_t budget() const noexcept { return budget_; }
  bool exhausted() const noexcept { return budget_ > 0 && issued_.load() >= budget_; }

 private:
  std::uint64_t budget_;
  std::atomic<std::uint64_t> issued_{0};
};

struct OracleReply {
  OracleOutput output;
  std::uint64_t query_index = 0;
};

/// One attack's view of a shared oracle: every predict goes through the ledger.
class OracleSession {
 public:
  OracleSession(ExplanationOracle& oracle, std::uint64_t budget) : oracle_(oracle), ledger_(budget) {}

  OracleReply predict(const RgbImage& image);
  const QueryLedger& ledger() const noexcept { return ledger_; }

 private:
  ExplanationOracle& oracle_;
  QueryLedger ledger_;
};

struct OracleEndpoint {
  std::string base_url;
  double timeout_seconds = 30.0;
  int max_retries = 2;
  std::uint64_t query_budget = 0;

  void validate() const;
};

/// Environment variable that overrides the configured oracle base URL.
inline constexpr const char* kOracleUrlEnv = "ADVX_ORACLE_URL";
/// base_url after applying the ADVX_ORACLE_URL override.
std::string effective_base_url(const std::string& configured);

/// HTTP client for the JSON oracle wire protocol. 429 maps to budget_exhausted,
/// 400 to malformed, 5xx and connection failures are retried then reported as transport.
class HttpOracle final : public ExplanationOracle {
 public:
  explicit HttpOracle(OracleEndpoint endpoint);
  OracleOutput predict(const RgbImage& image) override;

 private:
  OracleEndpoint endpoint_;
};

class HttpEmbedder final : public EmbeddingProvider {
 public:
  explicit HttpEmbedder(OracleEndpoint endpoint);
  Embedding embed(const WordList& sentence) override;

 private:
  OracleEndpoint endpoint_;
};

// Wire format helpers shared by client, mock server and tests.
std::string predict_request_json(const RgbImage& image);
std::string output_to_json(const OracleOutput& output);
/// Throws OracleError(malformed) on schema violations.
OracleOutput output_from_json(std::string_view body);

/// In-process HTTP server speaking the oracle wire protocol, backed by
/// mock_predict and the hashed bag-of-words embedder.
class MockServer {
 public:
  struct Options {
    std::string host = "127.0.0.1";
    int port = 0;  // 0 picks a free port
    std::uint64_t query_budget = 0;
  };

  explicit MockServer(Options options);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Binds and serves on a background thread. Throws IoError if the port is taken.
  void start();
  /// Binds and blocks until stop() is called from another thread.
  void run();
  void stop();
  int port() const noexcept { return port_; }
  std::string base_url() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Options options_;
  int port_ = 0;
};

}  // namespace advx
