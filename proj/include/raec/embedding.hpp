#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "raec/io.hpp"
#include "raec/limiter.hpp"

namespace raec {

/// Fixed-length vector of finite float32 values.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  /// Throws EmbeddingError if any value is not finite.
  explicit EmbeddingVector(std::vector<float> values);

  std::span<const float> values() const noexcept { return values_; }
  size_t dim() const noexcept { return values_.size(); }
  double norm() const;

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<float> values_;
};

inline constexpr std::uint64_t kDefaultHashSeed = 0x5241454331ULL;

struct EmbedderConfig {
  enum class Backend { kDeterministicTest, kRemote };

  Backend backend = Backend::kDeterministicTest;
  size_t dim = 768;
  bool normalize = true;
  std::uint64_t seed = kDefaultHashSeed;

  // Remote backend only.
  std::string endpoint;  // e.g. http://127.0.0.1:8081/embed
  std::string api_key;   // sent as "Authorization: Bearer <key>"
  int timeout_ms = 10000;
  size_t max_in_flight = 4;
  size_t batch_size = 64;

  static EmbedderConfig from_json(const Json& j);
  /// Non-secret description recorded in index manifests.
  Json describe() const;
};

class Embedder {
 public:
  virtual ~Embedder() = default;

  virtual size_t dim() const = 0;
  virtual EmbeddingVector embed(std::string_view text) const = 0;
  /// Element i equals embed(texts[i]). Errors name the failing index.
  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const;
  virtual Json describe() const = 0;
};

/// Seeded text-hash expansion, identical across processes and platforms: FNV-1a over
/// the UTF-8 bytes mixed with the seed, a splitmix64 counter stream per component,
/// and an Irwin-Hall (sum of four uniforms) pseudo-gaussian. Uses only integer ops,
/// IEEE add/multiply and sqrt, all of which are exactly specified.
class HashEmbedder : public Embedder {
 public:
  explicit HashEmbedder(size_t dim = 768, bool normalize = true,
                        std::uint64_t seed = kDefaultHashSeed);

  size_t dim() const override { return dim_; }
  EmbeddingVector embed(std::string_view text) const override;
  Json describe() const override;

 private:
  size_t dim_;
  bool normalize_;
  std::uint64_t seed_;
};

/// POST {texts:[...]} -> {vectors:[[...]], dim}. Plain http only.
class RemoteEmbedder : public Embedder {
 public:
  explicit RemoteEmbedder(EmbedderConfig config);

  size_t dim() const override { return config_.dim; }
  EmbeddingVector embed(std::string_view text) const override;
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override;
  Json describe() const override { return config_.describe(); }

 private:
  std::vector<EmbeddingVector> request(std::span<const std::string> texts) const;

  EmbedderConfig config_;
  std::string base_url_;
  std::string path_;
  mutable InFlightLimiter limiter_;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config);

// ---------------------------------------------------------------------------
// On-disk vector store: "RAECVEC1" magic, u32 dim, u64 rows, then rows*dim
// little-endian float32 values, row-major.

void write_vector_store(const std::filesystem::path& path, size_t dim,
                        std::span<const EmbeddingVector> rows);

struct VectorStore {
  size_t dim = 0;
  std::vector<EmbeddingVector> rows;
};

VectorStore read_vector_store(const std::filesystem::path& path);

}  // namespace raec
