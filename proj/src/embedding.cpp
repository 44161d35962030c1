#include "raec/embedding.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "http_client.hpp"
#include "raec/error.hpp"
#include "raec/text.hpp"

namespace raec {

EmbeddingVector::EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {
  for (size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw EmbeddingError("embedding component " + std::to_string(i) + " is not finite");
    }
  }
}

double EmbeddingVector::norm() const {
  double acc = 0.0;
  for (float v : values_) acc += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(acc);
}

EmbedderConfig EmbedderConfig::from_json(const Json& j) {
  EmbedderConfig c;
  const auto backend = j.value("backend", std::string("deterministic-test"));
  if (backend == "remote") {
    c.backend = Backend::kRemote;
  } else if (backend == "deterministic-test" || backend == "hash") {
    c.backend = Backend::kDeterministicTest;
  } else {
    throw ConfigError("unknown embedder backend: " + backend);
  }
  c.dim = j.value("dim", c.dim);
  c.normalize = j.value("normalize", c.normalize);
  c.seed = j.value("seed", c.seed);
  c.endpoint = j.value("endpoint", c.endpoint);
  c.api_key = j.value("api_key", c.api_key);
  c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
  c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  c.batch_size = j.value("batch_size", c.batch_size);
  if (c.dim == 0) throw ConfigError("embedder dim must be positive");
  if (c.batch_size == 0) throw ConfigError("embedder batch_size must be positive");
  return c;
}

Json EmbedderConfig::describe() const {
  Json j;
  j["backend"] = backend == Backend::kRemote ? "remote" : "deterministic-test";
  j["dim"] = dim;
  j["normalize"] = normalize;
  if (backend == Backend::kRemote) {
    j["endpoint"] = endpoint;
  } else {
    j["seed"] = seed;
  }
  return j;
}

std::vector<EmbeddingVector> Embedder::embed_batch(std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (size_t i = 0; i < texts.size(); ++i) {
    try {
      out.push_back(embed(texts[i]));
    } catch (const EmbeddingError& e) {
      throw EmbeddingError("texts[" + std::to_string(i) + "]: " + e.what());
    }
  }
  return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed) {
  std::uint64_t h = 0xCBF29CE484222325ULL ^ splitmix64(seed);
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return splitmix64(h);
}

void require_text(std::string_view text) {
  if (trim(text).empty()) throw EmbeddingError("empty text");
}

std::vector<float> normalized(const std::vector<double>& raw, bool normalize) {
  double scale = 1.0;
  if (normalize) {
    double acc = 0.0;
    for (double v : raw) acc += v * v;
    const double n = std::sqrt(acc);
    if (n == 0.0) throw EmbeddingError("cannot normalize a zero vector");
    scale = 1.0 / n;
  }
  std::vector<float> out(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) out[i] = static_cast<float>(raw[i] * scale);
  return out;
}

}  // namespace

HashEmbedder::HashEmbedder(size_t dim, bool normalize, std::uint64_t seed)
    : dim_(dim), normalize_(normalize), seed_(seed) {
  if (dim_ == 0) throw ConfigError("embedder dim must be positive");
}

EmbeddingVector HashEmbedder::embed(std::string_view text) const {
  require_text(text);
  const std::uint64_t h = fnv1a64(text, seed_);
  // sqrt(3) rescales the Irwin-Hall(4) sum to unit variance.
  constexpr double kUnitVariance = 1.7320508075688772;
  std::vector<double> raw(dim_);
  for (size_t i = 0; i < dim_; ++i) {
    std::uint64_t bits = splitmix64(h + 0x9E3779B97F4A7C15ULL * (i + 1));
    double sum = 0.0;
    for (int j = 0; j < 4; ++j) {
      sum += (static_cast<double>(bits & 0xFFFF) + 0.5) / 65536.0;
      bits >>= 16;
    }
    raw[i] = (sum - 2.0) * kUnitVariance;
  }
  return EmbeddingVector(normalized(raw, normalize_));
}

Json HashEmbedder::describe() const {
  EmbedderConfig c;
  c.dim = dim_;
  c.normalize = normalize_;
  c.seed = seed_;
  return c.describe();
}

RemoteEmbedder::RemoteEmbedder(EmbedderConfig config)
    : config_(std::move(config)), limiter_(config_.max_in_flight) {
  if (config_.dim == 0) throw ConfigError("embedder dim must be positive");
  if (config_.endpoint.empty()) throw ConfigError("remote embedder needs an endpoint");
  std::tie(base_url_, path_) = detail::split_url(config_.endpoint);
}

std::vector<EmbeddingVector> RemoteEmbedder::request(std::span<const std::string> texts) const {
  Json body;
  body["texts"] = Json::array();
  for (const auto& t : texts) body["texts"].push_back(t);

  Json reply;
  {
    InFlightLimiter::Permit permit(limiter_);
    reply = detail::post_json(base_url_, path_, body, config_.api_key, config_.timeout_ms);
  }
  if (!reply.is_object() || !reply.contains("vectors") || !reply["vectors"].is_array()) {
    throw BackendError(BackendError::Kind::kProtocol, "embed response lacks 'vectors'");
  }
  if (reply.contains("dim") && reply["dim"].is_number_unsigned() &&
      reply["dim"].get<size_t>() != config_.dim) {
    throw EmbeddingError("remote returned dim " + std::to_string(reply["dim"].get<size_t>()) +
                         ", expected " + std::to_string(config_.dim));
  }
  const auto& vectors = reply["vectors"];
  if (vectors.size() != texts.size()) {
    throw BackendError(BackendError::Kind::kProtocol,
                       "embed response has " + std::to_string(vectors.size()) + " vectors for " +
                           std::to_string(texts.size()) + " texts");
  }
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& v : vectors) {
    if (!v.is_array() || v.size() != config_.dim) {
      throw EmbeddingError("remote returned a vector of dim " +
                           std::to_string(v.is_array() ? v.size() : 0) + ", expected " +
                           std::to_string(config_.dim));
    }
    std::vector<double> raw;
    raw.reserve(v.size());
    for (const auto& x : v) {
      if (!x.is_number()) throw BackendError(BackendError::Kind::kProtocol, "non-numeric component");
      raw.push_back(x.get<double>());
    }
    out.emplace_back(normalized(raw, config_.normalize));
  }
  return out;
}

EmbeddingVector RemoteEmbedder::embed(std::string_view text) const {
  require_text(text);
  const std::string owned(text);
  return request(std::span<const std::string>(&owned, 1)).front();
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(std::span<const std::string> texts) const {
  for (size_t i = 0; i < texts.size(); ++i) {
    if (trim(texts[i]).empty()) throw EmbeddingError("texts[" + std::to_string(i) + "]: empty text");
  }
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (size_t start = 0; start < texts.size(); start += config_.batch_size) {
    const size_t len = std::min(config_.batch_size, texts.size() - start);
    auto chunk = request(texts.subspan(start, len));
    for (auto& v : chunk) out.push_back(std::move(v));
  }
  return out;
}

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config) {
  if (config.backend == EmbedderConfig::Backend::kRemote) {
    return std::make_unique<RemoteEmbedder>(config);
  }
  return std::make_unique<HashEmbedder>(config.dim, config.normalize, config.seed);
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'R', 'A', 'E', 'C', 'V', 'E', 'C', '1'};

template <typename T>
void put_le(std::string& out, T value) {
  for (size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

template <typename T>
T get_le(const std::string& in, size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw IoError("vector store truncated");
  T value = 0;
  for (size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += sizeof(T);
  return value;
}

}  // namespace

void write_vector_store(const std::filesystem::path& path, size_t dim,
                        std::span<const EmbeddingVector> rows) {
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  put_le<std::uint64_t>(out, rows.size());
  out.reserve(out.size() + rows.size() * dim * 4);
  for (const auto& row : rows) {
    if (row.dim() != dim) throw EmbeddingError("vector store row has the wrong dimension");
    for (float v : row.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  write_text_file(path, out);
}

VectorStore read_vector_store(const std::filesystem::path& path) {
  const auto data = read_text_file(path);
  if (data.size() < sizeof(kMagic) || std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IoError(path.string() + ": not a vector store file");
  }
  size_t pos = sizeof(kMagic);
  VectorStore store;
  store.dim = get_le<std::uint32_t>(data, pos);
  const auto rows = get_le<std::uint64_t>(data, pos);
  if (data.size() != pos + rows * store.dim * 4) {
    throw IoError(path.string() + ": size does not match header");
  }
  store.rows.reserve(rows);
  for (std::uint64_t r = 0; r < rows; ++r) {
    std::vector<float> values(store.dim);
    for (auto& v : values) v = std::bit_cast<float>(get_le<std::uint32_t>(data, pos));
    store.rows.emplace_back(std::move(values));
  }
  return store;
}

}  // namespace raec
