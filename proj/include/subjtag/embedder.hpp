#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace subjtag {

struct EmbeddingVector {
    std::vector<double> values;
    std::string model_id;

    std::size_t dim() const { return values.size(); }
};

enum class EmbedderBackend { RemoteService, DeterministicFallback };

struct EmbedderConfig {
    EmbedderBackend backend = EmbedderBackend::DeterministicFallback;
    std::string endpoint_url;  // RemoteService only
    std::string model;         // requested model name; empty lets the service pick
    int dim = 256;             // DeterministicFallback only
    int batch_size = 64;
    std::chrono::milliseconds timeout{10000};
    int max_retries = 2;

    void validate() const;
};

inline constexpr const char* kFallbackModelId = "fallback-trigram-v1";

/// Deterministic offline embedding: lowercase (ASCII), pad with '#' on both
/// ends, hash every byte trigram with FNV-1a 64, bucket by hash mod dim,
/// L2-normalize the counts. Bit-exact for a given (text, dim).
EmbeddingVector fallback_embed(std::string_view text, int dim);

/// Persistent embedding store keyed by (model_id, SHA-256(text)). Writes are
/// appended and flushed per put so the file survives a crash; corrupt lines
/// are skipped on load. Safe for concurrent get/put from multiple threads
/// within one process (single writer at a time).
class EmbeddingCache {
public:
    EmbeddingCache() = default;
    explicit EmbeddingCache(std::filesystem::path file);

    std::optional<EmbeddingVector> get(const std::string& model_id, std::string_view text) const;
    void put(const std::string& model_id, std::string_view text, const EmbeddingVector& vec);

    std::size_t size() const;
    const std::filesystem::path& file() const { return file_; }

private:
    mutable std::mutex mutex_;
    std::filesystem::path file_;
    std::unordered_map<std::string, EmbeddingVector> entries_;  // "model_id\ndigest"
};

/// Batch embedding front end: serves texts from the cache when one is
/// attached, embeds misses through the configured backend in batch_size
/// chunks, and records how many remote calls were made.
class Embedder {
public:
    explicit Embedder(EmbedderConfig config, EmbeddingCache* cache = nullptr);

    /// Embeds texts in input order. Every text must be non-empty after
    /// trimming; all returned vectors share dim and model_id.
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);

    /// Resolved model id; empty until known (remote backend without a pinned
    /// model name, before the first call).
    const std::string& model_id() const { return model_id_; }
    int dim() const { return dim_; }

    std::uint64_t remote_calls() const { return remote_calls_; }
    std::uint64_t cache_hits() const { return cache_hits_; }

private:
    std::vector<EmbeddingVector> embed_remote_chunk(const std::vector<std::string>& texts);

    EmbedderConfig config_;
    EmbeddingCache* cache_ = nullptr;
    std::string model_id_;
    int dim_ = 0;  // 0 until known for the remote backend
    std::uint64_t remote_calls_ = 0;
    std::uint64_t cache_hits_ = 0;
};

/// One-shot form of Embedder::embed without a cache.
std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts,
                                         const EmbedderConfig& config);

}  // namespace subjtag
