#include "subjtag/embedder.hpp"

#include <cmath>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "subjtag/errors.hpp"
#include "subjtag/sha256.hpp"
#include "subjtag/util.hpp"

namespace subjtag {

using ordered_json = nlohmann::ordered_json;

void EmbedderConfig::validate() const {
    if (backend == EmbedderBackend::RemoteService && endpoint_url.empty()) {
        fail(ErrorKind::Config, "embedder: remote backend requires endpoint_url");
    }
    if (backend == EmbedderBackend::DeterministicFallback && dim < 2) {
        fail(ErrorKind::Config, "embedder: fallback backend requires dim >= 2");
    }
    if (batch_size < 1) fail(ErrorKind::Config, "embedder: batch_size must be positive");
    if (max_retries < 0) fail(ErrorKind::Config, "embedder: max_retries must be >= 0");
    if (timeout.count() <= 0) fail(ErrorKind::Config, "embedder: timeout must be positive");
}

EmbeddingVector fallback_embed(std::string_view text, int dim) {
    if (trim(text).empty()) fail(ErrorKind::Config, "fallback_embed: empty text");
    if (dim < 2) fail(ErrorKind::Config, "fallback_embed: dim must be >= 2");

    std::string padded = "#" + lower_ascii(text) + "#";
    std::vector<double> counts(static_cast<std::size_t>(dim), 0.0);
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
        std::uint64_t h = fnv1a64(std::string_view(padded).substr(i, 3));
        counts[h % static_cast<std::uint64_t>(dim)] += 1.0;
    }
    double norm2 = 0.0;
    for (double c : counts) norm2 += c * c;
    double norm = std::sqrt(norm2);  // >= 1: at least one trigram exists
    for (double& c : counts) c /= norm;
    return EmbeddingVector{std::move(counts), kFallbackModelId};
}

namespace {

std::string cache_key(const std::string& model_id, std::string_view text) {
    return model_id + '\n' + sha256_hex(text);
}

}  // namespace

EmbeddingCache::EmbeddingCache(std::filesystem::path file) : file_(std::move(file)) {
    if (!std::filesystem::exists(file_)) return;
    std::vector<std::string> lines = read_lines(file_);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        // Corrupt lines (e.g. a truncated final write) are skipped, not fatal.
        auto skip = [this, i](const char* why) {
            log_line("cache=" + file_.string() + " line=" + std::to_string(i + 1) +
                     " warning=skipped reason=" + why);
        };
        try {
            ordered_json j = ordered_json::parse(lines[i]);
            std::string model_id = j.at("model_id").get<std::string>();
            std::string digest = j.at("digest").get<std::string>();
            auto dim = j.at("dim").get<std::size_t>();
            std::vector<double> vec = j.at("vec").get<std::vector<double>>();
            if (vec.size() != dim) {
                skip("dim-mismatch");
                continue;
            }
            bool finite = true;
            for (double v : vec) {
                if (!std::isfinite(v)) { finite = false; break; }
            }
            if (!finite) {
                skip("non-finite");
                continue;
            }
            entries_[model_id + '\n' + digest] = EmbeddingVector{std::move(vec), model_id};
        } catch (const nlohmann::json::exception&) {
            skip("corrupt");
            continue;
        }
    }
}

std::optional<EmbeddingVector> EmbeddingCache::get(const std::string& model_id,
                                                   std::string_view text) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(cache_key(model_id, text));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void EmbeddingCache::put(const std::string& model_id, std::string_view text,
                         const EmbeddingVector& vec) {
    std::string digest = sha256_hex(text);
    std::lock_guard<std::mutex> lock(mutex_);
    std::string key = model_id + '\n' + digest;
    if (entries_.contains(key)) return;
    entries_[key] = vec;
    if (file_.empty()) return;
    if (file_.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(file_.parent_path(), ec);
    }
    std::ofstream out(file_, std::ios::binary | std::ios::app);
    if (!out) fail(ErrorKind::Io, "cannot open cache for append: " + file_.string());
    ordered_json j;
    j["model_id"] = model_id;
    j["digest"] = digest;
    j["dim"] = vec.values.size();
    j["vec"] = vec.values;
    out << j.dump() << '\n';
    out.flush();
    if (!out) fail(ErrorKind::Io, "cache write failure: " + file_.string());
}

std::size_t EmbeddingCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

Embedder::Embedder(EmbedderConfig config, EmbeddingCache* cache)
    : config_(std::move(config)), cache_(cache) {
    config_.validate();
    if (config_.backend == EmbedderBackend::DeterministicFallback) {
        model_id_ = kFallbackModelId;
        dim_ = config_.dim;
    } else if (!config_.model.empty()) {
        // A pinned model name doubles as the cache key, so a warm cache can
        // satisfy a run without any remote call. The first response must
        // report the same id.
        model_id_ = config_.model;
    }
}

std::vector<EmbeddingVector> Embedder::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) fail(ErrorKind::Config, "embed: empty text list");
    for (const std::string& t : texts) {
        if (trim(t).empty()) fail(ErrorKind::Config, "embed: empty text element");
    }

    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::size_t> missing;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (cache_ != nullptr && !model_id_.empty()) {
            auto hit = cache_->get(model_id_, texts[i]);
            if (hit && (dim_ == 0 || hit->dim() == static_cast<std::size_t>(dim_))) {
                out[i] = std::move(*hit);
                ++cache_hits_;
                continue;
            }
        }
        missing.push_back(i);
    }

    for (std::size_t pos = 0; pos < missing.size(); pos += config_.batch_size) {
        std::size_t chunk_end = std::min(missing.size(), pos + config_.batch_size);
        std::vector<std::string> chunk;
        chunk.reserve(chunk_end - pos);
        for (std::size_t i = pos; i < chunk_end; ++i) chunk.push_back(texts[missing[i]]);

        std::vector<EmbeddingVector> vecs;
        if (config_.backend == EmbedderBackend::DeterministicFallback) {
            vecs.reserve(chunk.size());
            for (const std::string& t : chunk) vecs.push_back(fallback_embed(t, config_.dim));
        } else {
            vecs = embed_remote_chunk(chunk);
        }
        for (std::size_t i = pos; i < chunk_end; ++i) {
            const EmbeddingVector& v = vecs[i - pos];
            if (cache_ != nullptr) cache_->put(v.model_id, texts[missing[i]], v);
            out[missing[i]] = vecs[i - pos];
        }
    }
    return out;
}

std::vector<EmbeddingVector> Embedder::embed_remote_chunk(const std::vector<std::string>& texts) {
    ordered_json req;
    req["model"] = config_.model.empty() ? ordered_json(nullptr) : ordered_json(config_.model);
    req["texts"] = texts;
    const std::string body = req.dump();

    httplib::Client client(config_.endpoint_url);
    double seconds = static_cast<double>(config_.timeout.count()) / 1000.0;
    client.set_connection_timeout(seconds);
    client.set_read_timeout(seconds);
    client.set_write_timeout(seconds);

    httplib::Result res;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
        res = client.Post("/v1/embed", body, "application/json");
        ++remote_calls_;
        if (res && res->status == 200) break;
    }
    if (!res || res->status != 200) {
        std::string detail = res ? "HTTP " + std::to_string(res->status)
                                 : httplib::to_string(res.error());
        fail(ErrorKind::Service, "embedding service unreachable after " +
                                     std::to_string(config_.max_retries + 1) + " attempts (" +
                                     detail + "): " + config_.endpoint_url);
    }

    ordered_json j;
    try {
        j = ordered_json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Service, std::string("embedding service returned invalid JSON: ") + e.what());
    }
    std::string model_id;
    std::size_t dim = 0;
    std::vector<std::vector<double>> rows;
    try {
        model_id = j.at("model_id").get<std::string>();
        dim = j.at("dim").get<std::size_t>();
        rows = j.at("embeddings").get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Service, std::string("embedding service response malformed: ") + e.what());
    }

    if (rows.size() != texts.size()) {
        fail(ErrorKind::Service, "embedding service count mismatch: sent " +
                                     std::to_string(texts.size()) + " texts, got " +
                                     std::to_string(rows.size()) + " vectors");
    }
    if (!model_id_.empty() && model_id != model_id_) {
        fail(ErrorKind::Service, "embedding service model drift: expected \"" + model_id_ +
                                     "\", got \"" + model_id + "\"");
    }
    if (dim_ != 0 && dim != static_cast<std::size_t>(dim_)) {
        fail(ErrorKind::Service, "embedding service dim drift: expected " + std::to_string(dim_) +
                                     ", got " + std::to_string(dim));
    }
    if (dim == 0) fail(ErrorKind::Service, "embedding service reported dim 0");

    std::vector<EmbeddingVector> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
        if (row.size() != dim) {
            fail(ErrorKind::Service, "embedding service dim drift within response: expected " +
                                         std::to_string(dim) + ", got " +
                                         std::to_string(row.size()));
        }
        for (double v : row) {
            if (!std::isfinite(v)) fail(ErrorKind::Service, "embedding service returned non-finite value");
        }
        out.push_back(EmbeddingVector{row, model_id});
    }
    // Dimension and model id are learned from the first successful response
    // and enforced thereafter.
    model_id_ = model_id;
    dim_ = static_cast<int>(dim);
    return out;
}

std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts,
                                         const EmbedderConfig& config) {
    Embedder embedder(config);
    return embedder.embed(texts);
}

}  // namespace subjtag
