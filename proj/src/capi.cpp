#include "subjtag.h"

#include <cstring>
#include <new>
#include <string>

#include "subjtag/embedder.hpp"
#include "subjtag/errors.hpp"
#include "subjtag/eval.hpp"
#include "subjtag/pipeline.hpp"
#include "subjtag/reranker.hpp"
#include "subjtag/retrieval.hpp"
#include "subjtag/util.hpp"
#include "subjtag/version.hpp"

using subjtag::Error;
using subjtag::ErrorKind;

namespace {

thread_local std::string g_last_error;

subjtag_status status_of(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config: return SUBJTAG_ERR_CONFIG;
        case ErrorKind::Io: return SUBJTAG_ERR_IO;
        case ErrorKind::Parse: return SUBJTAG_ERR_PARSE;
        case ErrorKind::Service: return SUBJTAG_ERR_SERVICE;
        case ErrorKind::Internal: return SUBJTAG_ERR_INTERNAL;
    }
    return SUBJTAG_ERR_INTERNAL;
}

template <typename Fn>
subjtag_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return SUBJTAG_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return SUBJTAG_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return SUBJTAG_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return SUBJTAG_ERR_INTERNAL;
    }
}

subjtag_status invalid_argument(const char* message) {
    g_last_error = message;
    return SUBJTAG_ERR_CONFIG;
}

}  // namespace

struct subjtag_config {
    subjtag::RunConfig config;
};

struct subjtag_index {
    subjtag::SubjectIndex index;
};

extern "C" {

const char* subjtag_version(void) { return subjtag::kVersion; }

const char* subjtag_last_error(void) { return g_last_error.c_str(); }

void subjtag_set_logger(subjtag_log_fn fn, void* user_data) {
    if (fn == nullptr) {
        subjtag::set_log_sink(nullptr);
        return;
    }
    subjtag::set_log_sink(
        [fn, user_data](const std::string& line) { fn(line.c_str(), user_data); });
}

subjtag_config* subjtag_config_new(void) { return new (std::nothrow) subjtag_config(); }

void subjtag_config_free(subjtag_config* config) { delete config; }

subjtag_status subjtag_config_load(subjtag_config* config, const char* path) {
    if (config == nullptr || path == nullptr) return invalid_argument("null argument");
    return guarded([&] {
        subjtag::RunConfig loaded = subjtag::RunConfig::from_file(path);
        config->config = loaded;
    });
}

subjtag_status subjtag_config_set(subjtag_config* config, const char* key, const char* value) {
    if (config == nullptr || key == nullptr || value == nullptr) {
        return invalid_argument("null argument");
    }
    return guarded([&] { config->config.set_key(key, value); });
}

subjtag_status subjtag_config_validate(const subjtag_config* config) {
    if (config == nullptr) return invalid_argument("null config");
    return guarded([&] { config->config.validate(); });
}

subjtag_status subjtag_run_index(const subjtag_config* config) {
    if (config == nullptr) return invalid_argument("null config");
    return guarded([&] { subjtag::run_index(config->config); });
}

subjtag_status subjtag_run_retrieve(const subjtag_config* config) {
    if (config == nullptr) return invalid_argument("null config");
    return guarded([&] { subjtag::run_retrieve(config->config); });
}

subjtag_status subjtag_run_rerank(const subjtag_config* config) {
    if (config == nullptr) return invalid_argument("null config");
    return guarded([&] { subjtag::run_rerank(config->config); });
}

subjtag_status subjtag_run_export_sts(const subjtag_config* config) {
    if (config == nullptr) return invalid_argument("null config");
    return guarded([&] { subjtag::run_export_sts(config->config); });
}

subjtag_status subjtag_run_export_sft(const subjtag_config* config) {
    if (config == nullptr) return invalid_argument("null config");
    return guarded([&] { subjtag::run_export_sft(config->config); });
}

subjtag_status subjtag_run_evaluate(const subjtag_config* config) {
    if (config == nullptr) return invalid_argument("null config");
    return guarded([&] { subjtag::run_evaluate(config->config); });
}

subjtag_status subjtag_run_pipeline(const subjtag_config* config) {
    if (config == nullptr) return invalid_argument("null config");
    return guarded([&] { subjtag::run_pipeline(config->config); });
}

subjtag_status subjtag_index_load(const char* path, subjtag_index** out_index) {
    if (path == nullptr || out_index == nullptr) return invalid_argument("null argument");
    *out_index = nullptr;
    return guarded([&] {
        auto* handle = new subjtag_index{subjtag::SubjectIndex::load_file(path)};
        *out_index = handle;
    });
}

void subjtag_index_free(subjtag_index* index) { delete index; }

int64_t subjtag_index_size(const subjtag_index* index) {
    return index == nullptr ? 0 : static_cast<int64_t>(index->index.size());
}

int32_t subjtag_index_dim(const subjtag_index* index) {
    return index == nullptr ? 0 : index->index.dim();
}

subjtag_status subjtag_index_query(const subjtag_index* index, const double* query_values,
                                   int32_t dim, int32_t k, char*** out_ids, double* out_scores,
                                   int32_t* out_count) {
    if (index == nullptr || query_values == nullptr || out_ids == nullptr ||
        out_scores == nullptr || out_count == nullptr) {
        return invalid_argument("null argument");
    }
    if (dim < 1 || k < 1) return invalid_argument("dim and k must be positive");
    *out_ids = nullptr;
    *out_count = 0;
    return guarded([&] {
        subjtag::EmbeddingVector query;
        query.values.assign(query_values, query_values + dim);
        query.model_id = index->index.model_id();
        subjtag::RankedCandidates ranked = index->index.query_topk(query, k);

        auto count = static_cast<int32_t>(ranked.items.size());
        char** ids = new char*[ranked.items.size()];
        for (std::size_t i = 0; i < ranked.items.size(); ++i) {
            const std::string& id = ranked.items[i].subject_id;
            ids[i] = new char[id.size() + 1];
            std::memcpy(ids[i], id.c_str(), id.size() + 1);
            out_scores[i] = ranked.items[i].score;
        }
        *out_ids = ids;
        *out_count = count;
    });
}

void subjtag_ids_free(char** ids, int32_t count) {
    if (ids == nullptr) return;
    for (int32_t i = 0; i < count; ++i) delete[] ids[i];
    delete[] ids;
}

subjtag_status subjtag_fallback_embed(const char* text, int32_t dim, double* out_values) {
    if (text == nullptr || out_values == nullptr) return invalid_argument("null argument");
    return guarded([&] {
        subjtag::EmbeddingVector vec = subjtag::fallback_embed(text, dim);
        std::memcpy(out_values, vec.values.data(), vec.values.size() * sizeof(double));
    });
}

subjtag_status subjtag_cosine(const double* a, const double* b, int32_t dim, double* out_value) {
    if (a == nullptr || b == nullptr || out_value == nullptr) {
        return invalid_argument("null argument");
    }
    if (dim < 1) return invalid_argument("dim must be positive");
    return guarded([&] {
        subjtag::EmbeddingVector va, vb;
        va.values.assign(a, a + dim);
        vb.values.assign(b, b + dim);
        *out_value = subjtag::cosine(va, vb);
    });
}

subjtag_status subjtag_prf_at_k(const char* const* gold, int32_t gold_count,
                                const char* const* predicted, int32_t predicted_count, int32_t k,
                                double* out_prf) {
    if ((gold == nullptr && gold_count > 0) || (predicted == nullptr && predicted_count > 0) ||
        out_prf == nullptr || gold_count < 0 || predicted_count < 0) {
        return invalid_argument("bad argument");
    }
    return guarded([&] {
        std::vector<std::string> gold_vec(gold, gold + gold_count);
        std::vector<std::string> predicted_vec(predicted, predicted + predicted_count);
        subjtag::PrfTriple t = subjtag::prf_at_k(gold_vec, predicted_vec, k);
        out_prf[0] = t.precision;
        out_prf[1] = t.recall;
        out_prf[2] = t.f1;
    });
}

int32_t subjtag_parse_decision(const char* reply) {
    if (reply == nullptr) return -1;
    switch (subjtag::parse_decision(reply).verdict) {
        case subjtag::Verdict::Match: return 1;
        case subjtag::Verdict::NoMatch: return 0;
        case subjtag::Verdict::Unparseable: return -1;
    }
    return -1;
}

subjtag_status subjtag_render_prompt(const char* record_text, const char* subject_label,
                                     char* buffer, size_t buffer_size, size_t* out_length) {
    if (record_text == nullptr || subject_label == nullptr || out_length == nullptr) {
        return invalid_argument("null argument");
    }
    return guarded([&] {
        std::string rendered = subjtag::build_prompt(record_text, subject_label).rendered;
        *out_length = rendered.size();
        if (buffer != nullptr && buffer_size > 0) {
            std::size_t n = std::min(buffer_size - 1, rendered.size());
            std::memcpy(buffer, rendered.data(), n);
            buffer[n] = '\0';
        }
    });
}

}  // extern "C"
