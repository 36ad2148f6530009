#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "subjtag/corpus.hpp"
#include "subjtag/embedder.hpp"
#include "subjtag/eval.hpp"
#include "subjtag/reranker.hpp"

namespace subjtag {

/// Flat run configuration shared by every subcommand. Key set (JSON file and
/// set_key both accept them):
///   taxonomy, records, cache, index, candidates, assignments, report_dir,
///   sts_out, sft_out, mode, k, k_grid, seed, force, workers,
///   embedder_backend, embedder_url, embedder_model, embedder_dim,
///   embedder_batch_size, embedder_timeout_ms, embedder_retries,
///   generator_backend, generator_url, generator_max_tokens,
///   generator_timeout_ms, generator_retries, max_in_flight,
///   sts_cap, sft_cap, negative_ratio
struct RunConfig {
    std::string taxonomy_path;
    std::string records_path;
    std::string cache_path;
    std::string index_path;
    std::string candidates_path;
    std::string assignments_path;
    std::string report_dir;
    std::string sts_path;
    std::string sft_path;

    RepresentationMode mode = RepresentationMode::TitleOnly;
    int k = 30;
    KGrid k_grid;
    std::uint64_t seed = 42;
    bool force = false;
    int workers = 0;  // 0 = hardware concurrency

    EmbedderConfig embedder;
    GeneratorConfig generator;
    int sts_cap = 600;
    int sft_cap = 200;
    double negative_ratio = 1.0;

    static RunConfig from_file(const std::filesystem::path& path);
    void set_key(const std::string& key, const std::string& value);  // Config error on unknown key
    std::string to_json_text() const;

    /// Structural invariants (k_grid bounded by k, backend requirements...).
    void validate() const;

    /// Copy with the SUBJTAG_CACHE_DIR override applied.
    RunConfig resolved() const;
};

struct StageRun {
    std::string stage;
    bool skipped = false;
    std::uint64_t items_out = 0;
    std::uint64_t remote_calls = 0;
    std::uint64_t cache_hits = 0;
    std::uint64_t pairs_judged = 0;
    std::uint64_t unparseable = 0;
    std::uint64_t failed_records = 0;
    double elapsed_ms = 0.0;
};

// Pipeline stages. Each validates the inputs it needs, skips itself when its
// output is newer than all inputs (unless force), writes a resolved-config
// snapshot next to its primary output, and logs one machine-parseable line.
StageRun run_index(const RunConfig& config);
StageRun run_retrieve(const RunConfig& config);
StageRun run_rerank(const RunConfig& config);
StageRun run_export_sts(const RunConfig& config);
StageRun run_export_sft(const RunConfig& config);
StageRun run_evaluate(const RunConfig& config);
std::vector<StageRun> run_pipeline(const RunConfig& config);

}  // namespace subjtag
