#include "subjtag/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <optional>
#include <thread>

#include <json.hpp>

#include "subjtag/datasetgen.hpp"
#include "subjtag/errors.hpp"
#include "subjtag/retrieval.hpp"
#include "subjtag/util.hpp"

namespace subjtag {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string backend_name(EmbedderBackend b) {
    return b == EmbedderBackend::RemoteService ? "remote" : "fallback";
}

std::string backend_name(GeneratorBackend b) {
    switch (b) {
        case GeneratorBackend::RemoteService: return "remote";
        case GeneratorBackend::MockOracle: return "oracle";
        case GeneratorBackend::MockAcceptAll: return "accept_all";
    }
    return "accept_all";
}

EmbedderBackend parse_embedder_backend(const std::string& name) {
    if (name == "remote") return EmbedderBackend::RemoteService;
    if (name == "fallback") return EmbedderBackend::DeterministicFallback;
    fail(ErrorKind::Config, "unknown embedder_backend: \"" + name + "\"");
}

GeneratorBackend parse_generator_backend(const std::string& name) {
    if (name == "remote") return GeneratorBackend::RemoteService;
    if (name == "oracle") return GeneratorBackend::MockOracle;
    if (name == "accept_all") return GeneratorBackend::MockAcceptAll;
    fail(ErrorKind::Config, "unknown generator_backend: \"" + name + "\"");
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        std::int64_t v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        fail(ErrorKind::Config, "config key \"" + key + "\": not an integer: \"" + value + "\"");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        fail(ErrorKind::Config, "config key \"" + key + "\": not a number: \"" + value + "\"");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    fail(ErrorKind::Config, "config key \"" + key + "\": not a boolean: \"" + value + "\"");
}

std::vector<int> parse_k_grid(const std::string& key, const std::string& value) {
    std::vector<int> ks;
    std::string cur;
    for (char c : value + ",") {
        if (c == ',') {
            std::string t = trim(cur);
            if (!t.empty()) ks.push_back(static_cast<int>(parse_int(key, t)));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (ks.empty()) fail(ErrorKind::Config, "config key \"" + key + "\": empty list");
    return ks;
}

}  // namespace

void RunConfig::set_key(const std::string& key, const std::string& value) {
    if (key == "taxonomy") taxonomy_path = value;
    else if (key == "records") records_path = value;
    else if (key == "cache") cache_path = value;
    else if (key == "index") index_path = value;
    else if (key == "candidates") candidates_path = value;
    else if (key == "assignments") assignments_path = value;
    else if (key == "report_dir") report_dir = value;
    else if (key == "sts_out") sts_path = value;
    else if (key == "sft_out") sft_path = value;
    else if (key == "mode") mode = parse_mode(value);
    else if (key == "k") k = static_cast<int>(parse_int(key, value));
    else if (key == "k_grid") k_grid.ks = parse_k_grid(key, value);
    else if (key == "seed") seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "force") force = parse_bool(key, value);
    else if (key == "workers") workers = static_cast<int>(parse_int(key, value));
    else if (key == "embedder_backend") embedder.backend = parse_embedder_backend(value);
    else if (key == "embedder_url") embedder.endpoint_url = value;
    else if (key == "embedder_model") embedder.model = value;
    else if (key == "embedder_dim") embedder.dim = static_cast<int>(parse_int(key, value));
    else if (key == "embedder_batch_size") embedder.batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "embedder_timeout_ms") embedder.timeout = std::chrono::milliseconds(parse_int(key, value));
    else if (key == "embedder_retries") embedder.max_retries = static_cast<int>(parse_int(key, value));
    else if (key == "generator_backend") generator.backend = parse_generator_backend(value);
    else if (key == "generator_url") generator.endpoint_url = value;
    else if (key == "generator_max_tokens") generator.max_tokens = static_cast<int>(parse_int(key, value));
    else if (key == "generator_timeout_ms") generator.timeout = std::chrono::milliseconds(parse_int(key, value));
    else if (key == "generator_retries") generator.max_retries = static_cast<int>(parse_int(key, value));
    else if (key == "max_in_flight") generator.max_in_flight = static_cast<int>(parse_int(key, value));
    else if (key == "sts_cap") sts_cap = static_cast<int>(parse_int(key, value));
    else if (key == "sft_cap") sft_cap = static_cast<int>(parse_int(key, value));
    else if (key == "negative_ratio") negative_ratio = parse_double(key, value);
    else fail(ErrorKind::Config, "unknown config key: \"" + key + "\"");
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        fail(ErrorKind::Config, "config file does not exist: " + path.string());
    }
    ordered_json j;
    try {
        j = ordered_json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Config, path.string() + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) fail(ErrorKind::Config, path.string() + ": config must be a JSON object");

    RunConfig config;
    for (const auto& [key, value] : j.items()) {
        std::string text;
        if (value.is_string()) text = value.get<std::string>();
        else if (value.is_array()) {
            // k_grid may be a JSON array.
            for (const auto& item : value) {
                if (!text.empty()) text += ',';
                text += item.dump();
            }
        } else {
            text = value.dump();
        }
        config.set_key(key, text);
    }
    return config;
}

std::string RunConfig::to_json_text() const {
    ordered_json j;
    j["taxonomy"] = taxonomy_path;
    j["records"] = records_path;
    j["cache"] = cache_path;
    j["index"] = index_path;
    j["candidates"] = candidates_path;
    j["assignments"] = assignments_path;
    j["report_dir"] = report_dir;
    j["sts_out"] = sts_path;
    j["sft_out"] = sft_path;
    j["mode"] = to_string(mode);
    j["k"] = k;
    j["k_grid"] = k_grid.ks;
    j["seed"] = seed;
    j["force"] = force;
    j["workers"] = workers;
    j["embedder_backend"] = backend_name(embedder.backend);
    j["embedder_url"] = embedder.endpoint_url;
    j["embedder_model"] = embedder.model;
    j["embedder_dim"] = embedder.dim;
    j["embedder_batch_size"] = embedder.batch_size;
    j["embedder_timeout_ms"] = embedder.timeout.count();
    j["embedder_retries"] = embedder.max_retries;
    j["generator_backend"] = backend_name(generator.backend);
    j["generator_url"] = generator.endpoint_url;
    j["generator_max_tokens"] = generator.max_tokens;
    j["generator_timeout_ms"] = generator.timeout.count();
    j["generator_retries"] = generator.max_retries;
    j["max_in_flight"] = generator.max_in_flight;
    j["sts_cap"] = sts_cap;
    j["sft_cap"] = sft_cap;
    j["negative_ratio"] = negative_ratio;
    return j.dump(2) + "\n";
}

void RunConfig::validate() const {
    if (k < 1) fail(ErrorKind::Config, "config: k must be >= 1");
    k_grid.validate();
    if (k_grid.ks.back() > k) {
        fail(ErrorKind::Config, "config: max(k_grid) = " + std::to_string(k_grid.ks.back()) +
                                    " exceeds k = " + std::to_string(k));
    }
    if (workers < 0) fail(ErrorKind::Config, "config: workers must be >= 0");
    if (sts_cap < 1) fail(ErrorKind::Config, "config: sts_cap must be positive");
    if (sft_cap < 1) fail(ErrorKind::Config, "config: sft_cap must be positive");
    if (!(negative_ratio > 0.0)) fail(ErrorKind::Config, "config: negative_ratio must be > 0");
    embedder.validate();
    generator.validate();
}

RunConfig RunConfig::resolved() const {
    RunConfig out = *this;
    if (const char* dir = std::getenv("SUBJTAG_CACHE_DIR"); dir != nullptr && *dir != '\0') {
        std::filesystem::path base(dir);
        std::filesystem::path name = out.cache_path.empty()
                                         ? std::filesystem::path("embeddings.jsonl")
                                         : std::filesystem::path(out.cache_path).filename();
        out.cache_path = (base / name).string();
    }
    return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void require_input(const std::string& value, const char* field) {
    if (value.empty()) fail(ErrorKind::Config, std::string("config: \"") + field + "\" is not set");
    if (!std::filesystem::exists(value)) {
        fail(ErrorKind::Config,
             std::string("config: \"") + field + "\" path does not exist: " + value);
    }
}

void require_output(const std::string& value, const char* field) {
    if (value.empty()) fail(ErrorKind::Config, std::string("config: \"") + field + "\" is not set");
}

// A stage is skipped when its output is newer than every input.
bool output_fresh(const std::string& output, const std::vector<std::string>& inputs) {
    std::error_code ec;
    auto out_time = std::filesystem::last_write_time(output, ec);
    if (ec) return false;
    for (const std::string& input : inputs) {
        auto in_time = std::filesystem::last_write_time(input, ec);
        if (ec) return false;
        if (!(out_time > in_time)) return false;
    }
    return true;
}

void write_snapshot(const RunConfig& config, const std::string& primary_output) {
    std::filesystem::path dir = std::filesystem::path(primary_output).parent_path();
    std::filesystem::path target = dir.empty() ? std::filesystem::path("resolved_config.json")
                                               : dir / "resolved_config.json";
    write_file(target, config.to_json_text());
}

std::string stage_log(const StageRun& run, const std::string& extra = {}) {
    std::string line = "stage=" + run.stage;
    line += run.skipped ? " skipped=1" : " skipped=0";
    line += " items=" + std::to_string(run.items_out);
    line += " remote_calls=" + std::to_string(run.remote_calls);
    line += " cache_hits=" + std::to_string(run.cache_hits);
    if (!extra.empty()) line += " " + extra;
    line += " elapsed_ms=" + std::to_string(static_cast<std::int64_t>(run.elapsed_ms));
    return line;
}

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    unsigned hw = std::thread::hardware_concurrency();
    std::size_t pool_size = workers > 0 ? static_cast<std::size_t>(workers)
                                        : std::max<std::size_t>(hw, 1);
    pool_size = std::min(pool_size, n);
    if (pool_size <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> failures(pool_size);
    std::vector<std::thread> pool;
    pool.reserve(pool_size);
    for (std::size_t w = 0; w < pool_size; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (;;) {
                    std::size_t i = next.fetch_add(1);
                    if (i >= n) return;
                    fn(i);
                }
            } catch (...) {
                failures[w] = std::current_exception();
            }
        });
    }
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : failures) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

StageRun run_index(const RunConfig& raw) {
    RunConfig config = raw.resolved();
    config.validate();
    auto start = Clock::now();
    StageRun run{"index"};

    require_input(config.taxonomy_path, "taxonomy");
    require_output(config.index_path, "index");

    if (!config.force && output_fresh(config.index_path, {config.taxonomy_path})) {
        run.skipped = true;
        run.elapsed_ms = ms_since(start);
        log_line(stage_log(run));
        return run;
    }

    Taxonomy taxonomy = Taxonomy::parse_file(config.taxonomy_path);
    std::optional<EmbeddingCache> cache;
    if (!config.cache_path.empty()) cache.emplace(config.cache_path);
    Embedder embedder(config.embedder, cache ? &*cache : nullptr);
    SubjectIndex index = SubjectIndex::build(taxonomy, embedder);
    index.write_file(config.index_path);
    write_snapshot(config, config.index_path);

    run.items_out = index.size();
    run.remote_calls = embedder.remote_calls();
    run.cache_hits = embedder.cache_hits();
    run.elapsed_ms = ms_since(start);
    log_line(stage_log(run));
    return run;
}

StageRun run_retrieve(const RunConfig& raw) {
    RunConfig config = raw.resolved();
    config.validate();
    auto start = Clock::now();
    StageRun run{"retrieve"};

    require_input(config.records_path, "records");
    require_input(config.index_path, "index");
    require_output(config.candidates_path, "candidates");

    if (!config.force &&
        output_fresh(config.candidates_path, {config.records_path, config.index_path})) {
        run.skipped = true;
        run.elapsed_ms = ms_since(start);
        log_line(stage_log(run));
        return run;
    }

    SubjectIndex index = SubjectIndex::load_file(config.index_path);
    RecordCollection records = RecordCollection::parse_file(config.records_path);

    std::optional<EmbeddingCache> cache;
    if (!config.cache_path.empty()) cache.emplace(config.cache_path);
    Embedder embedder(config.embedder, cache ? &*cache : nullptr);

    // Cheap checks first when the backend pins model/dim up front.
    if (!embedder.model_id().empty() && embedder.model_id() != index.model_id()) {
        fail(ErrorKind::Config, "index was built with model \"" + index.model_id() +
                                    "\" but the embedder is \"" + embedder.model_id() + "\"");
    }
    if (embedder.dim() != 0 && embedder.dim() != index.dim()) {
        fail(ErrorKind::Config, "dim mismatch between index (" + std::to_string(index.dim()) +
                                    ") and embedder (" + std::to_string(embedder.dim()) + ")");
    }

    std::vector<std::string> texts;
    texts.reserve(records.size());
    for (const Record& r : records.records()) texts.push_back(render_text(r, config.mode, records));

    std::vector<RankedCandidates> results(records.size());
    if (!texts.empty()) {
        std::vector<EmbeddingVector> queries = embedder.embed(texts);
        if (embedder.model_id() != index.model_id()) {
            fail(ErrorKind::Config, "index was built with model \"" + index.model_id() +
                                        "\" but the embedder is \"" + embedder.model_id() + "\"");
        }
        if (embedder.dim() != index.dim()) {
            fail(ErrorKind::Config, "dim mismatch between index (" + std::to_string(index.dim()) +
                                        ") and embedder (" + std::to_string(embedder.dim()) + ")");
        }
        const auto& record_list = records.records();
        parallel_for(records.size(), config.workers, [&](std::size_t i) {
            results[i] = index.query_topk(queries[i], config.k, record_list[i].id);
        });
    }
    write_candidates(config.candidates_path, results);
    write_snapshot(config, config.candidates_path);

    run.items_out = results.size();
    run.remote_calls = embedder.remote_calls();
    run.cache_hits = embedder.cache_hits();
    run.elapsed_ms = ms_since(start);
    log_line(stage_log(run, "k=" + std::to_string(config.k)));
    return run;
}

StageRun run_rerank(const RunConfig& raw) {
    RunConfig config = raw.resolved();
    config.validate();
    auto start = Clock::now();
    StageRun run{"rerank"};

    require_input(config.records_path, "records");
    require_input(config.taxonomy_path, "taxonomy");
    require_input(config.candidates_path, "candidates");
    require_output(config.assignments_path, "assignments");

    if (!config.force &&
        output_fresh(config.assignments_path,
                     {config.candidates_path, config.records_path, config.taxonomy_path})) {
        run.skipped = true;
        run.elapsed_ms = ms_since(start);
        log_line(stage_log(run));
        return run;
    }

    Taxonomy taxonomy = Taxonomy::parse_file(config.taxonomy_path);
    RecordCollection records = RecordCollection::parse_file(config.records_path);
    std::vector<RankedCandidates> candidates = read_candidates(config.candidates_path);

    Reranker reranker(config.generator, taxonomy);
    std::vector<Assignment> assignments;
    assignments.reserve(candidates.size());
    for (const RankedCandidates& rc : candidates) {
        const Record* record = records.find(rc.record_id);
        if (record == nullptr) {
            fail(ErrorKind::Parse, "candidates refer to unknown record \"" + rc.record_id + "\"");
        }
        std::string text = render_text(*record, config.mode, records);
        try {
            RankedCandidates kept = reranker.rerank(*record, text, rc);
            Assignment a;
            a.record_id = rc.record_id;
            for (const ScoredSubject& s : kept.items) a.subjects.push_back(s.subject_id);
            assignments.push_back(std::move(a));
        } catch (const Error& e) {
            // Service failures abort the record, not the run.
            if (e.kind() != ErrorKind::Service) throw;
            reranker.note_failed_record();
            log_line("stage=rerank record=" + rc.record_id + " error=service detail=\"" +
                     std::string(e.what()) + "\"");
        }
    }
    write_assignments(config.assignments_path, assignments);
    write_snapshot(config, config.assignments_path);

    RerankStats stats = reranker.stats();
    run.items_out = assignments.size();
    run.remote_calls = stats.remote_calls;
    run.pairs_judged = stats.pairs_judged;
    run.unparseable = stats.unparseable;
    run.failed_records = stats.failed_records;
    run.elapsed_ms = ms_since(start);
    log_line(stage_log(run, "pairs_judged=" + std::to_string(stats.pairs_judged) +
                                " matches=" + std::to_string(stats.matches) +
                                " unparseable=" + std::to_string(stats.unparseable) +
                                " failed_records=" + std::to_string(stats.failed_records)));
    if (stats.failed_records > 0) {
        fail(ErrorKind::Service, "rerank: " + std::to_string(stats.failed_records) +
                                     " record(s) failed (assignments for the rest were written)");
    }
    return run;
}

namespace {

StageRun run_export(const RunConfig& config, bool sft) {
    auto start = Clock::now();
    StageRun run{sft ? "export-sft" : "export-sts"};

    require_input(config.records_path, "records");
    require_input(config.taxonomy_path, "taxonomy");
    const std::string& out_path = sft ? config.sft_path : config.sts_path;
    require_output(out_path, sft ? "sft_out" : "sts_out");

    if (!config.force &&
        output_fresh(out_path, {config.records_path, config.taxonomy_path})) {
        run.skipped = true;
        run.elapsed_ms = ms_since(start);
        log_line(stage_log(run));
        return run;
    }

    Taxonomy taxonomy = Taxonomy::parse_file(config.taxonomy_path);
    RecordCollection records = RecordCollection::parse_file(config.records_path);
    records.validate_against(taxonomy);

    GenPolicy policy{sft ? config.sft_cap : config.sts_cap, config.negative_ratio, config.seed};
    if (sft) {
        std::vector<SftSample> samples = generate_sft(records, taxonomy, policy, config.mode);
        write_sft_jsonl(out_path, samples, policy, config.mode);
        DatasetStats stats = dataset_stats(samples);
        run.items_out = stats.total;
        run.elapsed_ms = ms_since(start);
        log_line(stage_log(run, "positives=" + std::to_string(stats.positives) +
                                    " negatives=" + std::to_string(stats.negatives) +
                                    " records=" + std::to_string(stats.distinct_records) +
                                    " subjects=" + std::to_string(stats.distinct_subjects)));
    } else {
        std::vector<StsPair> pairs = generate_sts(records, taxonomy, policy, config.mode);
        write_sts_csv(out_path, pairs, policy, config.mode);
        DatasetStats stats = dataset_stats(pairs);
        run.items_out = stats.total;
        run.elapsed_ms = ms_since(start);
        log_line(stage_log(run, "positives=" + std::to_string(stats.positives) +
                                    " negatives=" + std::to_string(stats.negatives) +
                                    " records=" + std::to_string(stats.distinct_records) +
                                    " subjects=" + std::to_string(stats.distinct_subjects)));
    }
    write_snapshot(config, out_path);
    return run;
}

}  // namespace

StageRun run_export_sts(const RunConfig& raw) {
    RunConfig config = raw.resolved();
    config.validate();
    return run_export(config, false);
}

StageRun run_export_sft(const RunConfig& raw) {
    RunConfig config = raw.resolved();
    config.validate();
    return run_export(config, true);
}

StageRun run_evaluate(const RunConfig& raw) {
    RunConfig config = raw.resolved();
    config.validate();
    auto start = Clock::now();
    StageRun run{"evaluate"};

    require_input(config.records_path, "records");
    require_input(config.assignments_path, "assignments");
    require_output(config.report_dir, "report_dir");

    std::filesystem::path report_json = std::filesystem::path(config.report_dir) / "report.json";
    if (!config.force &&
        output_fresh(report_json.string(), {config.records_path, config.assignments_path})) {
        run.skipped = true;
        run.elapsed_ms = ms_since(start);
        log_line(stage_log(run));
        return run;
    }

    RecordCollection records = RecordCollection::parse_file(config.records_path);
    std::vector<Assignment> assignments = read_assignments(config.assignments_path);
    std::map<std::string, std::vector<std::string>> predictions;
    for (Assignment& a : assignments) {
        if (!predictions.emplace(a.record_id, std::move(a.subjects)).second) {
            fail(ErrorKind::Parse, "duplicate prediction line for record \"" + a.record_id + "\"");
        }
    }

    MetricReport report = evaluate(records, predictions, config.k_grid);
    emit_report(report, report_json, ReportFormat::Json);
    emit_report(report, std::filesystem::path(config.report_dir) / "report.csv", ReportFormat::Csv);
    emit_report(report, std::filesystem::path(config.report_dir) / "report.md",
                ReportFormat::Markdown);
    write_snapshot(config, report_json.string());

    run.items_out = report.rows.size();
    run.elapsed_ms = ms_since(start);
    log_line(stage_log(run, "records=" + std::to_string(records.size()) +
                                " predictions=" + std::to_string(predictions.size())));
    return run;
}

std::vector<StageRun> run_pipeline(const RunConfig& raw) {
    RunConfig config = raw.resolved();
    config.validate();
    // Sequential; earlier outputs stay on disk when a later stage fails.
    std::vector<StageRun> runs;
    runs.push_back(run_index(config));
    runs.push_back(run_retrieve(config));
    runs.push_back(run_rerank(config));
    runs.push_back(run_evaluate(config));
    return runs;
}

}  // namespace subjtag
