#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "subjtag/corpus.hpp"
#include "subjtag/retrieval.hpp"

namespace subjtag {

// Canonical yes/no judging prompt; "{record}" and "{subject}" are the only
// variable parts. Frozen so runs stay comparable.
inline constexpr const char* kPromptTemplate =
    "Determine whether the following subject tag is a correct index term for the bibliographic "
    "record. Answer yes or no.\nRecord: {record}\nSubject: {subject}\nAnswer:";

struct MatchPrompt {
    std::string record_text;
    std::string subject_label;
    std::string rendered;
};

/// Pure function of its two inputs; both must be non-empty.
MatchPrompt build_prompt(const std::string& record_text, const std::string& subject_label);

enum class Verdict { Match, NoMatch, Unparseable };

struct MatchDecision {
    Verdict verdict;
    std::string raw_reply;
};

/// Total, deterministic. The reply's first alphabetical token decides:
/// "yes" -> Match, "no" -> NoMatch, anything else -> Unparseable.
MatchDecision parse_decision(std::string_view reply);

enum class GeneratorBackend { RemoteService, MockOracle, MockAcceptAll };

struct GeneratorConfig {
    GeneratorBackend backend = GeneratorBackend::MockAcceptAll;
    std::string endpoint_url;  // RemoteService only
    int max_tokens = 8;
    std::chrono::milliseconds timeout{10000};
    int max_retries = 2;
    int max_in_flight = 4;  // concurrent remote judgments

    void validate() const;
};

struct RerankStats {
    std::uint64_t pairs_judged = 0;
    std::uint64_t matches = 0;
    std::uint64_t no_matches = 0;
    std::uint64_t unparseable = 0;  // counted as NoMatch downstream
    std::uint64_t failed_records = 0;
    std::uint64_t remote_calls = 0;
};

/// Judges each (record, candidate) pair independently and keeps the
/// Match-verdict subsequence; never reorders, never invents subjects.
class Reranker {
public:
    Reranker(GeneratorConfig config, const Taxonomy& taxonomy);

    /// record_text is the record's rendered representation for the run's
    /// mode. Throws Error(Service) when the generation service stays
    /// unreachable for some pair; the caller decides record-level isolation.
    RankedCandidates rerank(const Record& record, const std::string& record_text,
                            const RankedCandidates& candidates);

    RerankStats stats() const;
    void note_failed_record() { ++stats_.failed_records; }

private:
    Verdict judge_remote(const std::string& prompt);

    GeneratorConfig config_;
    const Taxonomy& taxonomy_;
    RerankStats stats_;
    std::atomic<std::uint64_t> remote_calls_{0};
};

struct Assignment {
    std::string record_id;
    std::vector<std::string> subjects;  // rank order preserved
};

void write_assignments(const std::filesystem::path& path,
                       const std::vector<Assignment>& assignments);
std::vector<Assignment> read_assignments(const std::filesystem::path& path);

}  // namespace subjtag
