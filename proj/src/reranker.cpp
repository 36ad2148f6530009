#include "subjtag/reranker.hpp"

#include <atomic>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "subjtag/errors.hpp"
#include "subjtag/util.hpp"

namespace subjtag {

using ordered_json = nlohmann::ordered_json;

void GeneratorConfig::validate() const {
    if (backend == GeneratorBackend::RemoteService && endpoint_url.empty()) {
        fail(ErrorKind::Config, "generator: remote backend requires endpoint_url");
    }
    if (max_tokens < 1) fail(ErrorKind::Config, "generator: max_tokens must be positive");
    if (max_retries < 0) fail(ErrorKind::Config, "generator: max_retries must be >= 0");
    if (max_in_flight < 1) fail(ErrorKind::Config, "generator: max_in_flight must be positive");
    if (timeout.count() <= 0) fail(ErrorKind::Config, "generator: timeout must be positive");
}

MatchPrompt build_prompt(const std::string& record_text, const std::string& subject_label) {
    if (record_text.empty()) fail(ErrorKind::Config, "build_prompt: empty record text");
    if (subject_label.empty()) fail(ErrorKind::Config, "build_prompt: empty subject label");

    std::string rendered = kPromptTemplate;
    auto substitute = [&rendered](std::string_view slot, const std::string& value) {
        std::size_t pos = rendered.find(slot);
        rendered.replace(pos, slot.size(), value);
    };
    substitute("{record}", record_text);
    substitute("{subject}", subject_label);
    return MatchPrompt{record_text, subject_label, std::move(rendered)};
}

MatchDecision parse_decision(std::string_view reply) {
    std::string lowered = lower_ascii(trim(reply));
    // First maximal run of alphabetical characters.
    std::size_t start = 0;
    while (start < lowered.size() && (lowered[start] < 'a' || lowered[start] > 'z')) ++start;
    std::size_t end = start;
    while (end < lowered.size() && lowered[end] >= 'a' && lowered[end] <= 'z') ++end;
    std::string token = lowered.substr(start, end - start);

    Verdict verdict = Verdict::Unparseable;
    if (token == "yes") verdict = Verdict::Match;
    else if (token == "no") verdict = Verdict::NoMatch;
    return MatchDecision{verdict, std::string(reply)};
}

Reranker::Reranker(GeneratorConfig config, const Taxonomy& taxonomy)
    : config_(std::move(config)), taxonomy_(taxonomy) {
    config_.validate();
}

// Thread-safe: shared state is limited to the atomic call counter.
Verdict Reranker::judge_remote(const std::string& prompt) {
    ordered_json req;
    req["prompt"] = prompt;
    req["max_tokens"] = config_.max_tokens;
    const std::string body = req.dump();

    httplib::Client client(config_.endpoint_url);
    double seconds = static_cast<double>(config_.timeout.count()) / 1000.0;
    client.set_connection_timeout(seconds);
    client.set_read_timeout(seconds);
    client.set_write_timeout(seconds);

    httplib::Result res;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
        res = client.Post("/v1/generate", body, "application/json");
        remote_calls_.fetch_add(1, std::memory_order_relaxed);
        if (res && res->status == 200) break;
    }
    if (!res || res->status != 200) {
        std::string detail = res ? "HTTP " + std::to_string(res->status)
                                 : httplib::to_string(res.error());
        fail(ErrorKind::Service, "generation service unreachable after " +
                                     std::to_string(config_.max_retries + 1) + " attempts (" +
                                     detail + "): " + config_.endpoint_url);
    }

    std::string text;
    try {
        text = ordered_json::parse(res->body).at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Service, std::string("generation service response malformed: ") + e.what());
    }
    return parse_decision(text).verdict;
}

RankedCandidates Reranker::rerank(const Record& record, const std::string& record_text,
                                  const RankedCandidates& candidates) {
    std::vector<Verdict> verdicts(candidates.items.size(), Verdict::NoMatch);

    switch (config_.backend) {
        case GeneratorBackend::MockAcceptAll:
            for (auto& v : verdicts) v = Verdict::Match;
            break;
        case GeneratorBackend::MockOracle:
            for (std::size_t i = 0; i < candidates.items.size(); ++i) {
                verdicts[i] = record.has_gold(candidates.items[i].subject_id) ? Verdict::Match
                                                                              : Verdict::NoMatch;
            }
            break;
        case GeneratorBackend::RemoteService: {
            // Prompts first, so a missing subject label fails before any call.
            std::vector<std::string> prompts(candidates.items.size());
            for (std::size_t i = 0; i < candidates.items.size(); ++i) {
                const std::string& sid = candidates.items[i].subject_id;
                const Subject* subject = taxonomy_.find(sid);
                if (subject == nullptr) {
                    fail(ErrorKind::Parse, "rerank: candidate subject \"" + sid +
                                               "\" not in taxonomy (record \"" + record.id + "\")");
                }
                prompts[i] = build_prompt(record_text, subject_text(*subject)).rendered;
            }

            // Pairwise judgments are independent; run up to max_in_flight at
            // once and reassemble by position.
            std::size_t workers = std::min<std::size_t>(
                static_cast<std::size_t>(config_.max_in_flight), prompts.size());
            if (workers <= 1) {
                for (std::size_t i = 0; i < prompts.size(); ++i) {
                    verdicts[i] = judge_remote(prompts[i]);
                }
            } else {
                std::atomic<std::size_t> next{0};
                std::vector<std::exception_ptr> failures(workers);
                std::vector<std::thread> pool;
                pool.reserve(workers);
                for (std::size_t w = 0; w < workers; ++w) {
                    pool.emplace_back([&, w] {
                        try {
                            for (;;) {
                                std::size_t i = next.fetch_add(1);
                                if (i >= prompts.size()) return;
                                verdicts[i] = judge_remote(prompts[i]);
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
            break;
        }
    }

    RankedCandidates out;
    out.record_id = candidates.record_id.empty() ? record.id : candidates.record_id;
    for (std::size_t i = 0; i < candidates.items.size(); ++i) {
        ++stats_.pairs_judged;
        switch (verdicts[i]) {
            case Verdict::Match:
                ++stats_.matches;
                out.items.push_back(candidates.items[i]);
                break;
            case Verdict::NoMatch:
                ++stats_.no_matches;
                break;
            case Verdict::Unparseable:
                // Conservative: unparseable replies drop the candidate.
                ++stats_.unparseable;
                ++stats_.no_matches;
                break;
        }
    }
    return out;
}

RerankStats Reranker::stats() const {
    RerankStats s = stats_;
    s.remote_calls = remote_calls_.load(std::memory_order_relaxed);
    return s;
}

void write_assignments(const std::filesystem::path& path,
                       const std::vector<Assignment>& assignments) {
    std::string out;
    for (const Assignment& a : assignments) {
        ordered_json j;
        j["record_id"] = a.record_id;
        j["subjects"] = a.subjects;
        out += j.dump();
        out += '\n';
    }
    write_file(path, out);
}

std::vector<Assignment> read_assignments(const std::filesystem::path& path) {
    std::vector<Assignment> out;
    std::vector<std::string> lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        try {
            ordered_json j = ordered_json::parse(lines[i]);
            Assignment a;
            a.record_id = j.at("record_id").get<std::string>();
            a.subjects = j.at("subjects").get<std::vector<std::string>>();
            out.push_back(std::move(a));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Parse, path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace subjtag
