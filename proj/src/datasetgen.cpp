#include "subjtag/datasetgen.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <json.hpp>

#include "subjtag/errors.hpp"
#include "subjtag/reranker.hpp"
#include "subjtag/util.hpp"

namespace subjtag {

using ordered_json = nlohmann::ordered_json;

void GenPolicy::validate() const {
    if (per_record_cap < 1) fail(ErrorKind::Config, "policy: per_record_cap must be positive");
    if (!(negative_ratio > 0.0)) fail(ErrorKind::Config, "policy: negative_ratio must be > 0");
}

namespace {

struct PairSelection {
    std::vector<const Subject*> positives;  // subject_id order
    std::vector<const Subject*> negatives;  // subject_id order
};

// Deterministic per-record stream: the record id is hashed into the FNV
// state seeded by rng_seed, so reordering records never changes a record's
// negatives.
std::uint64_t record_stream_seed(std::uint64_t rng_seed, const std::string& record_id) {
    return fnv1a64(record_id, kFnvOffset ^ rng_seed);
}

PairSelection select_pairs(const Record& record, const Taxonomy& taxonomy,
                           const GenPolicy& policy) {
    PairSelection sel;

    std::vector<const Subject*> gold;
    gold.reserve(record.gold_subjects.size());
    for (const std::string& sid : record.gold_subjects) {
        const Subject* s = taxonomy.find(sid);
        if (s == nullptr) {
            fail(ErrorKind::Parse,
                 "record \"" + record.id + "\": gold subject \"" + sid + "\" not in taxonomy");
        }
        gold.push_back(s);
    }
    std::sort(gold.begin(), gold.end(),
              [](const Subject* a, const Subject* b) { return a->id < b->id; });

    // Positive budget so that positives + ratio*positives fits the cap.
    auto positive_budget = static_cast<std::size_t>(
        static_cast<double>(policy.per_record_cap) / (1.0 + policy.negative_ratio));
    std::size_t n_pos = std::min(gold.size(), positive_budget);
    sel.positives.assign(gold.begin(), gold.begin() + n_pos);

    auto n_neg = static_cast<std::size_t>(
        std::llround(static_cast<double>(n_pos) * policy.negative_ratio));
    n_neg = std::min(n_neg, static_cast<std::size_t>(policy.per_record_cap) - n_pos);
    if (n_neg == 0) return sel;

    std::unordered_set<std::string> gold_ids;
    for (const Subject* s : gold) gold_ids.insert(s->id);
    std::vector<const Subject*> pool;
    pool.reserve(taxonomy.size());
    for (const Subject& s : taxonomy.subjects()) {  // id-sorted
        if (!gold_ids.contains(s.id)) pool.push_back(&s);
    }
    if (pool.size() < n_neg) {
        fail(ErrorKind::Config, "record \"" + record.id + "\": taxonomy too small to supply " +
                                    std::to_string(n_neg) + " negatives (only " +
                                    std::to_string(pool.size()) + " non-gold subjects)");
    }

    // Partial Fisher-Yates over the id-sorted pool.
    Rng rng(record_stream_seed(policy.rng_seed, record.id));
    for (std::size_t i = 0; i < n_neg; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.bounded(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    sel.negatives.assign(pool.begin(), pool.begin() + n_neg);
    std::sort(sel.negatives.begin(), sel.negatives.end(),
              [](const Subject* a, const Subject* b) { return a->id < b->id; });
    return sel;
}

}  // namespace

std::vector<StsPair> generate_sts(const RecordCollection& records, const Taxonomy& taxonomy,
                                  const GenPolicy& policy, RepresentationMode mode) {
    policy.validate();
    std::vector<StsPair> out;
    for (const Record& record : records.records()) {
        PairSelection sel = select_pairs(record, taxonomy, policy);
        std::string text = render_text(record, mode, records);
        for (const Subject* s : sel.positives) {
            out.push_back(StsPair{record.id, s->id, text, subject_text(*s), 1});
        }
        for (const Subject* s : sel.negatives) {
            out.push_back(StsPair{record.id, s->id, text, subject_text(*s), 0});
        }
    }
    return out;
}

std::vector<SftSample> generate_sft(const RecordCollection& records, const Taxonomy& taxonomy,
                                    const GenPolicy& policy, RepresentationMode mode) {
    policy.validate();
    std::vector<SftSample> out;
    for (const Record& record : records.records()) {
        PairSelection sel = select_pairs(record, taxonomy, policy);
        std::string text = render_text(record, mode, records);
        for (const Subject* s : sel.positives) {
            out.push_back(SftSample{record.id, s->id,
                                    build_prompt(text, subject_text(*s)).rendered, true});
        }
        for (const Subject* s : sel.negatives) {
            out.push_back(SftSample{record.id, s->id,
                                    build_prompt(text, subject_text(*s)).rendered, false});
        }
    }
    return out;
}

namespace {

template <typename T, typename IsPositive>
DatasetStats stats_impl(const std::vector<T>& items, IsPositive is_positive) {
    DatasetStats s;
    std::unordered_set<std::string> records;
    std::unordered_set<std::string> subjects;
    for (const T& item : items) {
        ++s.total;
        if (is_positive(item)) ++s.positives;
        else ++s.negatives;
        records.insert(item.record_id);
        subjects.insert(item.subject_id);
    }
    s.distinct_records = records.size();
    s.distinct_subjects = subjects.size();
    return s;
}

}  // namespace

DatasetStats dataset_stats(const std::vector<StsPair>& pairs) {
    return stats_impl(pairs, [](const StsPair& p) { return p.score == 1; });
}

DatasetStats dataset_stats(const std::vector<SftSample>& samples) {
    return stats_impl(samples, [](const SftSample& s) { return s.match; });
}

void write_sts_csv(const std::filesystem::path& path, const std::vector<StsPair>& pairs,
                   const GenPolicy& policy, RepresentationMode mode) {
    std::string out = "# seed=" + std::to_string(policy.rng_seed) +
                      " cap=" + std::to_string(policy.per_record_cap) + " mode=" +
                      to_string(mode) + "\n";
    out += "sentence1,sentence2,score\n";
    for (const StsPair& p : pairs) {
        out += csv_field(p.sentence1);
        out += ',';
        out += csv_field(p.sentence2);
        out += ',';
        out += std::to_string(p.score);
        out += '\n';
    }
    write_file(path, out);
}

void write_sft_jsonl(const std::filesystem::path& path, const std::vector<SftSample>& samples,
                     const GenPolicy& policy, RepresentationMode mode) {
    ordered_json meta;
    meta["seed"] = policy.rng_seed;
    meta["cap"] = policy.per_record_cap;
    meta["mode"] = to_string(mode);
    // The cap counts positives and negatives jointly.
    meta["cap_scope"] = "record_total";
    ordered_json header;
    header["_meta"] = std::move(meta);

    std::string out = header.dump();
    out += '\n';
    for (const SftSample& s : samples) {
        ordered_json j;
        j["prompt"] = s.prompt;
        j["label"] = s.match ? "yes" : "no";
        out += j.dump();
        out += '\n';
    }
    write_file(path, out);
}

}  // namespace subjtag
