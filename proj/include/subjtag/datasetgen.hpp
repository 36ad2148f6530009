#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "subjtag/corpus.hpp"

namespace subjtag {

struct GenPolicy {
    int per_record_cap = 600;     // total pair budget per record (positives + negatives)
    double negative_ratio = 1.0;  // negatives per positive; 1.0 = balanced
    std::uint64_t rng_seed = 42;

    void validate() const;
};

/// One contrastive sentence pair. record_id/subject_id are provenance and
/// are not serialized.
struct StsPair {
    std::string record_id;
    std::string subject_id;
    std::string sentence1;  // record text
    std::string sentence2;  // subject label
    int score = 0;          // 1 gold, 0 sampled negative
};

/// One prompt-formatted yes/no sample.
struct SftSample {
    std::string record_id;
    std::string subject_id;
    std::string prompt;
    bool match = false;  // label: yes/no
};

/// Per record: all gold subjects up to the positive budget, then the same
/// number of negatives (scaled by negative_ratio) sampled uniformly without
/// replacement from taxonomy-minus-gold. The sampling stream is derived from
/// (rng_seed, record.id), so output is independent of processing order.
/// Output: records in input order, positives before negatives, each block in
/// subject_id order.
std::vector<StsPair> generate_sts(const RecordCollection& records, const Taxonomy& taxonomy,
                                  const GenPolicy& policy, RepresentationMode mode);

/// Same selection rules; pairs are rendered through the canonical prompt.
std::vector<SftSample> generate_sft(const RecordCollection& records, const Taxonomy& taxonomy,
                                    const GenPolicy& policy, RepresentationMode mode);

struct DatasetStats {
    std::size_t total = 0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::size_t distinct_records = 0;
    std::size_t distinct_subjects = 0;
};

DatasetStats dataset_stats(const std::vector<StsPair>& pairs);
DatasetStats dataset_stats(const std::vector<SftSample>& samples);

// CSV with a "# seed=<n> cap=<n> mode=<mode>" comment line, then the
// "sentence1,sentence2,score" header, RFC 4180 quoting.
void write_sts_csv(const std::filesystem::path& path, const std::vector<StsPair>& pairs,
                   const GenPolicy& policy, RepresentationMode mode);

// JSON Lines with a leading {"_meta": {...}} object.
void write_sft_jsonl(const std::filesystem::path& path, const std::vector<SftSample>& samples,
                     const GenPolicy& policy, RepresentationMode mode);

}  // namespace subjtag
