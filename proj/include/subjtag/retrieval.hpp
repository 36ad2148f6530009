#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "subjtag/corpus.hpp"
#include "subjtag/embedder.hpp"

namespace subjtag {

/// dot(a,b) / (|a||b|), clamped to [-1, 1]. Rejects dimension mismatches and
/// zero-norm inputs.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct ScoredSubject {
    std::string subject_id;
    double score;
};

struct RankedCandidates {
    std::string record_id;
    std::vector<ScoredSubject> items;  // score descending, ties by id ascending
};

/// Exact brute-force similarity index over all subject embeddings. Immutable
/// after construction; concurrent queries are safe.
class SubjectIndex {
public:
    SubjectIndex() = default;

    /// Embeds every subject's text (one entry per subject, sorted by id).
    static SubjectIndex build(const Taxonomy& taxonomy, Embedder& embedder);

    /// Index over precomputed embeddings; entries are sorted by id here.
    static SubjectIndex from_entries(std::string model_id,
                                     std::vector<std::pair<std::string, std::vector<double>>> entries);

    static SubjectIndex load_file(const std::filesystem::path& path);
    void write_file(const std::filesystem::path& path) const;

    /// Top-k by cosine similarity; returns min(k, size()) items. Equivalent
    /// to a full scan-sort under (score desc, id asc) ordering.
    RankedCandidates query_topk(const EmbeddingVector& query, int k,
                                std::string record_id = {}) const;

    std::size_t size() const { return ids_.size(); }
    const std::string& model_id() const { return model_id_; }
    int dim() const { return dim_; }
    const std::vector<std::string>& ids() const { return ids_; }

private:
    SubjectIndex(std::string model_id, int dim, std::vector<std::string> ids,
                 std::vector<double> data);

    std::string model_id_;
    int dim_ = 0;
    std::vector<std::string> ids_;  // ascending
    std::vector<double> data_;      // row-major, ids_.size() x dim_
    std::vector<double> norms_;
};

void write_candidates(const std::filesystem::path& path,
                      const std::vector<RankedCandidates>& candidates);
std::vector<RankedCandidates> read_candidates(const std::filesystem::path& path);

}  // namespace subjtag
