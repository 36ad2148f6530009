#include "subjtag/retrieval.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "subjtag/errors.hpp"
#include "subjtag/util.hpp"

namespace subjtag {

using ordered_json = nlohmann::ordered_json;

namespace {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double norm2(const double* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * a[i];
    return s;
}

double clamp_unit(double x) { return x < -1.0 ? -1.0 : (x > 1.0 ? 1.0 : x); }

}  // namespace

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        fail(ErrorKind::Config, "cosine: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                                    std::to_string(b.dim()) + ")");
    }
    if (a.dim() == 0) fail(ErrorKind::Config, "cosine: empty vector");
    double na = norm2(a.values.data(), a.dim());
    double nb = norm2(b.values.data(), b.dim());
    if (na == 0.0 || nb == 0.0) fail(ErrorKind::Config, "cosine: zero-norm vector");
    return clamp_unit(dot(a.values.data(), b.values.data(), a.dim()) /
                      (std::sqrt(na) * std::sqrt(nb)));
}

SubjectIndex::SubjectIndex(std::string model_id, int dim, std::vector<std::string> ids,
                           std::vector<double> data)
    : model_id_(std::move(model_id)), dim_(dim), ids_(std::move(ids)), data_(std::move(data)) {
    norms_.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        double n2 = norm2(data_.data() + i * static_cast<std::size_t>(dim_),
                          static_cast<std::size_t>(dim_));
        norms_.push_back(std::sqrt(n2));
    }
}

SubjectIndex SubjectIndex::build(const Taxonomy& taxonomy, Embedder& embedder) {
    if (taxonomy.size() == 0) fail(ErrorKind::Config, "build_index: empty taxonomy");

    // Taxonomy iteration is already id-sorted.
    std::vector<std::string> ids;
    std::vector<std::string> texts;
    ids.reserve(taxonomy.size());
    texts.reserve(taxonomy.size());
    for (const Subject& s : taxonomy.subjects()) {
        ids.push_back(s.id);
        texts.push_back(subject_text(s));
    }

    std::vector<EmbeddingVector> vecs = embedder.embed(texts);
    int dim = static_cast<int>(vecs.front().dim());
    std::vector<double> data;
    data.reserve(vecs.size() * static_cast<std::size_t>(dim));
    for (const EmbeddingVector& v : vecs) {
        data.insert(data.end(), v.values.begin(), v.values.end());
    }
    return SubjectIndex(embedder.model_id(), dim, std::move(ids), std::move(data));
}

SubjectIndex SubjectIndex::from_entries(
    std::string model_id, std::vector<std::pair<std::string, std::vector<double>>> entries) {
    if (entries.empty()) fail(ErrorKind::Config, "from_entries: no entries");
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::size_t dim = entries.front().second.size();
    if (dim == 0) fail(ErrorKind::Config, "from_entries: zero-dimensional vectors");

    std::vector<std::string> ids;
    std::vector<double> data;
    ids.reserve(entries.size());
    data.reserve(entries.size() * dim);
    for (auto& [id, vec] : entries) {
        if (!ids.empty() && ids.back() == id) {
            fail(ErrorKind::Config, "from_entries: duplicate subject id \"" + id + "\"");
        }
        if (vec.size() != dim) fail(ErrorKind::Config, "from_entries: inconsistent dims");
        for (double v : vec) {
            if (!std::isfinite(v)) fail(ErrorKind::Config, "from_entries: non-finite component");
        }
        ids.push_back(std::move(id));
        data.insert(data.end(), vec.begin(), vec.end());
    }
    return SubjectIndex(std::move(model_id), static_cast<int>(dim), std::move(ids),
                        std::move(data));
}

RankedCandidates SubjectIndex::query_topk(const EmbeddingVector& query, int k,
                                          std::string record_id) const {
    if (ids_.empty()) fail(ErrorKind::Config, "query_topk: empty index");
    if (k < 1) fail(ErrorKind::Config, "query_topk: k must be >= 1");
    if (query.dim() != static_cast<std::size_t>(dim_)) {
        fail(ErrorKind::Config, "query_topk: query dim " + std::to_string(query.dim()) +
                                    " does not match index dim " + std::to_string(dim_));
    }
    double qn2 = norm2(query.values.data(), query.dim());
    if (qn2 == 0.0) fail(ErrorKind::Config, "query_topk: zero-norm query");
    double qn = std::sqrt(qn2);

    std::vector<std::pair<double, std::size_t>> scored(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        double d = dot(query.values.data(), data_.data() + i * static_cast<std::size_t>(dim_),
                       static_cast<std::size_t>(dim_));
        scored[i] = {clamp_unit(d / (qn * norms_[i])), i};
    }
    auto better = [this](const std::pair<double, std::size_t>& a,
                         const std::pair<double, std::size_t>& b) {
        if (a.first != b.first) return a.first > b.first;
        return ids_[a.second] < ids_[b.second];
    };
    std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), scored.size());
    std::partial_sort(scored.begin(), scored.begin() + take, scored.end(), better);

    RankedCandidates out;
    out.record_id = std::move(record_id);
    out.items.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        out.items.push_back(ScoredSubject{ids_[scored[i].second], scored[i].first});
    }
    return out;
}

SubjectIndex SubjectIndex::load_file(const std::filesystem::path& path) {
    std::vector<std::string> lines = read_lines(path);
    if (lines.empty()) fail(ErrorKind::Parse, path.string() + ": empty index file");

    std::string model_id;
    std::size_t dim = 0;
    try {
        ordered_json header = ordered_json::parse(lines[0]);
        model_id = header.at("model_id").get<std::string>();
        dim = header.at("dim").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, path.string() + ":1: bad index header: " + e.what());
    }
    if (dim == 0) fail(ErrorKind::Parse, path.string() + ": index dim must be positive");

    std::vector<std::pair<std::string, std::vector<double>>> entries;
    entries.reserve(lines.size() - 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        try {
            ordered_json j = ordered_json::parse(lines[i]);
            std::string id = j.at("id").get<std::string>();
            std::vector<double> vec = j.at("vec").get<std::vector<double>>();
            if (vec.size() != dim) {
                fail(ErrorKind::Parse, path.string() + ":" + std::to_string(i + 1) +
                                           ": vector dim " + std::to_string(vec.size()) +
                                           " does not match header dim " + std::to_string(dim));
            }
            for (double v : vec) {
                if (!std::isfinite(v)) {
                    fail(ErrorKind::Parse, path.string() + ":" + std::to_string(i + 1) +
                                               ": non-finite component");
                }
            }
            entries.emplace_back(std::move(id), std::move(vec));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Parse,
                 path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    if (entries.empty()) fail(ErrorKind::Parse, path.string() + ": index has no entries");

    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::string> ids;
    std::vector<double> data;
    ids.reserve(entries.size());
    data.reserve(entries.size() * dim);
    for (auto& [id, vec] : entries) {
        if (!ids.empty() && ids.back() == id) {
            fail(ErrorKind::Parse, path.string() + ": duplicate subject id \"" + id + "\"");
        }
        ids.push_back(std::move(id));
        data.insert(data.end(), vec.begin(), vec.end());
    }
    return SubjectIndex(std::move(model_id), static_cast<int>(dim), std::move(ids),
                        std::move(data));
}

void SubjectIndex::write_file(const std::filesystem::path& path) const {
    ordered_json header;
    header["model_id"] = model_id_;
    header["dim"] = dim_;
    std::string out = header.dump();
    out += '\n';
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        ordered_json j;
        j["id"] = ids_[i];
        j["vec"] = std::vector<double>(data_.begin() + i * static_cast<std::size_t>(dim_),
                                       data_.begin() + (i + 1) * static_cast<std::size_t>(dim_));
        out += j.dump();
        out += '\n';
    }
    subjtag::write_file(path, out);
}

void write_candidates(const std::filesystem::path& path,
                      const std::vector<RankedCandidates>& candidates) {
    std::string out;
    for (const RankedCandidates& rc : candidates) {
        ordered_json items = ordered_json::array();
        for (const ScoredSubject& s : rc.items) {
            ordered_json item;
            item["id"] = s.subject_id;
            item["score"] = s.score;
            items.push_back(std::move(item));
        }
        ordered_json j;
        j["record_id"] = rc.record_id;
        j["candidates"] = std::move(items);
        out += j.dump();
        out += '\n';
    }
    subjtag::write_file(path, out);
}

std::vector<RankedCandidates> read_candidates(const std::filesystem::path& path) {
    std::vector<RankedCandidates> out;
    std::vector<std::string> lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        try {
            ordered_json j = ordered_json::parse(lines[i]);
            RankedCandidates rc;
            rc.record_id = j.at("record_id").get<std::string>();
            for (const auto& item : j.at("candidates")) {
                rc.items.push_back(ScoredSubject{item.at("id").get<std::string>(),
                                                 item.at("score").get<double>()});
            }
            out.push_back(std::move(rc));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Parse, path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace subjtag
