#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "subjtag/errors.hpp"
#include "subjtag/retrieval.hpp"
#include "subjtag/util.hpp"
#include "testutil.hpp"

using namespace subjtag;

namespace {

EmbeddingVector vec(std::vector<double> values) {
    return EmbeddingVector{std::move(values), "test"};
}

// Independent scan-sort used as the ranking oracle.
std::vector<ScoredSubject> oracle_topk(const std::vector<std::string>& ids,
                                       const std::vector<std::vector<double>>& vectors,
                                       const EmbeddingVector& query, int k) {
    std::vector<ScoredSubject> scored;
    scored.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        double dot = 0, na = 0, nb = 0;
        for (std::size_t d = 0; d < query.values.size(); ++d) {
            dot += query.values[d] * vectors[i][d];
            na += query.values[d] * query.values[d];
            nb += vectors[i][d] * vectors[i][d];
        }
        double score = dot / (std::sqrt(na) * std::sqrt(nb));
        score = std::min(1.0, std::max(-1.0, score));
        scored.push_back({ids[i], score});
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.subject_id < b.subject_id;
    });
    if (scored.size() > static_cast<std::size_t>(k)) scored.resize(k);
    return scored;
}

struct RandomIndex {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> vectors;
    SubjectIndex index;
};

RandomIndex make_random_index(std::size_t n, int dim, Rng& rng, testutil::TempDir& dir,
                              const std::string& name) {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> vectors;
    std::string file;
    file += "{\"model_id\":\"test\",\"dim\":" + std::to_string(dim) + "}\n";
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(testutil::subject_id(i));
        std::vector<double> v(dim);
        for (double& x : v) x = rng.unit() * 2.0 - 1.0;
        vectors.push_back(v);
        file += "{\"id\":\"" + ids.back() + "\",\"vec\":[";
        for (int d = 0; d < dim; ++d) {
            if (d > 0) file += ',';
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.17g", v[d]);
            file += buf;
        }
        file += "]}\n";
    }
    auto path = dir.file(name);
    write_file(path, file);
    RandomIndex out{std::move(ids), std::move(vectors), SubjectIndex::load_file(path)};
    return out;
}

}  // namespace

TEST_CASE("cosine basics") {
    CHECK(cosine(vec({1, 2, 3}), vec({1, 2, 3})) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine(vec({1, 0}), vec({0, 1})) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cosine(vec({1, 0}), vec({1, 1})) == doctest::Approx(0.70710678).epsilon(1e-6));
    CHECK(cosine(vec({1, 0}), vec({-1, 0})) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("cosine rejects bad input") {
    CHECK_THROWS_AS(cosine(vec({1, 0}), vec({1, 0, 0})), Error);
    CHECK_THROWS_AS(cosine(vec({0, 0}), vec({1, 0})), Error);
    CHECK_THROWS_AS(cosine(vec({}), vec({})), Error);
}

TEST_CASE("cosine stays within [-1, 1]") {
    Rng rng(5);
    for (int iter = 0; iter < 500; ++iter) {
        std::size_t dim = 1 + rng.bounded(16);
        std::vector<double> a(dim), b(dim);
        bool za = true, zb = true;
        for (std::size_t i = 0; i < dim; ++i) {
            a[i] = (rng.unit() - 0.5) * 1e3;
            b[i] = (rng.unit() - 0.5) * 1e3;
            za = za && a[i] == 0.0;
            zb = zb && b[i] == 0.0;
        }
        if (za || zb) continue;
        double c = cosine(vec(a), vec(b));
        CHECK(c <= 1.0);
        CHECK(c >= -1.0);
    }
}

TEST_CASE("query_topk caps k at the index size") {
    testutil::TempDir dir("retrieval");
    Rng rng(11);
    auto ri = make_random_index(2, 8, rng, dir, "idx.jsonl");
    EmbeddingVector q = vec(ri.vectors[0]);
    q.model_id = "test";
    RankedCandidates rc = ri.index.query_topk(q, 30, "r1");
    CHECK(rc.record_id == "r1");
    CHECK(rc.items.size() == 2);
}

TEST_CASE("query equal to a stored vector ranks it first with score 1") {
    testutil::TempDir dir("retrieval");
    Rng rng(12);
    auto ri = make_random_index(50, 16, rng, dir, "idx.jsonl");
    for (std::size_t probe : {std::size_t(0), std::size_t(17), std::size_t(49)}) {
        EmbeddingVector q = vec(ri.vectors[probe]);
        RankedCandidates rc = ri.index.query_topk(q, 5);
        REQUIRE(!rc.items.empty());
        CHECK(rc.items[0].subject_id == ri.ids[probe]);
        CHECK(rc.items[0].score == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("query_topk equals the brute-force oracle on a 1000-entry index") {
    testutil::TempDir dir("retrieval");
    Rng rng(13);
    auto ri = make_random_index(1000, 24, rng, dir, "idx.jsonl");
    for (int iter = 0; iter < 20; ++iter) {
        std::vector<double> q(24);
        for (double& x : q) x = rng.unit() * 2.0 - 1.0;
        auto got = ri.index.query_topk(vec(q), 10);
        auto expect = oracle_topk(ri.ids, ri.vectors, vec(q), 10);
        REQUIRE(got.items.size() == expect.size());
        for (std::size_t i = 0; i < expect.size(); ++i) {
            CHECK(got.items[i].subject_id == expect[i].subject_id);
            CHECK(got.items[i].score == expect[i].score);
        }
    }
}

TEST_CASE("rankings are invariant under positive query scaling") {
    testutil::TempDir dir("retrieval");
    Rng rng(14);
    auto ri = make_random_index(120, 12, rng, dir, "idx.jsonl");
    for (int iter = 0; iter < 30; ++iter) {
        std::vector<double> q(12);
        for (double& x : q) x = rng.unit() * 2.0 - 1.0;
        auto base = ri.index.query_topk(vec(q), 15);
        for (double scale : {0.25, 4.0, 1024.0}) {
            std::vector<double> scaled = q;
            for (double& x : scaled) x *= scale;
            auto got = ri.index.query_topk(vec(scaled), 15);
            REQUIRE(got.items.size() == base.items.size());
            for (std::size_t i = 0; i < base.items.size(); ++i) {
                CHECK(got.items[i].subject_id == base.items[i].subject_id);
                CHECK(std::abs(got.items[i].score - base.items[i].score) < 1e-9);
            }
        }
    }
}

TEST_CASE("topk(k) ids are contained in topk(k') for k' > k") {
    testutil::TempDir dir("retrieval");
    Rng rng(15);
    auto ri = make_random_index(200, 10, rng, dir, "idx.jsonl");
    for (int iter = 0; iter < 25; ++iter) {
        std::vector<double> q(10);
        for (double& x : q) x = rng.unit() * 2.0 - 1.0;
        auto small = ri.index.query_topk(vec(q), 5);
        auto large = ri.index.query_topk(vec(q), 25);
        for (const auto& item : small.items) {
            bool found = false;
            for (const auto& big : large.items) found = found || big.subject_id == item.subject_id;
            CHECK(found);
        }
    }
}

TEST_CASE("equal scores break ties by subject id") {
    // Three identical vectors: scores tie exactly.
    std::string file = "{\"model_id\":\"test\",\"dim\":2}\n";
    file += "{\"id\":\"gnd:c\",\"vec\":[1.0,0.0]}\n";
    file += "{\"id\":\"gnd:a\",\"vec\":[1.0,0.0]}\n";
    file += "{\"id\":\"gnd:b\",\"vec\":[1.0,0.0]}\n";
    testutil::TempDir dir("retrieval");
    auto path = dir.file("ties.jsonl");
    write_file(path, file);
    SubjectIndex index = SubjectIndex::load_file(path);
    auto rc = index.query_topk(vec({2.0, 0.0}), 3);
    REQUIRE(rc.items.size() == 3);
    CHECK(rc.items[0].subject_id == "gnd:a");
    CHECK(rc.items[1].subject_id == "gnd:b");
    CHECK(rc.items[2].subject_id == "gnd:c");
    CHECK(rc.items[0].score == 1.0);
}

TEST_CASE("query_topk validates input") {
    testutil::TempDir dir("retrieval");
    Rng rng(16);
    auto ri = make_random_index(10, 6, rng, dir, "idx.jsonl");
    CHECK_THROWS_AS(ri.index.query_topk(vec({1.0, 0.0}), 5), Error);   // dim mismatch
    CHECK_THROWS_AS(ri.index.query_topk(vec(ri.vectors[0]), 0), Error);  // k < 1
    SubjectIndex empty;
    CHECK_THROWS_AS(empty.query_topk(vec({1.0}), 1), Error);
}

TEST_CASE("index files round-trip byte-identically") {
    testutil::TempDir dir("retrieval");
    auto tax = testutil::make_taxonomy(30);
    EmbedderConfig config;
    config.dim = 48;
    Embedder embedder(config);
    SubjectIndex index = SubjectIndex::build(tax, embedder);
    CHECK(index.size() == 30);
    CHECK(index.model_id() == kFallbackModelId);

    auto p1 = dir.file("i1.jsonl");
    auto p2 = dir.file("i2.jsonl");
    index.write_file(p1);
    SubjectIndex::load_file(p1).write_file(p2);
    CHECK(read_file(p1) == read_file(p2));
}

TEST_CASE("index load validates dims per line") {
    testutil::TempDir dir("retrieval");
    auto path = dir.file("bad.jsonl");
    write_file(path,
               "{\"model_id\":\"m\",\"dim\":3}\n"
               "{\"id\":\"a\",\"vec\":[1.0,2.0,3.0]}\n"
               "{\"id\":\"b\",\"vec\":[1.0,2.0]}\n");
    try {
        SubjectIndex::load_file(path);
        FAIL("expected dim validation error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parse);
        CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
}

TEST_CASE("candidates files round-trip byte-identically") {
    testutil::TempDir dir("retrieval");
    std::vector<RankedCandidates> cands;
    cands.push_back({"r1", {{"gnd:a", 0.9312512351}, {"gnd:b", 0.5}}});
    cands.push_back({"r2", {}});
    auto p1 = dir.file("c1.jsonl");
    auto p2 = dir.file("c2.jsonl");
    write_candidates(p1, cands);
    write_candidates(p2, read_candidates(p1));
    CHECK(read_file(p1) == read_file(p2));
}
