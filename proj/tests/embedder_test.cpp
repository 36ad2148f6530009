#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "subjtag/embedder.hpp"
#include "subjtag/errors.hpp"
#include "subjtag/sha256.hpp"
#include "subjtag/util.hpp"
#include "testutil.hpp"

using namespace subjtag;

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    // 56 bytes forces the two-block padding path.
    CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("fallback_embed matches the hand-computed trigram oracle") {
    // "ab" pads to "#ab#": trigrams "#ab" and "ab#".
    // FNV-1a64("#ab") = 0xcd37b517d45747d1 -> bucket 1 (mod 4)
    // FNV-1a64("ab#") = 0xe71fe2190541c40b -> bucket 3 (mod 4)
    CHECK(fnv1a64("#ab") == 0xcd37b517d45747d1ull);
    CHECK(fnv1a64("ab#") == 0xe71fe2190541c40bull);

    EmbeddingVector v = fallback_embed("ab", 4);
    REQUIRE(v.dim() == 4);
    CHECK(v.model_id == kFallbackModelId);
    double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(v.values[0] == 0.0);
    CHECK(v.values[1] == doctest::Approx(inv_sqrt2).epsilon(1e-12));
    CHECK(v.values[2] == 0.0);
    CHECK(v.values[3] == doctest::Approx(inv_sqrt2).epsilon(1e-12));
}

TEST_CASE("fallback_embed on a word: unit norm, expected buckets") {
    // "laser" trigrams hash to buckets {33,55,85,111,248} mod 256, one hit each.
    EmbeddingVector v = fallback_embed("Laser", 256);
    REQUIRE(v.dim() == 256);
    double inv_sqrt5 = 1.0 / std::sqrt(5.0);
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < v.values.size(); ++i) {
        if (v.values[i] != 0.0) {
            ++nonzero;
            CHECK(v.values[i] == doctest::Approx(inv_sqrt5).epsilon(1e-12));
            bool expected = i == 33 || i == 55 || i == 85 || i == 111 || i == 248;
            CHECK(expected);
        }
    }
    CHECK(nonzero == 5);
}

TEST_CASE("fallback_embed determinism and case folding") {
    CHECK(fallback_embed("Laser", 64).values == fallback_embed("Laser", 64).values);
    CHECK(fallback_embed("LASER", 64).values == fallback_embed("laser", 64).values);
    CHECK(fallback_embed("a", 8).values == fallback_embed("A", 8).values);
    CHECK_THROWS_AS(fallback_embed("", 8), Error);
    CHECK_THROWS_AS(fallback_embed("  ", 8), Error);
    CHECK_THROWS_AS(fallback_embed("ok", 1), Error);
}

TEST_CASE("fallback_embed unit norm over random strings") {
    Rng rng(123);
    for (int iter = 0; iter < 300; ++iter) {
        std::string text;
        std::size_t len = 1 + rng.bounded(40);
        for (std::size_t i = 0; i < len; ++i) {
            text += static_cast<char>(32 + rng.bounded(95));
        }
        if (trim(text).empty()) continue;
        int dim = 2 + static_cast<int>(rng.bounded(500));
        EmbeddingVector v = fallback_embed(text, dim);
        double norm2 = 0;
        for (double x : v.values) norm2 += x * x;
        CHECK(std::abs(std::sqrt(norm2) - 1.0) < 1e-6);
        // Pure function of (text, dim).
        CHECK(fallback_embed(text, dim).values == v.values);
    }
}

TEST_CASE("embed preserves order and batch boundaries") {
    EmbedderConfig config;
    config.backend = EmbedderBackend::DeterministicFallback;
    config.dim = 32;
    config.batch_size = 3;
    Embedder embedder(config);
    std::vector<std::string> texts = {"a", "b", "a", "c", "b", "a", "d"};
    auto vecs = embedder.embed(texts);
    REQUIRE(vecs.size() == texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        CHECK(vecs[i].values == fallback_embed(texts[i], 32).values);
        CHECK(vecs[i].model_id == kFallbackModelId);
    }
    CHECK(vecs[0].values == vecs[2].values);
    CHECK_THROWS_AS(embedder.embed({}), Error);
    CHECK_THROWS_AS(embedder.embed({"x", ""}), Error);
}

TEST_CASE("cache round-trips bit-exactly and survives reopen") {
    testutil::TempDir dir("cache");
    auto path = dir.file("cache.jsonl");

    EmbeddingVector v = fallback_embed("Thermodiffusion", 128);
    {
        EmbeddingCache cache(path);
        CHECK_FALSE(cache.get(kFallbackModelId, "Thermodiffusion").has_value());
        cache.put(kFallbackModelId, "Thermodiffusion", v);
        auto got = cache.get(kFallbackModelId, "Thermodiffusion");
        REQUIRE(got.has_value());
        CHECK(got->values == v.values);  // bit-exact
    }
    {
        // Fresh instance reads the same file: persistence across restart.
        EmbeddingCache cache(path);
        CHECK(cache.size() == 1);
        auto got = cache.get(kFallbackModelId, "Thermodiffusion");
        REQUIRE(got.has_value());
        CHECK(got->values == v.values);
        // Different model id is a miss.
        CHECK_FALSE(cache.get("other-model", "Thermodiffusion").has_value());
    }
}

TEST_CASE("cache skips corrupt lines") {
    testutil::TempDir dir("cache");
    auto path = dir.file("cache.jsonl");
    EmbeddingVector v = fallback_embed("ok", 16);
    {
        EmbeddingCache cache(path);
        cache.put("m", "ok", v);
    }
    // Simulate a truncated write plus garbage.
    std::string contents = read_file(path);
    contents += "{\"model_id\":\"m\",\"digest\":\"tr";
    write_file(path, contents);

    EmbeddingCache cache(path);
    CHECK(cache.size() == 1);
    CHECK(cache.get("m", "ok").has_value());
}

TEST_CASE("embedder uses the cache: zero backend work on warm entries") {
    testutil::TempDir dir("cache");
    auto path = dir.file("cache.jsonl");
    EmbedderConfig config;
    config.backend = EmbedderBackend::DeterministicFallback;
    config.dim = 16;
    {
        EmbeddingCache cache(path);
        Embedder embedder(config, &cache);
        embedder.embed({"x", "y"});
        CHECK(embedder.cache_hits() == 0);
    }
    {
        EmbeddingCache cache(path);
        Embedder embedder(config, &cache);
        auto vecs = embedder.embed({"x", "y"});
        CHECK(embedder.cache_hits() == 2);
        CHECK(vecs[0].values == fallback_embed("x", 16).values);
    }
}
