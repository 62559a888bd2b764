#include <doctest.h>

#include "dakit/embedding.hpp"
#include "dakit/error.hpp"
#include "dakit/matrix.hpp"
#include "dakit/tokenizer.hpp"
#include "dakit/util.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <random>

using namespace dakit;
using namespace dakit::tok;

namespace {

EmbeddingBundle random_bundle(size_t v, size_t d, uint64_t seed) {
    EmbeddingBundle b;
    b.input_embeddings = Matrix(v, d);
    b.output_weights = Matrix(v, d);
    std::mt19937_64 rng(seed);
    for (double & x : b.input_embeddings.data) x = next_unit(rng) * 2 - 1;
    for (double & x : b.output_weights.data) x = next_unit(rng) * 2 - 1;
    return b;
}

TokenDiffReport report_admitting(std::vector<std::string> tokens) {
    TokenDiffReport r;
    r.candidates = tokens;
    r.admitted = std::move(tokens);
    for (const auto & t : r.admitted) r.general_freq[t] = 0.0;
    return r;
}

} // namespace

TEST_CASE("new token row is the mean of its constituent rows") {
    auto general = TokenizerModel::byte_level();
    EmbeddingBundle bundle;
    bundle.input_embeddings = Matrix(256, 2);
    bundle.output_weights = Matrix(256, 2);
    bundle.input_embeddings.at('x', 0) = 1.0;
    bundle.input_embeddings.at('x', 1) = 0.0;
    bundle.input_embeddings.at('y', 0) = 0.0;
    bundle.input_embeddings.at('y', 1) = 1.0;

    auto [aug_tok, aug_bundle] = augment(general, bundle, report_admitting({"xy"}));
    REQUIRE(aug_tok.vocab_size() == 257);
    CHECK(aug_tok.id_of("xy") == 256);
    CHECK(aug_bundle.vocab_size() == 257);
    CHECK(aug_bundle.input_embeddings.at(256, 0) == 0.5);
    CHECK(aug_bundle.input_embeddings.at(256, 1) == 0.5);
}

TEST_CASE("single-token encodings copy the row exactly") {
    auto general = TokenizerModel::byte_level();
    general.add_merge("q", "z");   // "qz" encodes to one token
    auto bundle = random_bundle(257, 8, 77);
    auto [aug_tok, aug_bundle] = augment(general, bundle, report_admitting({"qzqz"}));
    CHECK(aug_tok.id_of("qzqz") == 257);

    int qz = general.id_of("qz");
    REQUIRE(general.encode("qzqz") == std::vector<int>{qz, qz});
    // mean of the same row twice is that row, bit for bit
    for (size_t c = 0; c < 8; ++c) {
        CHECK(aug_bundle.input_embeddings.at(257, c) ==
              bundle.input_embeddings.at(static_cast<size_t>(qz), c));
    }
}

TEST_CASE("output rows of new tokens are exactly zero") {
    auto general = TokenizerModel::byte_level();
    auto bundle = random_bundle(256, 16, 3);
    auto [aug_tok, aug_bundle] = augment(general, bundle,
                                         report_admitting({"clk_en", "rst_n", "fifo"}));
    CHECK(aug_tok.added_tokens.size() == 3);
    REQUIRE(aug_bundle.vocab_size() == 259);
    for (size_t r = 256; r < 259; ++r) {
        for (size_t c = 0; c < 16; ++c) {
            double v = aug_bundle.output_weights.at(r, c);
            CHECK(v == 0.0);
            CHECK(!std::signbit(v));
        }
    }
}

TEST_CASE("existing rows are preserved bitwise") {
    auto general = TokenizerModel::byte_level();
    auto bundle = random_bundle(256, 24, 99);
    auto [aug_tok, aug_bundle] = augment(general, bundle, report_admitting({"xyzw"}));
    CHECK(aug_tok.vocab_size() == 257);

    size_t n = 256 * 24 * sizeof(double);
    CHECK(std::memcmp(aug_bundle.input_embeddings.data.data(),
                      bundle.input_embeddings.data.data(), n) == 0);
    CHECK(std::memcmp(aug_bundle.output_weights.data.data(),
                      bundle.output_weights.data.data(), n) == 0);
}

TEST_CASE("augmented tokenizer treats admitted tokens atomically") {
    auto general = TokenizerModel::byte_level();
    auto bundle = random_bundle(256, 4, 1);
    auto [aug_tok, aug_bundle] = augment(general, bundle, report_admitting({"synth_clk"}));
    CHECK(aug_bundle.vocab_size() == 257);
    CHECK(aug_tok.encode("synth_clk") == std::vector<int>{aug_tok.id_of("synth_clk")});
    CHECK(aug_tok.decode(aug_tok.encode("a synth_clk z")) == "a synth_clk z");
}

TEST_CASE("mean is computed over the original general encoding") {
    auto general = TokenizerModel::byte_level();
    auto bundle = random_bundle(256, 6, 42);
    // both tokens mention "ab"; the second must average byte rows, not the
    // first new token's row
    auto [aug_tok, aug_bundle] = augment(general, bundle, report_admitting({"ab", "abab"}));
    CHECK(aug_tok.id_of("ab") == 256);
    CHECK(aug_tok.id_of("abab") == 257);

    for (size_t c = 0; c < 6; ++c) {
        double mean_ab = (bundle.input_embeddings.at('a', c) +
                          bundle.input_embeddings.at('b', c)) / 2.0;
        CHECK(aug_bundle.input_embeddings.at(256, c) == doctest::Approx(mean_ab).epsilon(1e-15));
        double mean4 = (bundle.input_embeddings.at('a', c) + bundle.input_embeddings.at('b', c) +
                        bundle.input_embeddings.at('a', c) + bundle.input_embeddings.at('b', c)) /
                       4.0;
        CHECK(aug_bundle.input_embeddings.at(257, c) == doctest::Approx(mean4).epsilon(1e-15));
    }
}

TEST_CASE("dimension mismatches are rejected") {
    auto general = TokenizerModel::byte_level();
    auto bundle = random_bundle(100, 4, 5);   // V=100 != 256
    CHECK_THROWS_AS(augment(general, bundle, report_admitting({"xy"})), Error);
    try {
        augment(general, bundle, report_admitting({"xy"}));
    } catch (const Error & e) {
        CHECK(e.code == "DimensionMismatch");
    }

    EmbeddingBundle lopsided;
    lopsided.input_embeddings = Matrix(256, 4);
    lopsided.output_weights = Matrix(256, 5);
    CHECK_THROWS_AS(lopsided.validate(), Error);

    EmbeddingBundle nan_bundle = random_bundle(256, 2, 9);
    nan_bundle.input_embeddings.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(nan_bundle.validate(), Error);
}

TEST_CASE("emb1 text round-trips every double bit-exactly") {
    Matrix m(3, 4);
    std::mt19937_64 rng(8);
    for (double & x : m.data) x = (next_unit(rng) * 2 - 1) * 1e9;
    m.at(0, 0) = 0.0;
    m.at(0, 1) = -0.0;
    m.at(0, 2) = 1.0 / 3.0;
    m.at(0, 3) = 5e-324;
    m.at(1, 0) = 1e300;
    m.at(1, 1) = -2.5e-7;

    Matrix back = emb1_read(emb1_write(m));
    REQUIRE(back.rows == 3);
    REQUIRE(back.cols == 4);
    for (size_t i = 0; i < m.data.size(); ++i) {
        CHECK(back.data[i] == m.data[i]);
        CHECK(std::signbit(back.data[i]) == std::signbit(m.data[i]));
    }
    CHECK(emb1_write(back) == emb1_write(m));
}

TEST_CASE("emb1 files round-trip through disk") {
    Matrix m(2, 3);
    m.data = {0.1, 0.2, 0.3, -1.5, 2.5, 1e-12};
    emb1_save(m, "emb1_rt.emb");
    Matrix back = emb1_load("emb1_rt.emb");
    CHECK(back.rows == m.rows);
    CHECK(back.cols == m.cols);
    CHECK(back.data == m.data);
    std::remove("emb1_rt.emb");
}

TEST_CASE("emb1 reader rejects corrupt input") {
    CHECK_THROWS_AS(emb1_read("not a header\n1 2\n"), Error);
    CHECK_THROWS_AS(emb1_read("EMB1 2\n"), Error);
    CHECK_THROWS_AS(emb1_read("EMB1 2 2\n1 2\n"), Error);        // missing row
    CHECK_THROWS_AS(emb1_read("EMB1 1 3\n1 2\n"), Error);        // short row
    Matrix empty = emb1_read("EMB1 0 5\n");
    CHECK(empty.rows == 0);
    CHECK(empty.cols == 5);
}

TEST_CASE("matrix all_finite flags NaN and Inf") {
    Matrix m(2, 2);
    CHECK(m.all_finite());
    m.at(1, 1) = std::numeric_limits<double>::infinity();
    CHECK_FALSE(m.all_finite());
}
