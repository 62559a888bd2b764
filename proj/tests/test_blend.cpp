#include <doctest.h>

#include "dakit/blend.hpp"
#include "dakit/error.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

using namespace dakit;
using namespace dakit::blend;
using corpus::Category;

namespace {

constexpr uint64_t B = 1000000000ULL;   // one billion tokens

// The reference source-breakdown table this module reproduces: per-category
// data tokens and the training tokens the mixture is supposed to reach.
const std::map<Category, uint64_t> table_data = {
    {Category::BugSummary, 2400000000ULL},  {Category::DesignSource, 11900000000ULL},
    {Category::Documentation, 4500000000ULL}, {Category::Verification, 2300000000ULL},
    {Category::Other, 2000000000ULL},       {Category::Wikipedia, 1500000000ULL},
    {Category::Code, 700000000ULL},
};

const std::map<Category, double> table_multipliers = {
    {Category::BugSummary, 1.0},        {Category::DesignSource, 5.9 / 11.9},
    {Category::Documentation, 8.2 / 4.5}, {Category::Verification, 2.5 / 2.3},
    {Category::Other, 2.9 / 2.0},       {Category::Wikipedia, 1.0},
    {Category::Code, 1.0},
};

const std::map<Category, double> table_training_pct = {
    {Category::BugSummary, 10.0},   {Category::DesignSource, 24.5},
    {Category::Documentation, 34.0}, {Category::Verification, 10.4},
    {Category::Other, 12.0},        {Category::Wikipedia, 6.2},
    {Category::Code, 3.0},
};

const std::map<Category, double> table_data_pct = {
    {Category::BugSummary, 9.5},    {Category::DesignSource, 47.0},
    {Category::Documentation, 17.8}, {Category::Verification, 9.1},
    {Category::Other, 7.9},         {Category::Wikipedia, 5.9},
    {Category::Code, 2.8},
};

} // namespace

TEST_CASE("wikipedia row reproduces its training share of the full table") {
    auto m = compute_blend(table_data, table_multipliers);
    REQUIRE(m.rows.size() == 7);
    const BlendRow * wiki = nullptr;
    for (const auto & row : m.rows) {
        if (row.category == Category::Wikipedia) wiki = &row;
    }
    REQUIRE(wiki != nullptr);
    CHECK(wiki->data_tokens == 1500000000ULL);
    CHECK(wiki->training_tokens == 1500000000ULL);
    // total training lands on 24.1B (rounding wiggle of a few tokens allowed)
    CHECK(std::llabs(static_cast<long long>(m.total_training_tokens) -
                     static_cast<long long>(24100000000ULL)) < 16);
    CHECK(wiki->training_share * 100.0 == doctest::Approx(6.2).epsilon(0.02));
}

TEST_CASE("documentation needs multiplier 8.2/4.5 to reach its training tokens") {
    auto m = compute_blend(table_data, table_multipliers);
    for (const auto & row : m.rows) {
        if (row.category == Category::Documentation) {
            CHECK(row.multiplier == doctest::Approx(1.8222222).epsilon(1e-6));
            CHECK(std::llabs(static_cast<long long>(row.training_tokens) -
                             static_cast<long long>(8200000000ULL)) < 8);
        }
    }
}

TEST_CASE("full table reconstruction within 0.1 percentage point per row") {
    auto m = compute_blend(table_data, table_multipliers);
    double data_sum = 0.0, training_sum = 0.0;
    for (const auto & row : m.rows) {
        CHECK(std::fabs(row.training_share * 100.0 - table_training_pct.at(row.category)) < 0.1);
        CHECK(std::fabs(row.data_share * 100.0 - table_data_pct.at(row.category)) < 0.1);
        data_sum += row.data_share;
        training_sum += row.training_share;
    }
    CHECK(std::fabs(data_sum - 1.0) < 1e-9);
    CHECK(std::fabs(training_sum - 1.0) < 1e-9);
    CHECK(m.total_data_tokens == 25300000000ULL);
}

TEST_CASE("identity blend keeps training share equal to data share") {
    std::map<Category, double> ones;
    for (const auto & [cat, n] : table_data) ones[cat] = 1.0;
    auto m = compute_blend(table_data, ones);
    for (const auto & row : m.rows) {
        CHECK(row.training_tokens == row.data_tokens);
        CHECK(row.training_share == row.data_share);
    }
    CHECK(m.total_training_tokens == m.total_data_tokens);
}

TEST_CASE("rows come out in table category order") {
    auto m = compute_blend(table_data, table_multipliers);
    REQUIRE(m.rows.size() == 7);
    CHECK(m.rows[0].category == Category::BugSummary);
    CHECK(m.rows[1].category == Category::DesignSource);
    CHECK(m.rows[2].category == Category::Documentation);
    CHECK(m.rows[3].category == Category::Verification);
    CHECK(m.rows[4].category == Category::Other);
    CHECK(m.rows[5].category == Category::Wikipedia);
    CHECK(m.rows[6].category == Category::Code);
}

TEST_CASE("fractional training tokens round half to even") {
    std::map<Category, uint64_t> data = {{Category::Other, 25}, {Category::Code, 35}};
    std::map<Category, double> mult = {{Category::Other, 0.5}, {Category::Code, 0.5}};
    auto m = compute_blend(data, mult);
    CHECK(m.rows[0].training_tokens == 12);   // 12.5 -> even 12
    CHECK(m.rows[1].training_tokens == 18);   // 17.5 -> even 18
}

TEST_CASE("missing or negative multipliers are rejected") {
    std::map<Category, uint64_t> data = {{Category::Wikipedia, 10}};
    CHECK_THROWS_AS(compute_blend(data, {}), Error);
    try {
        compute_blend(data, {});
    } catch (const Error & e) {
        CHECK(e.code == "MissingMultiplier");
    }
    try {
        compute_blend(data, {{Category::Wikipedia, -0.5}});
    } catch (const Error & e) {
        CHECK(e.code == "NegativeMultiplier");
    }
}

TEST_CASE("scaling all data tokens leaves both share columns unchanged") {
    std::map<Category, uint64_t> data = {{Category::DesignSource, 1200},
                                         {Category::Documentation, 450},
                                         {Category::Wikipedia, 150}};
    std::map<Category, double> mult = {{Category::DesignSource, 0.5},
                                       {Category::Documentation, 2.0},
                                       {Category::Wikipedia, 1.0}};
    auto base = compute_blend(data, mult);
    std::map<Category, uint64_t> scaled;
    for (const auto & [cat, n] : data) scaled[cat] = n * 1000;
    auto big = compute_blend(scaled, mult);
    for (size_t i = 0; i < base.rows.size(); ++i) {
        CHECK(big.rows[i].training_tokens == base.rows[i].training_tokens * 1000);
        CHECK(big.rows[i].data_share == doctest::Approx(base.rows[i].data_share).epsilon(1e-12));
        CHECK(big.rows[i].training_share ==
              doctest::Approx(base.rows[i].training_share).epsilon(1e-12));
    }
}

TEST_CASE("public fraction of the full table is about 9.2 percent") {
    auto m = compute_blend(table_data, table_multipliers);
    double pf = public_fraction(m);
    CHECK(pf == doctest::Approx((1.5 + 0.7) / 24.1).epsilon(1e-6));
    CHECK(pf * 100.0 > 8.7);
    CHECK(pf * 100.0 < 9.7);
}

TEST_CASE("public fraction edge cases") {
    std::map<Category, double> ones = {{Category::BugSummary, 1.0},
                                       {Category::Wikipedia, 1.0},
                                       {Category::Code, 1.0}};
    auto none = compute_blend({{Category::BugSummary, 5 * B}}, ones);
    CHECK(public_fraction(none) == 0.0);

    auto all_public = compute_blend({{Category::Wikipedia, 3 * B}, {Category::Code, 1 * B}}, ones);
    CHECK(public_fraction(all_public) == 1.0);

    BlendManifest empty;
    CHECK_THROWS_AS(public_fraction(empty), Error);
    try {
        public_fraction(empty);
    } catch (const Error & e) {
        CHECK(e.code == "EmptyManifest");
    }
}

TEST_CASE("epoch arithmetic matches the training budget") {
    double e = epochs_from_budget(24100000000ULL, 1000000ULL, 23200ULL);
    CHECK(e == doctest::Approx(23200.0 * 1e6 / 24.1e9).epsilon(1e-12));
    CHECK(e > 0.95);
    CHECK(e < 0.97);

    CHECK(epochs_from_budget(10, 5, 2) == 1.0);
    CHECK(epochs_from_budget(10, 5, 4) == 2.0);
}

TEST_CASE("epochs_from_budget rejects zero inputs") {
    CHECK_THROWS_AS(epochs_from_budget(0, 1, 1), Error);
    CHECK_THROWS_AS(epochs_from_budget(1, 0, 1), Error);
    CHECK_THROWS_AS(epochs_from_budget(1, 1, 0), Error);
    try {
        epochs_from_budget(0, 1, 1);
    } catch (const Error & e) {
        CHECK(e.code == "ZeroTokens");
    }
}

TEST_CASE("manifest json round-trips") {
    auto m = compute_blend(table_data, table_multipliers);
    auto back = BlendManifest::from_json(m.to_json());
    REQUIRE(back.rows.size() == m.rows.size());
    for (size_t i = 0; i < m.rows.size(); ++i) {
        CHECK(back.rows[i].category == m.rows[i].category);
        CHECK(back.rows[i].data_tokens == m.rows[i].data_tokens);
        CHECK(back.rows[i].multiplier == m.rows[i].multiplier);
        CHECK(back.rows[i].training_tokens == m.rows[i].training_tokens);
        CHECK(back.rows[i].data_share == m.rows[i].data_share);
        CHECK(back.rows[i].training_share == m.rows[i].training_share);
    }
    CHECK(back.total_data_tokens == m.total_data_tokens);
    CHECK(back.total_training_tokens == m.total_training_tokens);
    CHECK(back.to_json() == m.to_json());
}

TEST_CASE("table text reports shares to one decimal place") {
    auto m = compute_blend(table_data, table_multipliers);
    std::string table = m.to_table();
    CHECK(table.find("Wikipedia") != std::string::npos);
    CHECK(table.find("6.2") != std::string::npos);
    CHECK(table.find("34.0") != std::string::npos);
    CHECK(table.find("Total") != std::string::npos);
}
