#pragma once

#include "dakit/corpus.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dakit::blend {

using corpus::Category;

struct BlendRow {
    Category category = Category::Other;
    uint64_t data_tokens = 0;
    double multiplier = 1.0;
    uint64_t training_tokens = 0;   // round-half-even of data_tokens * multiplier
    double data_share = 0.0;
    double training_share = 0.0;
};

struct BlendManifest {
    std::vector<BlendRow> rows;     // blend-table category order
    uint64_t total_data_tokens = 0;
    uint64_t total_training_tokens = 0;

    std::string to_json() const;
    static BlendManifest from_json(const std::string & json_text);

    // Table-style text: shares to one decimal place.
    std::string to_table() const;
};

// Rows are emitted in blend-table category order for the categories present
// in data_tokens; every present category needs a multiplier.
// Throws Error("NegativeMultiplier") / Error("MissingMultiplier").
BlendManifest compute_blend(const std::map<Category, uint64_t> & data_tokens,
                            const std::map<Category, double> & multipliers);

// Share of training tokens coming from the public rows (Wikipedia, Code).
// Throws Error("EmptyManifest").
double public_fraction(const BlendManifest & manifest);

// steps * tokens_per_step / total_training_tokens.
// Throws Error("ZeroTokens") unless all three inputs are positive.
double epochs_from_budget(uint64_t total_training_tokens, uint64_t tokens_per_step, uint64_t steps);

} // namespace dakit::blend
