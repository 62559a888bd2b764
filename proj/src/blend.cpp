#include "dakit/blend.hpp"
#include "dakit/error.hpp"
#include "dakit/util.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>

namespace dakit::blend {

static uint64_t round_half_even(double x) {
    // default FP rounding mode is to-nearest-ties-to-even
    return static_cast<uint64_t>(std::llrint(x));
}

BlendManifest compute_blend(const std::map<Category, uint64_t> & data_tokens,
                            const std::map<Category, double> & multipliers) {
    BlendManifest m;
    for (Category cat : corpus::all_categories()) {
        auto it = data_tokens.find(cat);
        if (it == data_tokens.end()) continue;
        auto mit = multipliers.find(cat);
        if (mit == multipliers.end()) {
            throw Error("MissingMultiplier",
                        std::string("no multiplier for category ") + corpus::to_string(cat));
        }
        if (mit->second < 0 || !std::isfinite(mit->second)) {
            throw Error("NegativeMultiplier",
                        std::string("multiplier for ") + corpus::to_string(cat) + " must be >= 0");
        }
        BlendRow row;
        row.category = cat;
        row.data_tokens = it->second;
        row.multiplier = mit->second;
        row.training_tokens = round_half_even(static_cast<double>(it->second) * mit->second);
        m.rows.push_back(row);
        m.total_data_tokens += row.data_tokens;
        m.total_training_tokens += row.training_tokens;
    }
    for (auto & row : m.rows) {
        row.data_share = m.total_data_tokens == 0 ? 0.0
            : static_cast<double>(row.data_tokens) / static_cast<double>(m.total_data_tokens);
        row.training_share = m.total_training_tokens == 0 ? 0.0
            : static_cast<double>(row.training_tokens) / static_cast<double>(m.total_training_tokens);
    }
    return m;
}

double public_fraction(const BlendManifest & manifest) {
    if (manifest.rows.empty()) {
        throw Error("EmptyManifest", "manifest has no rows");
    }
    uint64_t pub = 0;
    for (const auto & row : manifest.rows) {
        if (row.category == Category::Wikipedia || row.category == Category::Code) {
            pub += row.training_tokens;
        }
    }
    if (manifest.total_training_tokens == 0) {
        return 0.0;
    }
    return static_cast<double>(pub) / static_cast<double>(manifest.total_training_tokens);
}

double epochs_from_budget(uint64_t total_training_tokens, uint64_t tokens_per_step, uint64_t steps) {
    if (total_training_tokens == 0 || tokens_per_step == 0 || steps == 0) {
        throw Error("ZeroTokens", "all inputs must be positive");
    }
    return static_cast<double>(steps) * static_cast<double>(tokens_per_step) /
           static_cast<double>(total_training_tokens);
}

std::string BlendManifest::to_json() const {
    nlohmann::ordered_json j;
    j["rows"] = nlohmann::json::array();
    for (const auto & row : rows) {
        nlohmann::ordered_json r;
        r["category"] = corpus::to_string(row.category);
        r["data_tokens"] = row.data_tokens;
        r["multiplier"] = row.multiplier;
        r["training_tokens"] = row.training_tokens;
        r["data_share"] = row.data_share;
        r["training_share"] = row.training_share;
        j["rows"].push_back(r);
    }
    j["total_data_tokens"] = total_data_tokens;
    j["total_training_tokens"] = total_training_tokens;
    return j.dump(2) + "\n";
}

BlendManifest BlendManifest::from_json(const std::string & json_text) {
    auto j = nlohmann::json::parse(json_text);
    BlendManifest m;
    for (const auto & r : j.at("rows")) {
        BlendRow row;
        row.category = corpus::category_from_string(r.at("category").get<std::string>());
        row.data_tokens = r.at("data_tokens").get<uint64_t>();
        row.multiplier = r.at("multiplier").get<double>();
        row.training_tokens = r.at("training_tokens").get<uint64_t>();
        row.data_share = r.at("data_share").get<double>();
        row.training_share = r.at("training_share").get<double>();
        m.rows.push_back(row);
    }
    m.total_data_tokens = j.at("total_data_tokens").get<uint64_t>();
    m.total_training_tokens = j.at("total_training_tokens").get<uint64_t>();
    return m;
}

std::string BlendManifest::to_table() const {
    char buf[256];
    std::string out = "category        data_tokens  data%   training_tokens  training%\n";
    for (const auto & row : rows) {
        std::snprintf(buf, sizeof(buf), "%-15s %12llu  %5.1f  %16llu  %8.1f\n",
                      corpus::to_string(row.category),
                      static_cast<unsigned long long>(row.data_tokens),
                      row.data_share * 100.0,
                      static_cast<unsigned long long>(row.training_tokens),
                      row.training_share * 100.0);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "%-15s %12llu  %5.1f  %16llu  %8.1f\n", "Total",
                  static_cast<unsigned long long>(total_data_tokens), 100.0,
                  static_cast<unsigned long long>(total_training_tokens), 100.0);
    out += buf;
    return out;
}

} // namespace dakit::blend
