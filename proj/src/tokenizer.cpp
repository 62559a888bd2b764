#include "dakit/tokenizer.hpp"
#include "dakit/error.hpp"
#include "dakit/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <limits>

namespace dakit::tok {

static inline uint64_t pair_key(int left, int right) {
    return (static_cast<uint64_t>(static_cast<uint32_t>(left)) << 32) |
           static_cast<uint32_t>(right);
}

static inline bool is_ws_byte(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

TokenizerModel TokenizerModel::byte_level() {
    TokenizerModel m;
    m.id_to_token.reserve(256);
    for (int b = 0; b < 256; ++b) {
        std::string t(1, static_cast<char>(b));
        m.token_to_id[t] = b;
        m.id_to_token.push_back(std::move(t));
    }
    return m;
}

int TokenizerModel::id_of(std::string_view token) const {
    auto it = token_to_id.find(std::string(token));
    return it == token_to_id.end() ? -1 : it->second;
}

void TokenizerModel::add_merge(const std::string & left, const std::string & right) {
    int lid = id_of(left);
    int rid = id_of(right);
    if (lid < 0 || rid < 0) {
        throw Error("BadMerge", "merge operands must already be vocab tokens");
    }
    std::string product = left + right;
    int pid;
    auto it = token_to_id.find(product);
    if (it != token_to_id.end()) {
        pid = it->second;   // rare: product string already minted by an earlier merge
    } else {
        pid = static_cast<int>(id_to_token.size());
        token_to_id[product] = pid;
        id_to_token.push_back(product);
    }
    pair_table_[pair_key(lid, rid)] = MergeTarget{static_cast<int>(merges.size()), pid};
    merges.emplace_back(left, right);
}

void TokenizerModel::add_token(const std::string & token) {
    if (token.empty()) {
        throw Error("BadToken", "added token must be nonempty");
    }
    if (has_token(token)) {
        throw Error("BadToken", "token already in vocab: " + escape_bytes(token));
    }
    int id = static_cast<int>(id_to_token.size());
    token_to_id[token] = id;
    id_to_token.push_back(token);
    added_tokens.push_back(token);
    added_set_.insert(token);
    added_lengths_.insert(token.size());
}

std::vector<int> TokenizerModel::bpe_segment(std::string_view segment) const {
    std::vector<int> ids;
    ids.reserve(segment.size());
    for (unsigned char c : segment) {
        ids.push_back(c);
    }
    if (pair_table_.empty()) {
        return ids;
    }
    while (ids.size() >= 2) {
        int best_rank = std::numeric_limits<int>::max();
        uint64_t best_key = 0;
        for (size_t i = 0; i + 1 < ids.size(); ++i) {
            auto it = pair_table_.find(pair_key(ids[i], ids[i + 1]));
            if (it != pair_table_.end() && it->second.rank < best_rank) {
                best_rank = it->second.rank;
                best_key = it->first;
            }
        }
        if (best_rank == std::numeric_limits<int>::max()) {
            break;
        }
        int left = static_cast<int>(best_key >> 32);
        int right = static_cast<int>(best_key & 0xffffffffu);
        int product = pair_table_.at(best_key).product_id;
        std::vector<int> merged;
        merged.reserve(ids.size());
        for (size_t i = 0; i < ids.size();) {
            if (i + 1 < ids.size() && ids[i] == left && ids[i + 1] == right) {
                merged.push_back(product);
                i += 2;
            } else {
                merged.push_back(ids[i]);
                i += 1;
            }
        }
        ids = std::move(merged);
    }
    return ids;
}

void TokenizerModel::encode_plain(std::string_view span, std::vector<int> & out) const {
    size_t i = 0;
    while (i < span.size()) {
        bool ws = is_ws_byte(span[i]);
        size_t j = i + 1;
        while (j < span.size() && is_ws_byte(span[j]) == ws) {
            ++j;
        }
        auto ids = bpe_segment(span.substr(i, j - i));
        out.insert(out.end(), ids.begin(), ids.end());
        i = j;
    }
}

std::vector<int> TokenizerModel::encode(std::string_view text) const {
    std::vector<int> out;
    if (added_set_.empty()) {
        encode_plain(text, out);
        return out;
    }
    std::vector<size_t> lengths(added_lengths_.begin(), added_lengths_.end());
    std::sort(lengths.rbegin(), lengths.rend());

    size_t plain_start = 0;
    size_t i = 0;
    std::string probe;
    while (i < text.size()) {
        int matched = -1;
        size_t matched_len = 0;
        for (size_t len : lengths) {
            if (i + len > text.size()) continue;
            probe.assign(text.data() + i, len);
            auto it = token_to_id.find(probe);
            if (it != token_to_id.end() && added_set_.count(probe)) {
                matched = it->second;
                matched_len = len;
                break;   // lengths are descending: longest match wins
            }
        }
        if (matched >= 0) {
            if (plain_start < i) {
                encode_plain(text.substr(plain_start, i - plain_start), out);
            }
            out.push_back(matched);
            i += matched_len;
            plain_start = i;
        } else {
            ++i;
        }
    }
    if (plain_start < text.size()) {
        encode_plain(text.substr(plain_start), out);
    }
    return out;
}

std::string TokenizerModel::decode(const std::vector<int> & ids) const {
    std::string out;
    for (int id : ids) {
        if (id < 0 || static_cast<size_t>(id) >= id_to_token.size()) {
            throw Error("BadTokenId", "id " + std::to_string(id) + " out of range");
        }
        out += id_to_token[id];
    }
    return out;
}

std::string TokenizerModel::vocab_text() const {
    std::string out;
    for (size_t id = 0; id < id_to_token.size(); ++id) {
        out += escape_bytes(id_to_token[id]);
        out.push_back('\t');
        out += std::to_string(id);
        out.push_back('\n');
    }
    return out;
}

std::string TokenizerModel::merges_text() const {
    std::string out;
    for (const auto & [l, r] : merges) {
        out += escape_bytes(l);
        out.push_back(' ');
        out += escape_bytes(r);
        out.push_back('\n');
    }
    return out;
}

void TokenizerModel::save(const std::string & vocab_path, const std::string & merges_path) const {
    write_file(vocab_path, vocab_text());
    write_file(merges_path, merges_text());
}

TokenizerModel TokenizerModel::from_text(const std::string & vocab_text, const std::string & merges_text) {
    std::vector<std::string> by_id;
    for (const auto & line : split_lines(vocab_text)) {
        if (line.empty()) continue;
        size_t tab = line.rfind('\t');
        if (tab == std::string::npos) {
            throw Error("BadFormat", "vocab line missing tab: " + line);
        }
        std::string token = unescape_bytes(std::string_view(line).substr(0, tab));
        size_t id = std::stoull(line.substr(tab + 1));
        if (by_id.size() <= id) by_id.resize(id + 1);
        by_id[id] = std::move(token);
    }
    if (by_id.size() < 256) {
        throw Error("BadFormat", "vocab must contain the 256 byte tokens");
    }
    TokenizerModel m = byte_level();
    for (int b = 0; b < 256; ++b) {
        if (by_id[b] != m.id_to_token[b]) {
            throw Error("BadFormat", "ids 0..255 must be the byte tokens");
        }
    }
    // replay merges in order; products must line up with the stored ids
    std::unordered_set<std::string> merge_products;
    for (const auto & line : split_lines(merges_text)) {
        if (line.empty()) continue;
        size_t sp = line.find(' ');
        if (sp == std::string::npos) {
            throw Error("BadFormat", "merge line missing space: " + line);
        }
        std::string left = unescape_bytes(std::string_view(line).substr(0, sp));
        std::string right = unescape_bytes(std::string_view(line).substr(sp + 1));
        m.add_merge(left, right);
        merge_products.insert(left + right);
    }
    // whatever remains in the vocab is an added token, in id order
    for (size_t id = 256; id < by_id.size(); ++id) {
        const std::string & t = by_id[id];
        if (t.empty()) {
            throw Error("BadFormat", "vocab has a gap at id " + std::to_string(id));
        }
        if (merge_products.count(t)) {
            if (m.id_of(t) != static_cast<int>(id)) {
                throw Error("BadFormat", "merge product id mismatch for " + escape_bytes(t));
            }
            continue;
        }
        m.add_token(t);
        if (m.id_of(t) != static_cast<int>(id)) {
            throw Error("BadFormat", "added token id mismatch for " + escape_bytes(t));
        }
    }
    return m;
}

TokenizerModel TokenizerModel::load(const std::string & vocab_path, const std::string & merges_path) {
    return from_text(read_file(vocab_path), read_file(merges_path));
}

// --- training ---

namespace {

struct VecHash {
    size_t operator()(const std::vector<int> & v) const noexcept {
        size_t h = 1469598103934665603ULL;
        for (int x : v) {
            h ^= static_cast<size_t>(x) + 0x9e3779b97f4a7c15ULL;
            h *= 1099511628211ULL;
        }
        return h;
    }
};

} // namespace

TokenizerModel train_bpe(const std::vector<std::string> & corpus_texts, size_t target_new_merges) {
    TokenizerModel model = TokenizerModel::byte_level();

    std::unordered_map<std::vector<int>, int64_t, VecHash> words;
    size_t total_bytes = 0;
    for (const auto & text : corpus_texts) {
        total_bytes += text.size();
        size_t i = 0;
        while (i < text.size()) {
            bool ws = is_ws_byte(text[i]);
            size_t j = i + 1;
            while (j < text.size() && is_ws_byte(text[j]) == ws) {
                ++j;
            }
            std::vector<int> ids;
            ids.reserve(j - i);
            for (size_t k = i; k < j; ++k) {
                ids.push_back(static_cast<unsigned char>(text[k]));
            }
            words[std::move(ids)] += 1;
            i = j;
        }
    }
    if (total_bytes == 0) {
        throw Error("EmptyCorpus", "corpus has no bytes to train on");
    }

    for (size_t step = 0; step < target_new_merges; ++step) {
        std::unordered_map<uint64_t, int64_t> pair_counts;
        for (const auto & [ids, cnt] : words) {
            for (size_t i = 0; i + 1 < ids.size(); ++i) {
                pair_counts[pair_key(ids[i], ids[i + 1])] += cnt;
            }
        }
        int64_t best_count = 0;
        uint64_t best_key = 0;
        for (const auto & [key, cnt] : pair_counts) {
            if (cnt < best_count) continue;
            if (cnt > best_count) {
                best_count = cnt;
                best_key = key;
                continue;
            }
            // tie: lexicographically least (left, right) byte sequences
            const std::string & bl = model.id_to_token[static_cast<int>(best_key >> 32)];
            const std::string & br = model.id_to_token[static_cast<int>(best_key & 0xffffffffu)];
            const std::string & nl = model.id_to_token[static_cast<int>(key >> 32)];
            const std::string & nr = model.id_to_token[static_cast<int>(key & 0xffffffffu)];
            if (std::tie(nl, nr) < std::tie(bl, br)) {
                best_key = key;
            }
        }
        if (best_count < 2) {
            break;
        }
        int left = static_cast<int>(best_key >> 32);
        int right = static_cast<int>(best_key & 0xffffffffu);
        model.add_merge(model.id_to_token[left], model.id_to_token[right]);
        int product = model.id_of(model.id_to_token[left] + model.id_to_token[right]);

        std::unordered_map<std::vector<int>, int64_t, VecHash> next;
        next.reserve(words.size());
        for (auto & [ids, cnt] : words) {
            std::vector<int> merged;
            merged.reserve(ids.size());
            for (size_t i = 0; i < ids.size();) {
                if (i + 1 < ids.size() && ids[i] == left && ids[i + 1] == right) {
                    merged.push_back(product);
                    i += 2;
                } else {
                    merged.push_back(ids[i]);
                    i += 1;
                }
            }
            next[std::move(merged)] += cnt;
        }
        words = std::move(next);
    }
    return model;
}

// --- vocabulary diff ---

static size_t count_substring_overlapping(std::string_view haystack, std::string_view needle) {
    if (needle.empty() || haystack.size() < needle.size()) return 0;
    size_t count = 0;
    size_t pos = haystack.find(needle, 0);
    while (pos != std::string_view::npos) {
        ++count;
        pos = haystack.find(needle, pos + 1);
    }
    return count;
}

TokenDiffReport diff_new_tokens(const TokenizerModel & domain_tok,
                                const TokenizerModel & general_tok,
                                std::string_view general_corpus_sample,
                                double rarity_threshold) {
    if (rarity_threshold < 0) {
        throw Error("BadThreshold", "rarity threshold must be >= 0");
    }
    TokenDiffReport report;
    report.rarity_threshold = rarity_threshold;
    const double sample_chars = static_cast<double>(general_corpus_sample.size());
    for (size_t id = 256; id < domain_tok.id_to_token.size(); ++id) {
        const std::string & t = domain_tok.id_to_token[id];
        if (t.size() < 2 || general_tok.has_token(t)) {
            continue;
        }
        report.candidates.push_back(t);
        double freq = 0.0;
        if (sample_chars > 0) {
            freq = static_cast<double>(count_substring_overlapping(general_corpus_sample, t)) *
                   1e6 / sample_chars;
        }
        report.general_freq[t] = freq;
        if (freq < rarity_threshold) {
            report.admitted.push_back(t);
        }
    }
    return report;
}

std::string TokenDiffReport::to_json() const {
    nlohmann::ordered_json j;
    j["rarity_threshold"] = rarity_threshold;
    j["candidates"] = nlohmann::json::array();
    for (const auto & t : candidates) j["candidates"].push_back(escape_bytes(t));
    j["admitted"] = nlohmann::json::array();
    for (const auto & t : admitted) j["admitted"].push_back(escape_bytes(t));
    j["general_freq"] = nlohmann::ordered_json::object();
    for (const auto & t : candidates) j["general_freq"][escape_bytes(t)] = general_freq.at(t);
    return j.dump(2) + "\n";
}

TokenDiffReport TokenDiffReport::from_json(const std::string & json_text) {
    auto j = nlohmann::json::parse(json_text);
    TokenDiffReport r;
    r.rarity_threshold = j.at("rarity_threshold").get<double>();
    for (const auto & t : j.at("candidates")) r.candidates.push_back(unescape_bytes(t.get<std::string>()));
    for (const auto & t : j.at("admitted")) r.admitted.push_back(unescape_bytes(t.get<std::string>()));
    for (const auto & [k, v] : j.at("general_freq").items()) r.general_freq[unescape_bytes(k)] = v.get<double>();
    return r;
}

// --- efficiency ---

EfficiencyReport efficiency_gain(const TokenizerModel & orig,
                                 const TokenizerModel & aug,
                                 const std::vector<std::string> & texts,
                                 const std::vector<std::string> * labels) {
    if (texts.empty()) {
        throw Error("EmptyTextSet", "efficiency_gain needs at least one text");
    }
    if (labels && labels->size() != texts.size()) {
        throw Error("BadLabels", "labels must parallel texts");
    }
    std::map<std::string, std::pair<uint64_t, uint64_t>> per_cat; // {orig, aug}
    uint64_t orig_total = 0, aug_total = 0;
    for (size_t i = 0; i < texts.size(); ++i) {
        uint64_t o = orig.count_tokens(texts[i]);
        uint64_t a = aug.count_tokens(texts[i]);
        orig_total += o;
        aug_total += a;
        if (labels) {
            auto & [co, ca] = per_cat[(*labels)[i]];
            co += o;
            ca += a;
        }
    }
    EfficiencyReport rep;
    for (const auto & [cat, counts] : per_cat) {
        rep.by_category[cat] = counts.first == 0 ? 0.0
            : 1.0 - static_cast<double>(counts.second) / static_cast<double>(counts.first);
    }
    rep.overall = orig_total == 0 ? 0.0
        : 1.0 - static_cast<double>(aug_total) / static_cast<double>(orig_total);
    return rep;
}

} // namespace dakit::tok
