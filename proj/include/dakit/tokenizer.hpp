#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace dakit::tok {

// Byte-level BPE tokenizer. The 256 single-byte tokens are always present
// (ids 0..255), merge products follow in merge order, added tokens last.
// Added tokens are atomic: they are matched greedily (longest match, leftmost
// start) before BPE runs and never participate in merges, so the base merge
// table stays valid after augmentation.
struct TokenizerModel {
    std::vector<std::string> id_to_token;
    std::unordered_map<std::string, int> token_to_id;
    std::vector<std::pair<std::string, std::string>> merges;
    std::vector<std::string> added_tokens;

    static TokenizerModel byte_level();

    size_t vocab_size() const { return id_to_token.size(); }
    int    id_of(std::string_view token) const;
    bool   has_token(std::string_view token) const { return id_of(token) >= 0; }

    // Appends a merge; the product token gets the next free id.
    void add_merge(const std::string & left, const std::string & right);

    // Appends an atomic added token with the next free id.
    void add_token(const std::string & token);

    std::vector<int> encode(std::string_view text) const;
    std::string      decode(const std::vector<int> & ids) const;
    size_t           count_tokens(std::string_view text) const { return encode(text).size(); }

    // Vocab file: "token<TAB>id" per line, tokens byte-escaped.
    // Merges file: "left<SPACE>right" per line in merge order, escaped too.
    std::string vocab_text() const;
    std::string merges_text() const;
    void save(const std::string & vocab_path, const std::string & merges_path) const;
    static TokenizerModel load(const std::string & vocab_path, const std::string & merges_path);
    static TokenizerModel from_text(const std::string & vocab_text, const std::string & merges_text);

  private:
    // (left_id << 32 | right_id) -> {rank, product_id}
    struct MergeTarget { int rank; int product_id; };
    std::unordered_map<uint64_t, MergeTarget> pair_table_;
    std::unordered_set<size_t> added_lengths_;
    std::unordered_set<std::string> added_set_;

    std::vector<int> bpe_segment(std::string_view segment) const;
    void encode_plain(std::string_view span, std::vector<int> & out) const;
};

// Trains byte-level BPE: repeatedly merges the most frequent adjacent pair,
// ties broken by lexicographic (left, right) byte order. Pair counting never
// crosses a whitespace/non-whitespace run boundary. Stops after
// target_new_merges merges or when no pair occurs at least twice.
// Throws Error("EmptyCorpus") when the corpus has no bytes at all.
TokenizerModel train_bpe(const std::vector<std::string> & corpus_texts, size_t target_new_merges);

struct TokenDiffReport {
    double rarity_threshold = 1.0;                 // occurrences per million chars
    std::vector<std::string> candidates;           // domain tokens absent from general vocab
    std::vector<std::string> admitted;             // candidates below the threshold
    std::map<std::string, double> general_freq;    // per candidate, occurrences/1M chars

    std::string to_json() const;
    static TokenDiffReport from_json(const std::string & json_text);
};

// Candidates are domain-vocab tokens of length >= 2 bytes missing from the
// general vocab, ordered by domain id. Frequency is counted by overlapping
// substring occurrences per million characters of the sample; an empty
// sample yields frequency 0 for everything.
TokenDiffReport diff_new_tokens(const TokenizerModel & domain_tok,
                                const TokenizerModel & general_tok,
                                std::string_view general_corpus_sample,
                                double rarity_threshold);

struct EfficiencyReport {
    std::map<std::string, double> by_category;
    double overall = 0.0;
};

// gain = 1 - tokens(aug)/tokens(orig), aggregated per category label and
// over all texts. labels, when given, must parallel texts.
EfficiencyReport efficiency_gain(const TokenizerModel & orig,
                                 const TokenizerModel & aug,
                                 const std::vector<std::string> & texts,
                                 const std::vector<std::string> * labels = nullptr);

} // namespace dakit::tok
