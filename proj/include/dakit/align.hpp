#pragma once

#include "dakit/tokenizer.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dakit::align {

struct ChatTurn {
    enum class Role { User, Assistant };
    Role role = Role::User;
    std::string text;
};

const char * to_string(ChatTurn::Role role);
ChatTurn::Role role_from_string(const std::string & s);

struct ChatSample {
    std::string system;
    std::vector<ChatTurn> turns;
    std::string rendered;                     // output of render_chat
    std::vector<int> loss_mask;               // 0/1 per token of rendered
    std::optional<std::string> attributes;    // canonical attribute string
};

// Literal "<extra_id_" sequences inside message bodies get a zero-width space
// (U+200B) inserted after the '<' so rendered text can always be parsed back
// unambiguously. Escaping is reversible: an existing run of zero-width spaces
// in that position gains one more.
std::string escape_tag_literals(std::string_view text);
std::string unescape_tag_literals(std::string_view text);

// "<extra_id_0>System\n{system}\n" then "<extra_id_1>User\n{text}\n" /
// "<extra_id_1>Assistant\n{text}\n" per turn, byte-exact. Turns must
// alternate starting with User; otherwise throws Error("BadAlternation").
std::string render_chat(const std::string & system, const std::vector<ChatTurn> & turns);

// Inverse of render_chat: recovers system and turns (bodies unescaped).
// Throws Error("BadTemplate") when the text does not follow the template.
ChatSample parse_chat(const std::string & rendered);

// 1 for tokens lying entirely inside an Assistant response body (the text
// after an "<extra_id_1>Assistant\n" tag line, excluding the terminating
// newline), 0 for everything else. Tokens straddling a boundary get 0.
std::vector<int> loss_mask(const ChatSample & sample, const tok::TokenizerModel & tokenizer);

// Concatenates domain + general and shuffles with a seeded Fisher-Yates.
// Output length is always |domain| + |general|.
std::vector<ChatSample> mix_datasets(std::vector<ChatSample> domain,
                                     const std::vector<ChatSample> & general, uint64_t rng_seed);

struct AttributeLabels {
    std::map<std::string, int> scores;

    static constexpr int kMinScore = 0;
    static constexpr int kMaxScore = 4;

    // quality, helpfulness, correctness, toxicity, humor, creativity,
    // verbosity; any other attribute follows alphabetically.
    static const std::vector<std::string> & canonical_order();

    void validate() const;           // Error("ScoreOutOfRange")
    std::string canonical() const;   // "quality:3,toxicity:0,..."
    static AttributeLabels parse(const std::string & text);   // Error("BadAttributes")
};

// Validates the labels and stores their canonical string on the sample.
ChatSample attach_attributes(ChatSample sample, const AttributeLabels & labels);

// JSONL records {system, turns, rendered, loss_mask, attributes?}; rendered
// and loss_mask may be absent on input (they are recomputed downstream).
std::string samples_to_jsonl(const std::vector<ChatSample> & samples);
std::vector<ChatSample> samples_from_jsonl(const std::string & jsonl_text);

} // namespace dakit::align
