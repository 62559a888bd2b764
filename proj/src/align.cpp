#include "dakit/align.hpp"
#include "dakit/error.hpp"
#include "dakit/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <set>

namespace dakit::align {

namespace {

const std::string_view kZwsp = "\xe2\x80\x8b";   // U+200B zero-width space
const std::string_view kTagPrefix = "extra_id_";
const std::string_view kTurnTag = "<extra_id_1>";
const std::string_view kSystemHeader = "<extra_id_0>System\n";

// scans past '<': returns number of zero-width spaces seen and whether the
// tag prefix follows them
struct TagScan {
    size_t zwsp_count = 0;
    size_t after = 0;    // index just past '<' + zwsps
    bool is_tag = false;
};

TagScan scan_tag(std::string_view text, size_t lt_pos) {
    TagScan r;
    size_t j = lt_pos + 1;
    while (text.substr(j).substr(0, kZwsp.size()) == kZwsp) {
        j += kZwsp.size();
        ++r.zwsp_count;
    }
    r.after = j;
    r.is_tag = text.substr(j).substr(0, kTagPrefix.size()) == kTagPrefix;
    return r;
}

} // namespace

std::string escape_tag_literals(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '<') {
            TagScan s = scan_tag(text, i);
            if (s.is_tag) {
                out.push_back('<');
                out += kZwsp;
                out.append(text.substr(i + 1, s.after - (i + 1)));
                out += kTagPrefix;
                i = s.after + kTagPrefix.size();
                continue;
            }
        }
        out.push_back(text[i]);
        ++i;
    }
    return out;
}

std::string unescape_tag_literals(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '<') {
            TagScan s = scan_tag(text, i);
            if (s.is_tag && s.zwsp_count > 0) {
                out.push_back('<');
                for (size_t z = 1; z < s.zwsp_count; ++z) {
                    out += kZwsp;
                }
                out += kTagPrefix;
                i = s.after + kTagPrefix.size();
                continue;
            }
        }
        out.push_back(text[i]);
        ++i;
    }
    return out;
}

const char * to_string(ChatTurn::Role role) {
    return role == ChatTurn::Role::User ? "User" : "Assistant";
}

ChatTurn::Role role_from_string(const std::string & s) {
    if (s == "User") return ChatTurn::Role::User;
    if (s == "Assistant") return ChatTurn::Role::Assistant;
    throw Error("BadRole", "unknown chat role \"" + s + "\"");
}

std::string render_chat(const std::string & system, const std::vector<ChatTurn> & turns) {
    for (size_t i = 0; i < turns.size(); ++i) {
        ChatTurn::Role expected = i % 2 == 0 ? ChatTurn::Role::User : ChatTurn::Role::Assistant;
        if (turns[i].role != expected) {
            throw Error("BadAlternation", "turn " + std::to_string(i) + " must be " +
                        to_string(expected) + ", got " + to_string(turns[i].role));
        }
    }
    std::string out{kSystemHeader};
    out += escape_tag_literals(system);
    out.push_back('\n');
    for (const auto & turn : turns) {
        out += kTurnTag;
        out += to_string(turn.role);
        out.push_back('\n');
        out += escape_tag_literals(turn.text);
        out.push_back('\n');
    }
    return out;
}

ChatSample parse_chat(const std::string & rendered) {
    if (rendered.compare(0, kSystemHeader.size(), kSystemHeader) != 0) {
        throw Error("BadTemplate", "rendered text must start with the system header");
    }
    ChatSample sample;
    sample.rendered = rendered;

    // collect tag positions; escaping guarantees any literal kTurnTag is real
    std::vector<size_t> tags;
    for (size_t pos = rendered.find(kTurnTag); pos != std::string::npos;
         pos = rendered.find(kTurnTag, pos + 1)) {
        tags.push_back(pos);
    }

    auto body_between = [&](size_t start, size_t stop) {
        if (stop <= start || rendered[stop - 1] != '\n') {
            throw Error("BadTemplate", "message body must end with a newline");
        }
        return unescape_tag_literals(std::string_view(rendered).substr(start, stop - 1 - start));
    };

    size_t system_end = tags.empty() ? rendered.size() : tags[0];
    sample.system = body_between(kSystemHeader.size(), system_end);

    for (size_t t = 0; t < tags.size(); ++t) {
        size_t header_end = tags[t] + kTurnTag.size();
        ChatTurn turn;
        if (rendered.compare(header_end, 5, "User\n") == 0) {
            turn.role = ChatTurn::Role::User;
            header_end += 5;
        } else if (rendered.compare(header_end, 10, "Assistant\n") == 0) {
            turn.role = ChatTurn::Role::Assistant;
            header_end += 10;
        } else {
            throw Error("BadTemplate", "turn tag must be followed by User or Assistant");
        }
        size_t stop = t + 1 < tags.size() ? tags[t + 1] : rendered.size();
        turn.text = body_between(header_end, stop);
        sample.turns.push_back(std::move(turn));
    }
    return sample;
}

static std::vector<std::pair<size_t, size_t>> assistant_body_spans(const std::string & rendered) {
    static const std::string kAssistantTag = std::string(kTurnTag) + "Assistant\n";
    std::vector<std::pair<size_t, size_t>> spans;
    for (size_t pos = rendered.find(kAssistantTag); pos != std::string::npos;
         pos = rendered.find(kAssistantTag, pos + 1)) {
        size_t start = pos + kAssistantTag.size();
        size_t next = rendered.find(kTurnTag, start);
        size_t end = next == std::string::npos ? rendered.size() : next;
        if (end > start && rendered[end - 1] == '\n') {
            --end;   // the template's terminating newline is not response text
        }
        spans.emplace_back(start, end);
    }
    return spans;
}

std::vector<int> loss_mask(const ChatSample & sample, const tok::TokenizerModel & tokenizer) {
    auto spans = assistant_body_spans(sample.rendered);
    auto ids = tokenizer.encode(sample.rendered);
    std::vector<int> mask(ids.size(), 0);
    size_t offset = 0;
    for (size_t i = 0; i < ids.size(); ++i) {
        size_t len = tokenizer.id_to_token[static_cast<size_t>(ids[i])].size();
        size_t begin = offset;
        size_t end = offset + len;
        for (const auto & [bs, be] : spans) {
            if (begin >= bs && end <= be) {
                mask[i] = 1;
                break;
            }
        }
        offset = end;
    }
    return mask;
}

std::vector<ChatSample> mix_datasets(std::vector<ChatSample> domain,
                                     const std::vector<ChatSample> & general, uint64_t rng_seed) {
    domain.insert(domain.end(), general.begin(), general.end());
    shuffle_seeded(domain, rng_seed);
    return domain;
}

const std::vector<std::string> & AttributeLabels::canonical_order() {
    static const std::vector<std::string> order = {
        "quality", "helpfulness", "correctness", "toxicity", "humor", "creativity", "verbosity",
    };
    return order;
}

void AttributeLabels::validate() const {
    for (const auto & [name, score] : scores) {
        if (score < kMinScore || score > kMaxScore) {
            throw Error("ScoreOutOfRange", name + "=" + std::to_string(score) +
                        " outside [" + std::to_string(kMinScore) + ", " +
                        std::to_string(kMaxScore) + "]");
        }
    }
}

std::string AttributeLabels::canonical() const {
    std::string out;
    std::set<std::string> emitted;
    auto append = [&](const std::string & name, int score) {
        if (!out.empty()) out.push_back(',');
        out += name;
        out.push_back(':');
        out += std::to_string(score);
    };
    for (const auto & name : canonical_order()) {
        auto it = scores.find(name);
        if (it != scores.end()) {
            append(name, it->second);
            emitted.insert(name);
        }
    }
    for (const auto & [name, score] : scores) {   // extras, alphabetical via map order
        if (!emitted.count(name)) {
            append(name, score);
        }
    }
    return out;
}

AttributeLabels AttributeLabels::parse(const std::string & text) {
    AttributeLabels labels;
    if (text.empty()) return labels;
    size_t start = 0;
    while (start <= text.size()) {
        size_t comma = text.find(',', start);
        std::string_view part = std::string_view(text).substr(
            start, comma == std::string::npos ? std::string::npos : comma - start);
        size_t colon = part.find(':');
        if (colon == std::string_view::npos || colon == 0) {
            throw Error("BadAttributes", "expected name:score, got \"" + std::string(part) + "\"");
        }
        int score = 0;
        const char * first = part.data() + colon + 1;
        const char * last = part.data() + part.size();
        auto [p, ec] = std::from_chars(first, last, score);
        if (ec != std::errc() || p != last) {
            throw Error("BadAttributes", "bad score in \"" + std::string(part) + "\"");
        }
        labels.scores[std::string(part.substr(0, colon))] = score;
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    labels.validate();
    return labels;
}

ChatSample attach_attributes(ChatSample sample, const AttributeLabels & labels) {
    labels.validate();
    sample.attributes = labels.canonical();
    return sample;
}

static nlohmann::ordered_json sample_to_json(const ChatSample & s) {
    nlohmann::ordered_json j;
    j["system"] = s.system;
    auto turns = nlohmann::ordered_json::array();
    for (const auto & t : s.turns) {
        turns.push_back({{"role", to_string(t.role)}, {"text", t.text}});
    }
    j["turns"] = std::move(turns);
    j["rendered"] = s.rendered;
    j["loss_mask"] = s.loss_mask;
    if (s.attributes) {
        j["attributes"] = *s.attributes;
    }
    return j;
}

static ChatSample sample_from_json(const nlohmann::json & j) {
    ChatSample s;
    s.system = j.at("system").get<std::string>();
    for (const auto & t : j.at("turns")) {
        ChatTurn turn;
        turn.role = role_from_string(t.at("role").get<std::string>());
        turn.text = t.at("text").get<std::string>();
        s.turns.push_back(std::move(turn));
    }
    if (j.contains("rendered")) s.rendered = j["rendered"].get<std::string>();
    if (j.contains("loss_mask")) s.loss_mask = j["loss_mask"].get<std::vector<int>>();
    if (j.contains("attributes")) s.attributes = j["attributes"].get<std::string>();
    return s;
}

std::string samples_to_jsonl(const std::vector<ChatSample> & samples) {
    std::string out;
    for (const auto & s : samples) {
        out += sample_to_json(s).dump();
        out.push_back('\n');
    }
    return out;
}

std::vector<ChatSample> samples_from_jsonl(const std::string & jsonl_text) {
    std::vector<ChatSample> samples;
    for (const auto & line : split_lines(jsonl_text)) {
        if (line.empty()) continue;
        samples.push_back(sample_from_json(nlohmann::json::parse(line)));
    }
    return samples;
}

} // namespace dakit::align
