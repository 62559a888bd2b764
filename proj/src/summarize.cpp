#include "dakit/summarize.hpp"
#include "dakit/error.hpp"
#include "dakit/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <regex>

namespace dakit::summarize {

std::string BugRecord::flatten() const {
    std::string out;
    out += "BugId : " + bug_id + "\n";
    out += "Synopsis : " + synopsis + "\n";
    out += "Module : " + module + "\n\n";
    out += "Description :\n\n" + description + "\n\n";
    out += "Severity : " + severity + "\n";
    out += "Priority : " + priority + "\n\n";
    out += "Comments :\n";
    for (size_t i = 0; i < comments.size(); ++i) {
        out += "\n#" + std::to_string(i + 1) + " : Author : " + comments[i].author + "\n";
        out += comments[i].text + "\n";
    }
    return out;
}

std::string BugRecord::to_json() const {
    nlohmann::ordered_json j;
    j["bug_id"] = bug_id;
    j["synopsis"] = synopsis;
    j["module"] = module;
    j["description"] = description;
    j["severity"] = severity;
    j["priority"] = priority;
    auto arr = nlohmann::ordered_json::array();
    for (const auto & c : comments) {
        arr.push_back({{"author", c.author}, {"text", c.text}});
    }
    j["comments"] = std::move(arr);
    return j.dump();
}

static BugRecord bug_from_parsed(const nlohmann::json & j) {
    BugRecord b;
    b.bug_id = j.at("bug_id").get<std::string>();
    b.synopsis = j.at("synopsis").get<std::string>();
    b.module = j.at("module").get<std::string>();
    b.description = j.at("description").get<std::string>();
    b.severity = j.at("severity").get<std::string>();
    b.priority = j.at("priority").get<std::string>();
    if (j.contains("comments")) {
        for (const auto & c : j["comments"]) {
            b.comments.push_back({c.at("author").get<std::string>(),
                                  c.at("text").get<std::string>()});
        }
    }
    return b;
}

BugRecord BugRecord::from_json(const std::string & json_text) {
    return bug_from_parsed(nlohmann::json::parse(json_text));
}

std::vector<BugRecord> bugs_from_jsonl(const std::string & jsonl_text) {
    std::vector<BugRecord> bugs;
    for (const auto & line : split_lines(jsonl_text)) {
        if (line.empty()) continue;
        bugs.push_back(bug_from_parsed(nlohmann::json::parse(line)));
    }
    return bugs;
}

const std::string * AliasTable::path_of(const std::string & alias) const {
    for (const auto & [a, p] : entries) {
        if (a == alias) return &p;
    }
    return nullptr;
}

const std::string * AliasTable::alias_of(const std::string & path) const {
    for (const auto & [a, p] : entries) {
        if (p == path) return &a;
    }
    return nullptr;
}

static nlohmann::ordered_json alias_table_json(const AliasTable & table) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto & [a, p] : table.entries) {
        j[a] = p;
    }
    return j;
}

std::string AliasTable::to_json() const {
    return alias_table_json(*this).dump();
}

AliasTable AliasTable::from_json(const std::string & json_text) {
    auto j = nlohmann::json::parse(json_text);
    AliasTable t;
    for (auto it = j.begin(); it != j.end(); ++it) {
        t.entries.emplace_back(it.key(), it.value().get<std::string>());
    }
    // restore first-appearance numbering regardless of object key order
    std::sort(t.entries.begin(), t.entries.end(), [](const auto & x, const auto & y) {
        const std::string & a = x.first;
        const std::string & b = y.first;
        if (a.size() != b.size()) return a.size() < b.size();
        return a < b;
    });
    return t;
}

namespace {

bool is_path_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '.' || c == '_' || c == '-';
}

// "P<digits>" standing alone (no path characters on either side) anywhere in
// the text; such names cannot be used as fresh aliases
bool token_occurs(const std::string & text, const std::string & token) {
    size_t pos = 0;
    while ((pos = text.find(token, pos)) != std::string::npos) {
        bool left_ok = pos == 0 || !is_path_char(text[pos - 1]);
        size_t end = pos + token.size();
        bool right_ok = end == text.size() || !is_path_char(text[end]);
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

} // namespace

std::pair<std::string, AliasTable> alias_paths(const std::string & text, size_t min_length) {
    static const std::regex path_re(R"((?:/[A-Za-z0-9._-]+){3,})");

    AliasTable table;
    std::string out;
    out.reserve(text.size());
    size_t next_name = 0;
    auto fresh_alias = [&]() {
        std::string name;
        do {
            name = "P" + std::to_string(next_name++);
        } while (token_occurs(text, name));
        return name;
    };

    size_t consumed = 0;
    auto begin = std::sregex_iterator(text.begin(), text.end(), path_re);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        const size_t pos = static_cast<size_t>(it->position());
        const std::string path = it->str();
        bool left_ok = pos == 0 || !is_path_char(text[pos - 1]);
        if (path.size() < min_length || !left_ok) {
            continue;
        }
        out.append(text, consumed, pos - consumed);
        const std::string * alias = table.alias_of(path);
        if (!alias) {
            table.entries.emplace_back(fresh_alias(), path);
            alias = &table.entries.back().first;
        }
        out += *alias;
        consumed = pos + path.size();
    }
    out.append(text, consumed, text.size() - consumed);
    return {std::move(out), std::move(table)};
}

std::string unalias(const std::string & text, const AliasTable & table) {
    if (table.empty()) return text;
    std::string out;
    out.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        if (text[i] == 'P' && (i == 0 || !is_path_char(text[i - 1]))) {
            size_t j = i + 1;
            while (j < text.size() && text[j] >= '0' && text[j] <= '9') ++j;
            if (j > i + 1 && (j == text.size() || !is_path_char(text[j]))) {
                if (const std::string * path = table.path_of(text.substr(i, j - i))) {
                    out += *path;
                    i = j;
                    continue;
                }
            }
        }
        out.push_back(text[i]);
        ++i;
    }
    return out;
}

// --- chunking ---

namespace {

enum class SplitLevel { Paragraph, Line, Sentence, Hard };

std::vector<std::string> split_units(const std::string & text, SplitLevel level) {
    std::vector<std::string> units;
    size_t start = 0;
    if (level == SplitLevel::Paragraph) {
        size_t i = 0;
        while (i < text.size()) {
            if (text[i] == '\n' && i + 1 < text.size() && text[i + 1] == '\n') {
                size_t j = i;
                while (j < text.size() && text[j] == '\n') ++j;
                units.push_back(text.substr(start, j - start));
                start = i = j;
            } else {
                ++i;
            }
        }
    } else if (level == SplitLevel::Line) {
        for (size_t i = 0; i < text.size(); ++i) {
            if (text[i] == '\n') {
                units.push_back(text.substr(start, i + 1 - start));
                start = i + 1;
            }
        }
    } else {   // Sentence: cut after ". "
        for (size_t i = 0; i + 1 < text.size(); ++i) {
            if (text[i] == '.' && text[i + 1] == ' ') {
                units.push_back(text.substr(start, i + 2 - start));
                start = i + 2;
                ++i;
            }
        }
    }
    if (start < text.size()) {
        units.push_back(text.substr(start));
    }
    return units;
}

void atomize(const std::string & text, size_t budget, const tok::TokenizerModel & tokenizer,
             SplitLevel level, std::vector<std::string> & out) {
    if (level == SplitLevel::Hard) {
        auto ids = tokenizer.encode(text);
        for (size_t i = 0; i < ids.size(); i += budget) {
            size_t n = std::min(budget, ids.size() - i);
            std::vector<int> slice(ids.begin() + static_cast<ptrdiff_t>(i),
                                   ids.begin() + static_cast<ptrdiff_t>(i + n));
            out.push_back(tokenizer.decode(slice));
        }
        return;
    }
    if (tokenizer.count_tokens(text) <= budget) {
        out.push_back(text);
        return;
    }
    auto next = static_cast<SplitLevel>(static_cast<int>(level) + 1);
    auto units = split_units(text, level);
    if (units.size() <= 1) {
        atomize(text, budget, tokenizer, next, out);
        return;
    }
    for (const auto & u : units) {
        atomize(u, budget, tokenizer, next, out);
    }
}

} // namespace

std::vector<std::string> chunk_to_budget(const std::string & text, size_t budget,
                                         const tok::TokenizerModel & tokenizer) {
    if (budget < 32) {
        throw Error("BadBudget", "chunk budget must be at least 32 tokens, got " +
                    std::to_string(budget));
    }
    if (text.empty()) {
        return {text};
    }
    std::vector<std::string> pieces;
    atomize(text, budget, tokenizer, SplitLevel::Paragraph, pieces);

    std::vector<std::string> chunks;
    std::string acc;
    bool have_acc = false;
    for (auto & piece : pieces) {
        if (!have_acc) {
            acc = std::move(piece);
            have_acc = true;
        } else if (tokenizer.count_tokens(acc + piece) <= budget) {
            acc += piece;
        } else {
            chunks.push_back(std::move(acc));
            acc = std::move(piece);
        }
    }
    if (have_acc) {
        chunks.push_back(std::move(acc));
    }
    return chunks;
}

// --- tasks ---

const char * to_string(SummaryTask::Kind kind) {
    switch (kind) {
        case SummaryTask::Kind::Technical:  return "technical";
        case SummaryTask::Kind::Managerial: return "managerial";
        case SummaryTask::Kind::Assignment: return "assignment";
    }
    return "technical";
}

SummaryTask::Kind task_kind_from_string(const std::string & s) {
    for (auto kind : {SummaryTask::Kind::Technical, SummaryTask::Kind::Managerial,
                      SummaryTask::Kind::Assignment}) {
        if (s == to_string(kind)) return kind;
    }
    throw Error("BadTask", "unknown summary task \"" + s + "\"");
}

void SummaryTask::validate() const {
    size_t first = prompt_template.find("{content}");
    if (first == std::string::npos || prompt_template.find("{content}", first + 1)
                                          != std::string::npos) {
        throw Error("BadTemplate", "prompt template must contain {content} exactly once");
    }
}

SummaryTask SummaryTask::make(Kind kind) {
    SummaryTask t;
    t.kind = kind;
    switch (kind) {
        case Kind::Technical:
            t.prompt_template = "Write a technical summary of the following bug report. Cover the "
                                "problem, the affected components, and what is being requested."
                                "\n\n{content}\n\nTechnical summary:";
            break;
        case Kind::Managerial:
            t.prompt_template = "Write a managerial summary of the following bug report "
                                "discussion. Cover who said what and any open questions."
                                "\n\n{content}\n\nManagerial summary:";
            break;
        case Kind::Assignment:
            t.prompt_template = "Based on the following bug report, name the participant the bug "
                                "should be assigned to next.\n\n{content}\n\nAssignee:";
            break;
    }
    return t;
}

// --- hierarchical summarization ---

std::string SummaryResult::to_json() const {
    nlohmann::ordered_json j;
    j["final"] = final_text;
    j["alias_table"] = alias_table_json(aliases);
    auto arr = nlohmann::ordered_json::array();
    for (const auto & call : trace) {
        arr.push_back({{"round", call.round},
                       {"kind", call.kind},
                       {"prompt", call.prompt},
                       {"response", call.response}});
    }
    j["trace"] = std::move(arr);
    return j.dump(2) + "\n";
}

namespace {

std::string fill_content(const std::string & tmpl, const std::string & content) {
    std::string out = tmpl;
    size_t pos = out.find("{content}");
    out.replace(pos, 9, content);
    return out;
}

std::string call_client(const gen::GenerationClient & client, const std::string & prompt,
                        size_t round) {
    try {
        return client.generate({prompt}).text;
    } catch (const Error & e) {
        throw Error("GenerationFailed", "summarization call failed in round " +
                    std::to_string(round) + ": " + e.what());
    }
}

} // namespace

SummaryResult hierarchical_summarize(const BugRecord & bug, const gen::GenerationClient & client,
                                     const SummaryTask & task, size_t budget,
                                     const tok::TokenizerModel & tokenizer,
                                     const SummarizeOptions & options) {
    task.validate();
    SummaryTask chunk_task{task.kind, options.chunk_template};
    chunk_task.validate();

    const auto effective = static_cast<size_t>(std::floor(static_cast<double>(budget) *
                                                          options.safety_factor));
    const size_t chunk_overhead = tokenizer.count_tokens(fill_content(options.chunk_template, ""));
    const size_t final_overhead = tokenizer.count_tokens(fill_content(task.prompt_template, ""));
    const size_t overhead = std::max(chunk_overhead, final_overhead);
    if (effective < overhead + 32) {
        throw Error("BadBudget", "budget " + std::to_string(budget) +
                    " leaves fewer than 32 content tokens after template overhead");
    }
    const size_t content_budget = effective - overhead;

    SummaryResult res;
    auto [current, table] = alias_paths(bug.flatten());
    res.aliases = std::move(table);

    for (size_t round = 0; round < options.max_rounds; ++round) {
        auto chunks = chunk_to_budget(current, content_budget, tokenizer);
        if (chunks.size() <= 1) {
            std::string prompt = fill_content(task.prompt_template, current);
            std::string response = call_client(client, prompt, round);
            res.trace.push_back({round, "final", std::move(prompt), response});
            res.final_text = unalias(response, res.aliases);
            return res;
        }
        std::string next;
        for (const auto & chunk : chunks) {
            std::string prompt = fill_content(options.chunk_template, chunk);
            std::string response = call_client(client, prompt, round);
            if (!next.empty()) next += "\n\n";
            next += response;
            res.trace.push_back({round, "chunk", std::move(prompt), std::move(response)});
        }
        if (tokenizer.count_tokens(next) >= tokenizer.count_tokens(current)) {
            throw Error("MaxRoundsExceeded", "round " + std::to_string(round) +
                        " did not shrink the text; refusing to loop");
        }
        current = std::move(next);
    }
    throw Error("MaxRoundsExceeded", "more than one chunk remains after " +
                std::to_string(options.max_rounds) + " rounds");
}

} // namespace dakit::summarize
