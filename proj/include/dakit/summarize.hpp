#pragma once

#include "dakit/genclient.hpp"
#include "dakit/tokenizer.hpp"

#include <string>
#include <utility>
#include <vector>

namespace dakit::summarize {

struct BugComment {
    std::string author;
    std::string text;
};

struct BugRecord {
    std::string bug_id;
    std::string synopsis;
    std::string module;
    std::string description;
    std::string severity;
    std::string priority;
    std::vector<BugComment> comments;

    // One text block: header fields, description, then comments in order,
    // each comment introduced by "#N : Author : <author>".
    std::string flatten() const;

    std::string to_json() const;
    static BugRecord from_json(const std::string & json_text);
};

std::vector<BugRecord> bugs_from_jsonl(const std::string & jsonl_text);

// alias -> original path, in first-appearance order; injective both ways
struct AliasTable {
    std::vector<std::pair<std::string, std::string>> entries;

    bool empty() const { return entries.empty(); }
    const std::string * path_of(const std::string & alias) const;
    const std::string * alias_of(const std::string & path) const;

    std::string to_json() const;
    static AliasTable from_json(const std::string & json_text);
};

// Replaces every occurrence of a long filesystem path (>= 3 "/segment"
// groups and at least min_length characters, at a non-path-character
// boundary) with "P0", "P1", ... in first-appearance order. Alias names that
// already occur in the text as standalone tokens are skipped so that
// unalias(alias_paths(text)) == text exactly.
std::pair<std::string, AliasTable> alias_paths(const std::string & text, size_t min_length = 10);
std::string unalias(const std::string & text, const AliasTable & table);

// Greedy packing: split at blank lines, then single newlines, then ". "
// sentence ends, then a hard token split, until every chunk fits in budget
// tokens; adjacent pieces are re-merged greedily. Concatenating the chunks
// reproduces the input byte for byte. budget < 32 throws Error("BadBudget").
std::vector<std::string> chunk_to_budget(const std::string & text, size_t budget,
                                         const tok::TokenizerModel & tokenizer);

struct SummaryTask {
    enum class Kind { Technical, Managerial, Assignment };
    Kind kind = Kind::Technical;
    std::string prompt_template;   // must contain "{content}" exactly once

    void validate() const;         // Error("BadTemplate")
    static SummaryTask make(Kind kind);
};

const char * to_string(SummaryTask::Kind kind);
SummaryTask::Kind task_kind_from_string(const std::string & s);   // "technical" etc.

struct SummarizeOptions {
    size_t max_rounds = 8;
    double safety_factor = 0.9;    // fraction of the window actually used
    std::string chunk_template = "Summarize the following bug report excerpt, preserving every "
                                 "identifier, path alias, and name.\n\n{content}\n\nSummary:";
};

struct SummaryCall {
    size_t round = 0;
    std::string kind;   // "chunk" or "final"
    std::string prompt;
    std::string response;
};

struct SummaryResult {
    std::string final_text;
    AliasTable aliases;
    std::vector<SummaryCall> trace;

    std::string to_json() const;   // {final, alias_table, trace}
};

// Aliases paths once up front, then repeatedly chunks the working text and
// asks the client to summarize each chunk (summaries joined by blank lines)
// until one chunk remains; that chunk goes into the task prompt and the
// response is de-aliased. Throws Error("MaxRoundsExceeded") as soon as a
// round fails to shrink the text, or when max_rounds rounds did not reach a
// single chunk; client errors surface as Error("GenerationFailed").
SummaryResult hierarchical_summarize(const BugRecord & bug, const gen::GenerationClient & client,
                                     const SummaryTask & task, size_t budget,
                                     const tok::TokenizerModel & tokenizer,
                                     const SummarizeOptions & options = {});

} // namespace dakit::summarize
