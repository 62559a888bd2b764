#pragma once

#include "dakit/genclient.hpp"

#include <map>
#include <string>
#include <vector>

namespace dakit::eval {

struct MCQuestion {
    std::string stem;
    std::vector<std::string> choices;   // 2 to 8 entries, lettered A..H
    size_t gold = 0;                    // index into choices
    std::string benchmark;              // e.g. "Design", "Scripting", "Bugs", "Circuits"

    void validate() const;              // Error("BadQuestion")
    bool operator==(const MCQuestion & other) const = default;
};

std::string questions_to_jsonl(const std::vector<MCQuestion> & questions);
std::vector<MCQuestion> questions_from_jsonl(const std::string & jsonl_text);

// Stem, one "A. choice" line per choice, then "Answer: X" (with_answer) or
// "Answer:" left open.
std::string render_question(const MCQuestion & q, bool with_answer);

// Shots first, blank line between blocks, the query question last with its
// answer left open. A shot equal to q throws Error("ShotOverlap").
std::string build_prompt(const MCQuestion & q, const std::vector<MCQuestion> & shots);

// First standalone letter A-H in the reply; npos-like -1 when absent.
int parse_answer(const std::string & reply);

struct RunResult {
    std::vector<double> per_run_accuracy;
    double mean = 0.0;
    uint64_t shot_seed_base = 0;
    std::vector<std::string> log;   // unparseable replies and other notes

    std::string to_json() const;
};

// runs passes over the benchmark; run i draws each question's shots without
// replacement (excluding the question itself) from a fresh generator seeded
// with seed_base + i. Unparseable replies score wrong and are logged. A
// client error aborts with Error("ClientFailure"); entries logged so far are
// left in *live_log when provided.
RunResult run_mc_eval(const std::vector<MCQuestion> & bench, const gen::GenerationClient & model,
                      size_t runs = 5, uint64_t seed_base = 0, size_t shots_per_question = 5,
                      std::vector<std::string> * live_log = nullptr);

// Unbiased estimator 1 - C(n-c, k)/C(n, k), evaluated in product form.
// Throws Error("BadCounts") unless 0 <= c <= n and 1 <= k <= n.
double pass_at_k(size_t n, size_t c, size_t k);

struct ScriptTask {
    std::string id;
    size_t n = 0;   // samples generated
    size_t c = 0;   // samples passing
};

struct ScriptScore {
    std::map<std::string, double> per_task;
    double mean = 0.0;
};

// Unweighted mean of pass_at_k over tasks. Throws Error("EmptyTasks").
ScriptScore score_script_bench(const std::vector<ScriptTask> & tasks, size_t k = 5);
std::vector<ScriptTask> script_tasks_from_jsonl(const std::string & jsonl_text);

// Average of headerless "id,score" rows on a 1-7 scale.
// Throws Error("BadScore") for out-of-range or unparseable scores.
double likert_mean(const std::string & csv_text);

} // namespace dakit::eval
