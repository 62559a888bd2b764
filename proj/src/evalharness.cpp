#include "dakit/evalharness.hpp"
#include "dakit/error.hpp"
#include "dakit/util.hpp"

#include <nlohmann/json.hpp>

#include <random>

namespace dakit::eval {

void MCQuestion::validate() const {
    if (choices.size() < 2 || choices.size() > 8) {
        throw Error("BadQuestion", "question needs 2-8 choices, got " +
                    std::to_string(choices.size()));
    }
    if (gold >= choices.size()) {
        throw Error("BadQuestion", "gold index " + std::to_string(gold) + " out of range");
    }
}

std::string questions_to_jsonl(const std::vector<MCQuestion> & questions) {
    std::string out;
    for (const auto & q : questions) {
        nlohmann::ordered_json j;
        j["stem"] = q.stem;
        j["choices"] = q.choices;
        j["gold"] = q.gold;
        j["benchmark"] = q.benchmark;
        out += j.dump();
        out.push_back('\n');
    }
    return out;
}

std::vector<MCQuestion> questions_from_jsonl(const std::string & jsonl_text) {
    std::vector<MCQuestion> questions;
    for (const auto & line : split_lines(jsonl_text)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        MCQuestion q;
        q.stem = j.at("stem").get<std::string>();
        q.choices = j.at("choices").get<std::vector<std::string>>();
        q.gold = j.at("gold").get<size_t>();
        q.benchmark = j.at("benchmark").get<std::string>();
        q.validate();
        questions.push_back(std::move(q));
    }
    return questions;
}

std::string render_question(const MCQuestion & q, bool with_answer) {
    q.validate();
    std::string out = q.stem;
    out.push_back('\n');
    for (size_t i = 0; i < q.choices.size(); ++i) {
        out.push_back(static_cast<char>('A' + i));
        out += ". ";
        out += q.choices[i];
        out.push_back('\n');
    }
    out += "Answer:";
    if (with_answer) {
        out.push_back(' ');
        out.push_back(static_cast<char>('A' + q.gold));
    }
    return out;
}

std::string build_prompt(const MCQuestion & q, const std::vector<MCQuestion> & shots) {
    std::string out;
    for (const auto & shot : shots) {
        if (shot == q) {
            throw Error("ShotOverlap", "question appears among its own shots");
        }
        out += render_question(shot, true);
        out += "\n\n";
    }
    out += render_question(q, false);
    return out;
}

int parse_answer(const std::string & reply) {
    auto is_word = [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
               c == '_';
    };
    for (size_t i = 0; i < reply.size(); ++i) {
        if (reply[i] >= 'A' && reply[i] <= 'H') {
            bool left_ok = i == 0 || !is_word(reply[i - 1]);
            bool right_ok = i + 1 == reply.size() || !is_word(reply[i + 1]);
            if (left_ok && right_ok) {
                return reply[i] - 'A';
            }
        }
    }
    return -1;
}

RunResult run_mc_eval(const std::vector<MCQuestion> & bench, const gen::GenerationClient & model,
                      size_t runs, uint64_t seed_base, size_t shots_per_question,
                      std::vector<std::string> * live_log) {
    if (bench.size() <= shots_per_question) {
        throw Error("BadBenchmark", "benchmark must have more than " +
                    std::to_string(shots_per_question) + " questions, got " +
                    std::to_string(bench.size()));
    }
    for (const auto & q : bench) {
        q.validate();
    }
    RunResult result;
    result.shot_seed_base = seed_base;
    std::vector<std::string> local_log;
    std::vector<std::string> & log = live_log ? *live_log : local_log;

    for (size_t run = 0; run < runs; ++run) {
        std::mt19937_64 rng(seed_base + run);
        size_t correct = 0;
        for (size_t qi = 0; qi < bench.size(); ++qi) {
            std::vector<size_t> pool;
            pool.reserve(bench.size() - 1);
            for (size_t j = 0; j < bench.size(); ++j) {
                if (j != qi) pool.push_back(j);
            }
            std::vector<MCQuestion> shots;
            for (size_t t = 0; t < shots_per_question; ++t) {
                size_t pick = t + next_index(rng, pool.size() - t);
                std::swap(pool[t], pool[pick]);
                shots.push_back(bench[pool[t]]);
            }
            std::string prompt = build_prompt(bench[qi], shots);
            std::string reply;
            try {
                reply = model.generate({prompt}).text;
            } catch (const Error & e) {
                throw Error("ClientFailure", "model call failed on run " + std::to_string(run) +
                            " question " + std::to_string(qi) + ": " + e.what());
            }
            int answer = parse_answer(reply);
            if (answer < 0) {
                log.push_back("run " + std::to_string(run) + " question " + std::to_string(qi) +
                              ": unparseable reply " + escape_bytes(reply));
            }
            if (answer == static_cast<int>(bench[qi].gold)) {
                ++correct;
            }
        }
        result.per_run_accuracy.push_back(static_cast<double>(correct) /
                                          static_cast<double>(bench.size()));
    }
    double sum = 0.0;
    for (double a : result.per_run_accuracy) sum += a;
    result.mean = result.per_run_accuracy.empty() ? 0.0
        : sum / static_cast<double>(result.per_run_accuracy.size());
    result.log = log;
    return result;
}

std::string RunResult::to_json() const {
    nlohmann::ordered_json j;
    j["per_run_accuracy"] = per_run_accuracy;
    j["mean"] = mean;
    j["shot_seed_base"] = shot_seed_base;
    j["log"] = log;
    return j.dump(2) + "\n";
}

double pass_at_k(size_t n, size_t c, size_t k) {
    if (c > n || k < 1 || k > n) {
        throw Error("BadCounts", "need 0 <= c <= n and 1 <= k <= n, got n=" + std::to_string(n) +
                    " c=" + std::to_string(c) + " k=" + std::to_string(k));
    }
    if (n - c < k) {
        return 1.0;   // every k-subset contains a passing sample
    }
    double prod = 1.0;
    for (size_t i = 0; i < k; ++i) {
        prod *= static_cast<double>(n - c - i) / static_cast<double>(n - i);
    }
    return 1.0 - prod;
}

ScriptScore score_script_bench(const std::vector<ScriptTask> & tasks, size_t k) {
    if (tasks.empty()) {
        throw Error("EmptyTasks", "need at least one task to score");
    }
    ScriptScore score;
    double sum = 0.0;
    for (const auto & t : tasks) {
        double p = pass_at_k(t.n, t.c, k);
        score.per_task[t.id] = p;
        sum += p;
    }
    score.mean = sum / static_cast<double>(tasks.size());
    return score;
}

std::vector<ScriptTask> script_tasks_from_jsonl(const std::string & jsonl_text) {
    std::vector<ScriptTask> tasks;
    for (const auto & line : split_lines(jsonl_text)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        ScriptTask t;
        t.id = j.at("id").get<std::string>();
        t.n = j.at("n").get<size_t>();
        t.c = j.at("c").get<size_t>();
        tasks.push_back(std::move(t));
    }
    return tasks;
}

double likert_mean(const std::string & csv_text) {
    double sum = 0.0;
    size_t count = 0;
    for (const auto & line : split_lines(csv_text)) {
        if (line.empty()) continue;
        size_t comma = line.rfind(',');
        std::string field = comma == std::string::npos ? line : line.substr(comma + 1);
        double score = 0.0;
        try {
            score = parse_double(field);
        } catch (const Error &) {
            throw Error("BadScore", "unparseable Likert score \"" + field + "\"");
        }
        if (score < 1.0 || score > 7.0) {
            throw Error("BadScore", "Likert score " + field + " outside [1, 7]");
        }
        sum += score;
        ++count;
    }
    if (count == 0) {
        throw Error("BadScore", "no Likert rows to average");
    }
    return sum / static_cast<double>(count);
}

} // namespace dakit::eval
