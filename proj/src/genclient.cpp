#include "dakit/genclient.hpp"
#include "dakit/error.hpp"
#include "dakit/util.hpp"

#include <nlohmann/json.hpp>

#define CPPHTTPLIB_NO_EXCEPTIONS
#include <httplib.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

namespace dakit::gen {

RuleMock::RuleMock(std::vector<Rule> rules, std::optional<std::string> default_reply)
    : rules_(std::move(rules)), default_reply_(std::move(default_reply)) {
    compiled_.reserve(rules_.size());
    for (const auto & rule : rules_) {
        if (!rule.pattern.empty() && rule.pattern[0] == '^') {
            compiled_.emplace_back(std::regex(rule.pattern));
        } else {
            compiled_.emplace_back(std::nullopt);
        }
    }
}

GenerationResponse RuleMock::generate(const GenerationRequest & req) const {
    for (size_t i = 0; i < rules_.size(); ++i) {
        bool hit;
        if (compiled_[i]) {
            hit = std::regex_search(req.prompt, *compiled_[i]);
        } else {
            hit = req.prompt.find(rules_[i].pattern) != std::string::npos;
        }
        if (hit) {
            return {rules_[i].reply, rules_[i].reply.size()};
        }
    }
    if (default_reply_) {
        return {*default_reply_, default_reply_->size()};
    }
    throw Error("NoRuleMatched", "no rule matched and no default reply configured");
}

RuleMock RuleMock::from_json(const std::string & json_text) {
    auto j = nlohmann::json::parse(json_text);
    std::vector<Rule> rules;
    for (const auto & r : j.at("rules")) {
        rules.push_back({r.at("pattern").get<std::string>(), r.at("reply").get<std::string>()});
    }
    std::optional<std::string> def;
    if (j.contains("default")) {
        def = j.at("default").get<std::string>();
    }
    return RuleMock(std::move(rules), std::move(def));
}

GenerationResponse TruncatingMock::generate(const GenerationRequest & req) const {
    std::string out;
    size_t words = 0;
    size_t i = 0;
    const std::string & p = req.prompt;
    while (i < p.size() && words < n_words_) {
        while (i < p.size() && std::isspace(static_cast<unsigned char>(p[i]))) ++i;
        size_t start = i;
        while (i < p.size() && !std::isspace(static_cast<unsigned char>(p[i]))) ++i;
        if (i > start) {
            if (!out.empty()) out.push_back(' ');
            out += p.substr(start, i - start);
            ++words;
        }
    }
    return {out, out.size()};
}

GenerationResponse MarkerMock::generate(const GenerationRequest & req) const {
    static const std::regex marker_re("\\[\\[M[0-9]+\\]\\]");
    std::string out;
    std::vector<std::string> seen;
    auto begin = std::sregex_iterator(req.prompt.begin(), req.prompt.end(), marker_re);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        std::string m = it->str();
        bool dup = false;
        for (const auto & s : seen) {
            if (s == m) { dup = true; break; }
        }
        if (dup) continue;
        seen.push_back(m);
        if (!out.empty()) out.push_back(' ');
        out += m;
    }
    return {out, out.size()};
}

HttpClient::HttpClient(std::string endpoint, std::string auth_env_var, int timeout_ms,
                       int backoff_base_ms)
    : endpoint_(std::move(endpoint)), auth_env_var_(std::move(auth_env_var)),
      timeout_ms_(timeout_ms), backoff_base_ms_(backoff_base_ms) {}

GenerationResponse HttpClient::generate(const GenerationRequest & req) const {
    static std::atomic<uint64_t> next_request_id{1};
    const uint64_t request_id = next_request_id.fetch_add(1);
    const std::string rid = " (request " + std::to_string(request_id) + ")";

    // split "http://host:port/path" into origin and path
    std::string origin = endpoint_;
    std::string path = "/";
    size_t scheme = endpoint_.find("://");
    if (scheme != std::string::npos) {
        size_t slash = endpoint_.find('/', scheme + 3);
        if (slash != std::string::npos) {
            origin = endpoint_.substr(0, slash);
            path = endpoint_.substr(slash);
        }
    }

    nlohmann::ordered_json body;
    body["prompt"] = req.prompt;
    body["max_tokens"] = req.max_tokens;
    body["temperature"] = req.temperature;
    body["stop"] = req.stop;
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!auth_env_var_.empty()) {
        if (const char * token = std::getenv(auth_env_var_.c_str())) {
            headers.emplace("Authorization", std::string("Bearer ") + token);
        }
    }

    std::string last_error;
    const int max_attempts = 3;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(backoff_base_ms_ << (attempt - 1)));
        }
        httplib::Client cli(origin);
        cli.set_connection_timeout(0, timeout_ms_ * 1000LL);
        cli.set_read_timeout(0, timeout_ms_ * 1000LL);
        cli.set_write_timeout(0, timeout_ms_ * 1000LL);

        auto res = cli.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "Timeout";
            continue;
        }
        if (res->status != 200) {
            last_error = "BadStatus:" + std::to_string(res->status);
            continue;
        }
        auto parsed = nlohmann::json::parse(res->body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("text") || !parsed["text"].is_string()) {
            throw Error("BadPayload", "response is not JSON with a \"text\" field" + rid);
        }
        std::string text = parsed["text"].get<std::string>();
        size_t token_count = text.size();
        if (parsed.contains("token_count") && parsed["token_count"].is_number_unsigned()) {
            token_count = parsed["token_count"].get<size_t>();
        }
        return {std::move(text), token_count};
    }
    if (last_error.rfind("BadStatus", 0) == 0) {
        throw Error("BadStatus", "endpoint kept failing with " + last_error.substr(10) +
                    " after " + std::to_string(max_attempts) + " attempts" + rid);
    }
    throw Error("Timeout", "no response after " + std::to_string(max_attempts) + " attempts" + rid);
}

} // namespace dakit::gen
