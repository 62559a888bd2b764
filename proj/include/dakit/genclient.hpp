#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

namespace dakit::gen {

struct GenerationRequest {
    std::string prompt;
    int max_tokens = 512;
    double temperature = 0.0;
    std::vector<std::string> stop;
};

struct GenerationResponse {
    std::string text;
    size_t token_count = 0;   // bytes of text under the byte-level default tokenizer
};

// Abstracts the generation model behind every pipeline. Implementations must
// be safe for concurrent generate() calls; mocks are deterministic.
class GenerationClient {
  public:
    virtual ~GenerationClient() = default;
    virtual GenerationResponse generate(const GenerationRequest & req) const = 0;
};

struct Rule {
    std::string pattern;   // literal substring, or a regex when it starts with '^'
    std::string reply;
};

// First matching rule wins; with no match the default reply is returned, or
// Error("NoRuleMatched") is thrown when none is configured.
class RuleMock : public GenerationClient {
  public:
    RuleMock(std::vector<Rule> rules, std::optional<std::string> default_reply = std::nullopt);

    GenerationResponse generate(const GenerationRequest & req) const override;

    // JSON: {"rules": [{"pattern": ..., "reply": ...}, ...], "default": ...?}
    static RuleMock from_json(const std::string & json_text);

  private:
    std::vector<Rule> rules_;
    std::vector<std::optional<std::regex>> compiled_;
    std::optional<std::string> default_reply_;
};

// Adapts a function; handy for test fixtures.
class LambdaClient : public GenerationClient {
  public:
    explicit LambdaClient(std::function<std::string(const std::string &)> fn)
        : fn_(std::move(fn)) {}
    GenerationResponse generate(const GenerationRequest & req) const override {
        std::string text = fn_(req.prompt);
        return {text, text.size()};
    }

  private:
    std::function<std::string(const std::string &)> fn_;
};

// Replies with the first n_words whitespace-separated words of the prompt.
class TruncatingMock : public GenerationClient {
  public:
    explicit TruncatingMock(size_t n_words) : n_words_(n_words) {}
    GenerationResponse generate(const GenerationRequest & req) const override;

  private:
    size_t n_words_;
};

// Replies with every distinct [[M<number>]] marker found in the prompt, in
// first-appearance order. Used to prove content reachability through the
// hierarchical summarizer.
class MarkerMock : public GenerationClient {
  public:
    GenerationResponse generate(const GenerationRequest & req) const override;
};

// Replies with the prompt unchanged; triggers the non-shrinking guard.
class EchoMock : public GenerationClient {
  public:
    GenerationResponse generate(const GenerationRequest & req) const override {
        return {req.prompt, req.prompt.size()};
    }
};

// Generic JSON-over-HTTP client: POSTs {prompt, max_tokens, temperature,
// stop} and expects {text}. Three attempts with exponential backoff. The
// bearer token, when auth_env_var is set and present in the environment, is
// sent as an Authorization header. Errors (Timeout, BadStatus, BadPayload)
// carry the request id.
class HttpClient : public GenerationClient {
  public:
    HttpClient(std::string endpoint, std::string auth_env_var = "", int timeout_ms = 30000,
               int backoff_base_ms = 100);

    GenerationResponse generate(const GenerationRequest & req) const override;

  private:
    std::string endpoint_;
    std::string auth_env_var_;
    int timeout_ms_;
    int backoff_base_ms_;
};

} // namespace dakit::gen
