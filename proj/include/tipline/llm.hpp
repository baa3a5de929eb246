#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tipline::llm {

using json = nlohmann::json;

enum class Tool { code_execution, document_retrieval };

std::string_view to_string(Tool t);
std::optional<Tool> tool_from_string(std::string_view s);

struct ToolCall {
    std::string id;
    std::string tool;
    json arguments = json::object();
    bool operator==(const ToolCall&) const = default;
};

enum class Role { user, assistant, tool };

struct Message {
    Role role = Role::user;
    std::string content;
    std::vector<ToolCall> tool_calls;  // assistant only
    std::string tool_call_id;          // tool only
    bool operator==(const Message&) const = default;
};

/// One agent's chat history. Baseline conversations carry no system prompt.
struct Conversation {
    std::optional<std::string> system_prompt;
    std::vector<Message> messages;
    std::vector<Tool> tools_enabled;

    void add_user(std::string content);
    void add_assistant(std::string content, std::vector<ToolCall> calls = {});
    /// Throws std::logic_error unless the call id belongs to an earlier
    /// assistant tool call.
    void add_tool_result(const std::string& call_id, std::string content);
    bool has_tool(Tool t) const;

    bool operator==(const Conversation&) const = default;
};

struct ModelResponse {
    std::string content;
    std::vector<ToolCall> tool_calls;
    std::string finish_reason = "stop";
    bool operator==(const ModelResponse&) const = default;
};

struct ModelParams {
    std::string model_name = "gpt-4-turbo-preview";
    double temperature = 1.0;
    std::optional<std::uint64_t> seed;
    bool operator==(const ModelParams&) const = default;
};

/// Everything a backend sees for one call. `agent` and `step_tag` are
/// routing metadata: live backends ignore them, the mock matches on them.
struct CompletionRequest {
    Conversation conversation;
    ModelParams params;
    std::string agent;
    std::string step_tag;

    /// Stable hash of the canonical JSON form; keys cassette lookups.
    std::string hash() const;
};

void to_json(json& j, const ToolCall& c);
void from_json(const json& j, ToolCall& c);
void to_json(json& j, const Message& m);
void from_json(const json& j, Message& m);
void to_json(json& j, const Conversation& c);
void from_json(const json& j, Conversation& c);
void to_json(json& j, const ModelResponse& r);
void from_json(const json& j, ModelResponse& r);
void to_json(json& j, const ModelParams& p);
void from_json(const json& j, ModelParams& p);
void to_json(json& j, const CompletionRequest& r);
void from_json(const json& j, CompletionRequest& r);

class Backend {
public:
    virtual ~Backend() = default;
    /// Returns the next assistant turn; never mutates the conversation.
    virtual ModelResponse complete(const CompletionRequest& request) = 0;
};

// ---- mock ----

/// Scripted responses for offline runs. Rules are tried in order; the first
/// unexhausted rule whose agent, step and optional regex (searched in the
/// last message) match serves its next response.
struct MockScript {
    struct Rule {
        std::string agent;
        std::string step_tag;
        std::optional<std::string> pattern;
        std::vector<ModelResponse> responses;
        int times = 1;  // the response list is served this many times over
    };
    std::vector<Rule> rules;

    static MockScript from_json(const json& j);
    static MockScript load(const std::filesystem::path& path);
    json to_json() const;
};

class MockBackend final : public Backend {
public:
    explicit MockBackend(MockScript script);
    ModelResponse complete(const CompletionRequest& request) override;

    std::size_t calls() const;
    bool fully_consumed() const;

private:
    MockScript script_;
    std::vector<std::size_t> used_;
    std::size_t calls_ = 0;
    mutable std::mutex mu_;
};

// ---- retry ----

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_delay{500};
    double multiplier = 2.0;
    std::function<void(std::chrono::milliseconds)> sleep;  // defaults to this_thread::sleep_for
};

/// Retries transport and rate-limit failures with exponential backoff.
/// Other errors pass straight through.
class RetryingBackend final : public Backend {
public:
    RetryingBackend(std::shared_ptr<Backend> inner, RetryPolicy policy = {});
    ModelResponse complete(const CompletionRequest& request) override;

private:
    std::shared_ptr<Backend> inner_;
    RetryPolicy policy_;
};

// ---- live HTTP ----

struct HttpOptions {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key;
    std::chrono::seconds timeout{120};

    /// Reads TIPLINE_API_KEY (required) and TIPLINE_API_BASE (optional).
    static HttpOptions from_env();
};

/// OpenAI-style chat-completions client with function-calling tools.
class HttpBackend final : public Backend {
public:
    explicit HttpBackend(HttpOptions options);
    ModelResponse complete(const CompletionRequest& request) override;

    static json build_request_body(const CompletionRequest& request);
    static ModelResponse parse_response_body(const json& body);

private:
    HttpOptions options_;
};

// ---- record / replay ----

struct CassetteHeader {
    std::string run_id;
    std::uint64_t seed = 0;
    std::string created_at;
    bool operator==(const CassetteHeader&) const = default;
};

/// Forwards to an inner backend and appends every (request, response) pair
/// to a JSONL cassette whose first line is the run header.
class RecordingBackend final : public Backend {
public:
    RecordingBackend(std::shared_ptr<Backend> inner, const std::filesystem::path& cassette,
                     const CassetteHeader& header);
    ModelResponse complete(const CompletionRequest& request) override;

private:
    std::shared_ptr<Backend> inner_;
    std::ofstream out_;
    std::mutex mu_;
};

/// Serves recorded responses by request hash. Identical requests are served
/// in recording order.
class ReplayBackend final : public Backend {
public:
    explicit ReplayBackend(const std::filesystem::path& cassette);
    ModelResponse complete(const CompletionRequest& request) override;

    const CassetteHeader& header() const noexcept { return header_; }

private:
    CassetteHeader header_;
    std::map<std::string, std::deque<ModelResponse>> by_hash_;
    std::mutex mu_;
};

}  // namespace tipline::llm
