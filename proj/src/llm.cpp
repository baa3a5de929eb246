#include "tipline/llm.hpp"

#include <algorithm>
#include <cstdlib>
#include <regex>
#include <thread>

#include "httplib.h"

#include "tipline/core.hpp"
#include "tipline/error.hpp"

namespace tipline::llm {

std::string_view to_string(Tool t) {
    return t == Tool::code_execution ? "code_execution" : "document_retrieval";
}

std::optional<Tool> tool_from_string(std::string_view s) {
    if (s == "code_execution") return Tool::code_execution;
    if (s == "document_retrieval") return Tool::document_retrieval;
    return std::nullopt;
}

namespace {

std::string_view role_name(Role r) {
    switch (r) {
        case Role::user: return "user";
        case Role::assistant: return "assistant";
        case Role::tool: return "tool";
    }
    return "user";
}

Role role_from(std::string_view s) {
    if (s == "user") return Role::user;
    if (s == "assistant") return Role::assistant;
    if (s == "tool") return Role::tool;
    throw Error("unknown message role '" + std::string(s) + "'");
}

void check_response(const ModelResponse& r, const std::string& where) {
    if (r.content.empty() && r.tool_calls.empty())
        throw BackendError(where + ": response has neither content nor tool calls");
}

}  // namespace

// ---- Conversation ----

void Conversation::add_user(std::string content) { messages.push_back({Role::user, std::move(content), {}, {}}); }

void Conversation::add_assistant(std::string content, std::vector<ToolCall> calls) {
    messages.push_back({Role::assistant, std::move(content), std::move(calls), {}});
}

void Conversation::add_tool_result(const std::string& call_id, std::string content) {
    bool known = false;
    for (auto it = messages.rbegin(); it != messages.rend() && !known; ++it) {
        if (it->role == Role::user) break;
        if (it->role == Role::assistant)
            known = std::any_of(it->tool_calls.begin(), it->tool_calls.end(),
                                [&](const ToolCall& c) { return c.id == call_id; });
    }
    if (!known) throw std::logic_error("tool result for unknown call id '" + call_id + "'");
    messages.push_back({Role::tool, std::move(content), {}, call_id});
}

bool Conversation::has_tool(Tool t) const {
    return std::find(tools_enabled.begin(), tools_enabled.end(), t) != tools_enabled.end();
}

// ---- JSON ----

void to_json(json& j, const ToolCall& c) { j = json{{"id", c.id}, {"tool", c.tool}, {"arguments", c.arguments}}; }
void from_json(const json& j, ToolCall& c) {
    c.id = j.value("id", std::string{});
    j.at("tool").get_to(c.tool);
    c.arguments = j.value("arguments", json::object());
}

void to_json(json& j, const Message& m) {
    j = json{{"role", std::string(role_name(m.role))}, {"content", m.content}};
    if (!m.tool_calls.empty()) j["tool_calls"] = m.tool_calls;
    if (!m.tool_call_id.empty()) j["tool_call_id"] = m.tool_call_id;
}
void from_json(const json& j, Message& m) {
    m.role = role_from(j.at("role").get<std::string>());
    m.content = j.value("content", std::string{});
    m.tool_calls = j.value("tool_calls", std::vector<ToolCall>{});
    m.tool_call_id = j.value("tool_call_id", std::string{});
}

void to_json(json& j, const Conversation& c) {
    std::vector<std::string> tools;
    for (Tool t : c.tools_enabled) tools.emplace_back(to_string(t));
    j = json{{"system_prompt", c.system_prompt ? json(*c.system_prompt) : json(nullptr)},
             {"messages", c.messages},
             {"tools_enabled", tools}};
}
void from_json(const json& j, Conversation& c) {
    if (j.contains("system_prompt") && !j["system_prompt"].is_null())
        c.system_prompt = j["system_prompt"].get<std::string>();
    else
        c.system_prompt.reset();
    j.at("messages").get_to(c.messages);
    c.tools_enabled.clear();
    for (const auto& name : j.value("tools_enabled", std::vector<std::string>{})) {
        auto t = tool_from_string(name);
        if (!t) throw Error("unknown tool '" + name + "'");
        c.tools_enabled.push_back(*t);
    }
}

void to_json(json& j, const ModelResponse& r) {
    j = json{{"content", r.content}, {"tool_calls", r.tool_calls}, {"finish_reason", r.finish_reason}};
}
void from_json(const json& j, ModelResponse& r) {
    if (j.is_string()) {
        r = ModelResponse{j.get<std::string>(), {}, "stop"};
        return;
    }
    r.content = j.value("content", std::string{});
    r.tool_calls = j.value("tool_calls", std::vector<ToolCall>{});
    r.finish_reason = j.value("finish_reason", std::string(r.tool_calls.empty() ? "stop" : "tool_calls"));
}

void to_json(json& j, const ModelParams& p) {
    j = json{{"model_name", p.model_name}, {"temperature", p.temperature}};
    j["seed"] = p.seed ? json(*p.seed) : json(nullptr);
}
void from_json(const json& j, ModelParams& p) {
    j.at("model_name").get_to(p.model_name);
    j.at("temperature").get_to(p.temperature);
    if (j.contains("seed") && !j["seed"].is_null())
        p.seed = j["seed"].get<std::uint64_t>();
    else
        p.seed.reset();
}

void to_json(json& j, const CompletionRequest& r) {
    j = json{{"agent", r.agent}, {"step_tag", r.step_tag}, {"params", r.params}, {"conversation", r.conversation}};
}
void from_json(const json& j, CompletionRequest& r) {
    j.at("agent").get_to(r.agent);
    j.at("step_tag").get_to(r.step_tag);
    j.at("params").get_to(r.params);
    j.at("conversation").get_to(r.conversation);
}

std::string CompletionRequest::hash() const { return sha256_hex(json(*this).dump()); }

// ---- mock ----

MockScript MockScript::from_json(const json& j) {
    MockScript script;
    const json& rules = j.is_array() ? j : j.at("rules");
    for (const auto& r : rules) {
        Rule rule;
        rule.agent = r.at("agent").get<std::string>();
        rule.step_tag = r.at("step").get<std::string>();
        if (r.contains("pattern") && !r["pattern"].is_null()) rule.pattern = r["pattern"].get<std::string>();
        rule.times = r.value("times", 1);
        if (rule.times < 1) throw Error("mock rule times must be >= 1");
        for (const auto& resp : r.at("responses")) {
            ModelResponse m = resp.get<ModelResponse>();
            check_response(m, "mock rule " + rule.agent + "/" + rule.step_tag);
            rule.responses.push_back(std::move(m));
        }
        if (rule.responses.empty()) throw Error("mock rule " + rule.agent + "/" + rule.step_tag + " has no responses");
        script.rules.push_back(std::move(rule));
    }
    return script;
}

MockScript MockScript::load(const std::filesystem::path& path) {
    try {
        return from_json(json::parse(read_text_file(path)));
    } catch (const json::exception& e) {
        throw Error("invalid mock script " + path.string() + ": " + e.what());
    }
}

json MockScript::to_json() const {
    json out = json::array();
    for (const auto& r : rules) {
        json jr{{"agent", r.agent}, {"step", r.step_tag}, {"times", r.times}, {"responses", r.responses}};
        if (r.pattern) jr["pattern"] = *r.pattern;
        out.push_back(std::move(jr));
    }
    return json{{"rules", out}};
}

MockBackend::MockBackend(MockScript script) : script_(std::move(script)), used_(script_.rules.size(), 0) {}

ModelResponse MockBackend::complete(const CompletionRequest& request) {
    std::lock_guard lock(mu_);
    ++calls_;
    const std::string last =
        request.conversation.messages.empty() ? std::string{} : request.conversation.messages.back().content;
    for (std::size_t i = 0; i < script_.rules.size(); ++i) {
        const auto& rule = script_.rules[i];
        const std::size_t capacity = rule.responses.size() * static_cast<std::size_t>(rule.times);
        if (used_[i] >= capacity) continue;
        if (rule.agent != request.agent || rule.step_tag != request.step_tag) continue;
        if (rule.pattern && !std::regex_search(last, std::regex(*rule.pattern))) continue;
        ModelResponse r = rule.responses[used_[i] % rule.responses.size()];
        ++used_[i];
        for (std::size_t k = 0; k < r.tool_calls.size(); ++k)
            if (r.tool_calls[k].id.empty())
                r.tool_calls[k].id = "call_" + std::to_string(calls_) + "_" + std::to_string(k);
        return r;
    }
    throw UnmatchedCallError("mock script has no unexhausted rule for " + request.agent + "/" + request.step_tag);
}

std::size_t MockBackend::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

bool MockBackend::fully_consumed() const {
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < script_.rules.size(); ++i)
        if (used_[i] < script_.rules[i].responses.size() * static_cast<std::size_t>(script_.rules[i].times))
            return false;
    return true;
}

// ---- retry ----

RetryingBackend::RetryingBackend(std::shared_ptr<Backend> inner, RetryPolicy policy)
    : inner_(std::move(inner)), policy_(std::move(policy)) {
    if (policy_.max_attempts < 1) throw ConfigError("retry max_attempts must be >= 1");
    if (!policy_.sleep) policy_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

ModelResponse RetryingBackend::complete(const CompletionRequest& request) {
    auto delay = policy_.base_delay;
    for (int attempt = 1;; ++attempt) {
        try {
            return inner_->complete(request);
        } catch (const BackendError& e) {
            if (!e.retryable()) throw;
            if (attempt >= policy_.max_attempts)
                throw BackendError("giving up after " + std::to_string(attempt) + " attempts: " + e.what());
            policy_.sleep(delay);
            delay = std::chrono::milliseconds(static_cast<std::int64_t>(delay.count() * policy_.multiplier));
        }
    }
}

// ---- HTTP ----

HttpOptions HttpOptions::from_env() {
    HttpOptions o;
    const char* key = std::getenv("TIPLINE_API_KEY");
    if (!key || !*key) throw ConfigError("TIPLINE_API_KEY is not set");
    o.api_key = key;
    if (const char* base = std::getenv("TIPLINE_API_BASE"); base && *base) o.base_url = base;
    return o;
}

HttpBackend::HttpBackend(HttpOptions options) : options_(std::move(options)) {
    while (!options_.base_url.empty() && options_.base_url.back() == '/') options_.base_url.pop_back();
}

namespace {

json tool_schema(Tool t) {
    if (t == Tool::code_execution) {
        return {{"type", "function"},
                {"function",
                 {{"name", "code_execution"},
                  {"description",
                   "Run Python code in the persistent analysis session. The dataset is loaded as the pandas "
                   "DataFrame `df`. Returns captured stdout and stderr."},
                  {"parameters",
                   {{"type", "object"},
                    {"properties", {{"code", {{"type", "string"}}}}},
                    {"required", json::array({"code"})}}}}}};
    }
    return {{"type", "function"},
            {"function",
             {{"name", "document_retrieval"},
              {"description", "Search the editorial guidelines for passages relevant to a query."},
              {"parameters",
               {{"type", "object"},
                {"properties", {{"query", {{"type", "string"}}}, {"k", {{"type", "integer"}, {"default", 4}}}}},
                {"required", json::array({"query"})}}}}}};
}

// Splits "https://host:port/base" into ("https://host:port", "/base").
std::pair<std::string, std::string> split_base_url(const std::string& url) {
    auto scheme_end = url.find("://");
    auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

json HttpBackend::build_request_body(const CompletionRequest& request) {
    json messages = json::array();
    const auto& conv = request.conversation;
    if (conv.system_prompt) messages.push_back({{"role", "system"}, {"content", *conv.system_prompt}});
    for (const auto& m : conv.messages) {
        json jm{{"role", std::string(role_name(m.role))}};
        switch (m.role) {
            case Role::user:
                jm["content"] = m.content;
                break;
            case Role::assistant: {
                jm["content"] = m.content.empty() && !m.tool_calls.empty() ? json(nullptr) : json(m.content);
                if (!m.tool_calls.empty()) {
                    json calls = json::array();
                    for (const auto& c : m.tool_calls)
                        calls.push_back({{"id", c.id},
                                         {"type", "function"},
                                         {"function", {{"name", c.tool}, {"arguments", c.arguments.dump()}}}});
                    jm["tool_calls"] = std::move(calls);
                }
                break;
            }
            case Role::tool:
                jm["tool_call_id"] = m.tool_call_id;
                jm["content"] = m.content;
                break;
        }
        messages.push_back(std::move(jm));
    }
    json body{{"model", request.params.model_name},
              {"temperature", request.params.temperature},
              {"messages", std::move(messages)}};
    if (request.params.seed) body["seed"] = *request.params.seed;
    if (!conv.tools_enabled.empty()) {
        json tools = json::array();
        for (Tool t : conv.tools_enabled) tools.push_back(tool_schema(t));
        body["tools"] = std::move(tools);
    }
    return body;
}

ModelResponse HttpBackend::parse_response_body(const json& body) {
    if (!body.contains("choices") || body["choices"].empty()) throw BackendError("response has no choices");
    const json& choice = body["choices"][0];
    const json& msg = choice.at("message");
    ModelResponse r;
    if (msg.contains("content") && msg["content"].is_string()) r.content = msg["content"].get<std::string>();
    if (msg.contains("tool_calls") && msg["tool_calls"].is_array()) {
        for (const auto& c : msg["tool_calls"]) {
            ToolCall call;
            call.id = c.value("id", std::string{});
            call.tool = c.at("function").at("name").get<std::string>();
            const std::string args = c["function"].value("arguments", std::string("{}"));
            call.arguments = json::parse(args, nullptr, false);
            if (call.arguments.is_discarded()) call.arguments = json{{"_raw", args}};
            r.tool_calls.push_back(std::move(call));
        }
    }
    if (choice.contains("finish_reason") && choice["finish_reason"].is_string())
        r.finish_reason = choice["finish_reason"].get<std::string>();
    check_response(r, "chat completion");
    return r;
}

ModelResponse HttpBackend::complete(const CompletionRequest& request) {
    auto [host, base_path] = split_base_url(options_.base_url);
    httplib::Client client(host);
    client.set_read_timeout(options_.timeout.count(), 0);
    client.set_write_timeout(options_.timeout.count(), 0);
    client.set_connection_timeout(30, 0);
    httplib::Headers headers{{"Authorization", "Bearer " + options_.api_key}};

    auto res = client.Post(base_path + "/chat/completions", headers, build_request_body(request).dump(),
                           "application/json");
    if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()));
    if (res->status == 429) throw RateLimitError("rate limited (HTTP 429)");
    if (res->status >= 500) throw TransportError("server error HTTP " + std::to_string(res->status));
    if (res->status >= 400) {
        if (res->body.find("context_length") != std::string::npos ||
            res->body.find("maximum context") != std::string::npos)
            throw ContextOverflowError("context window exceeded");
        throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 500));
    }
    json body = json::parse(res->body, nullptr, false);
    if (body.is_discarded()) throw TransportError("response body is not JSON");
    return parse_response_body(body);
}

// ---- record / replay ----

RecordingBackend::RecordingBackend(std::shared_ptr<Backend> inner, const std::filesystem::path& cassette,
                                   const CassetteHeader& header)
    : inner_(std::move(inner)) {
    out_.open(cassette, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error("cannot write cassette " + cassette.string());
    out_ << json{{"type", "header"}, {"run_id", header.run_id}, {"seed", header.seed}, {"created_at", header.created_at}}
                .dump()
         << '\n';
    out_.flush();
}

ModelResponse RecordingBackend::complete(const CompletionRequest& request) {
    ModelResponse r = inner_->complete(request);
    std::lock_guard lock(mu_);
    out_ << json{{"type", "interaction"}, {"hash", request.hash()}, {"request", request}, {"response", r}}.dump()
         << '\n';
    out_.flush();
    return r;
}

ReplayBackend::ReplayBackend(const std::filesystem::path& cassette) {
    std::ifstream in(cassette, std::ios::binary);
    if (!in) throw Error("cannot read cassette " + cassette.string());
    std::string line;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        const std::string type = j.value("type", std::string{});
        if (type == "header") {
            header_.run_id = j.value("run_id", std::string{});
            header_.seed = j.value("seed", std::uint64_t{0});
            header_.created_at = j.value("created_at", std::string{});
            saw_header = true;
        } else if (type == "interaction") {
            by_hash_[j.at("hash").get<std::string>()].push_back(j.at("response").get<ModelResponse>());
        }
    }
    if (!saw_header) throw Error("cassette has no header: " + cassette.string());
}

ModelResponse ReplayBackend::complete(const CompletionRequest& request) {
    std::lock_guard lock(mu_);
    auto it = by_hash_.find(request.hash());
    if (it == by_hash_.end() || it->second.empty())
        throw ReplayMissError("no recorded response for " + request.agent + "/" + request.step_tag + " request");
    ModelResponse r = std::move(it->second.front());
    it->second.pop_front();
    return r;
}

}  // namespace tipline::llm
