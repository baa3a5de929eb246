#include "tipline/agents.hpp"

#include <algorithm>

#include "tipline/error.hpp"

namespace tipline::agents {

using llm::Tool;

const AgentSpec& spec_for(AgentName name) {
    static const AgentSpec analyst{AgentName::analyst, "system/analyst", {Tool::code_execution}};
    static const AgentSpec reporter{AgentName::reporter, "system/reporter", {Tool::code_execution}};
    static const AgentSpec editor{AgentName::editor, "system/editor", {Tool::document_retrieval}};
    // The baseline gets the data but no role prompt.
    static const AgentSpec baseline{AgentName::baseline, std::nullopt, {Tool::code_execution}};
    switch (name) {
        case AgentName::analyst: return analyst;
        case AgentName::reporter: return reporter;
        case AgentName::editor: return editor;
        case AgentName::baseline: return baseline;
    }
    return analyst;
}

bool tool_permitted(AgentName agent, Tool tool) {
    const auto& tools = spec_for(agent).tools;
    return std::find(tools.begin(), tools.end(), tool) != tools.end();
}

namespace {

std::string truncate(std::string text, std::size_t limit) {
    if (text.size() <= limit) return text;
    text.resize(limit);
    text += sandbox::kTruncationMarker;
    return text;
}

}  // namespace

AgentRuntime::AgentRuntime(llm::Backend& backend, llm::ModelParams params, Transcript& transcript,
                           const prompts::PromptLibrary& prompts, std::size_t output_truncation)
    : backend_(backend),
      params_(std::move(params)),
      transcript_(transcript),
      prompts_(prompts),
      output_truncation_(output_truncation) {}

llm::Conversation AgentRuntime::new_conversation(AgentName agent) const {
    const auto& spec = spec_for(agent);
    llm::Conversation c;
    if (spec.system_template) c.system_prompt = prompts_.render(*spec.system_template, {});
    c.tools_enabled = spec.tools;
    return c;
}

std::string AgentRuntime::dispatch(AgentName agent, const llm::ToolCall& call) {
    auto tool = llm::tool_from_string(call.tool);
    if (!tool) {
        ++rejected_;
        return "error: unknown tool '" + call.tool + "'";
    }
    if (!tool_permitted(agent, *tool)) {
        ++rejected_;
        return "error: tool '" + call.tool + "' is not available to the " + std::string(to_string(agent));
    }

    if (*tool == Tool::code_execution) {
        if (!call.arguments.contains("code") || !call.arguments["code"].is_string())
            return "error: code_execution requires a string argument 'code'";
        if (!executor_) return "error: code execution is unavailable in this step";
        try {
            return truncate(sandbox::render_for_model(executor_->execute(call.arguments["code"].get<std::string>())),
                            output_truncation_);
        } catch (const SandboxError& e) {
            return std::string("error: sandbox failure: ") + e.what();
        }
    }

    if (!call.arguments.contains("query") || !call.arguments["query"].is_string())
        return "error: document_retrieval requires a string argument 'query'";
    if (!index_) return "error: no guideline documents are loaded";
    int k = retrieval::kDefaultTopK;
    if (call.arguments.contains("k") && call.arguments["k"].is_number_integer())
        k = std::clamp(call.arguments["k"].get<int>(), 1, 10);
    const auto hits = index_->query(call.arguments["query"].get<std::string>(), k);
    return index_->format_results(hits, k);
}

llm::ModelResponse AgentRuntime::complete_with_overflow_retry(const llm::CompletionRequest& request) {
    llm::CompletionRequest req = request;
    std::size_t limit = output_truncation_;
    for (int attempt = 0;; ++attempt) {
        try {
            ++model_calls_;
            return backend_.complete(req);
        } catch (const ContextOverflowError&) {
            if (attempt >= 2) throw;
            limit = std::max<std::size_t>(limit / 2, 256);
            for (auto& m : req.conversation.messages)
                if (m.role == llm::Role::tool) m.content = truncate(std::move(m.content), limit);
        }
    }
}

TurnResult AgentRuntime::run_turn(AgentName agent, llm::Conversation conversation, std::string prompt,
                                  std::string_view step_tag, std::optional<int> question_id) {
    const std::string tag(step_tag);
    transcript_.append(agent, tag, Direction::prompt, prompt, question_id);
    conversation.add_user(std::move(prompt));

    int tool_rounds = 0;
    for (;;) {
        llm::CompletionRequest req{conversation, params_, std::string(to_string(agent)), tag};
        llm::ModelResponse resp = complete_with_overflow_retry(req);

        if (resp.tool_calls.empty()) {
            auto id = transcript_.append(agent, tag, Direction::response, resp.content, question_id);
            conversation.add_assistant(resp.content);
            return TurnResult{std::move(resp.content), std::move(conversation), id};
        }

        if (++tool_rounds > kMaxToolIterations)
            throw RunawayToolLoopError(std::string(to_string(agent)) + " exceeded " +
                                       std::to_string(kMaxToolIterations) + " tool-call rounds in " + tag);

        for (const auto& call : resp.tool_calls) {
            json body{{"tool", call.tool}, {"arguments", call.arguments}};
            if (!resp.content.empty()) body["content"] = resp.content;
            transcript_.append(agent, tag, Direction::tool_call, body.dump(), question_id);
        }
        conversation.add_assistant(resp.content, resp.tool_calls);
        for (const auto& call : resp.tool_calls) {
            std::string result = dispatch(agent, call);
            transcript_.append(agent, tag, Direction::tool_result, result, question_id);
            conversation.add_tool_result(call.id, std::move(result));
        }
    }
}

}  // namespace tipline::agents
