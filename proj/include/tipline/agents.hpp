#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tipline/core.hpp"
#include "tipline/llm.hpp"
#include "tipline/prompts.hpp"
#include "tipline/retrieval.hpp"
#include "tipline/sandbox.hpp"

namespace tipline::agents {

/// Role definition: which system prompt and which tools an agent gets.
/// Data access maps to code_execution, retrieval to document_retrieval.
struct AgentSpec {
    AgentName name;
    std::optional<std::string> system_template;
    std::vector<llm::Tool> tools;
};

const AgentSpec& spec_for(AgentName name);

bool tool_permitted(AgentName agent, llm::Tool tool);

inline constexpr int kMaxToolIterations = 20;

struct TurnResult {
    std::string text;
    llm::Conversation conversation;
    std::int64_t response_entry = 0;  // transcript id of the final response
};

/// Runs agent turns against a backend, executing tool calls locally and
/// logging every exchange to the transcript.
class AgentRuntime {
public:
    AgentRuntime(llm::Backend& backend, llm::ModelParams params, Transcript& transcript,
                 const prompts::PromptLibrary& prompts, std::size_t output_truncation = 8000);

    void set_executor(sandbox::CodeExecutor* executor) noexcept { executor_ = executor; }
    void set_index(const retrieval::GuidelineIndex* index) noexcept { index_ = index; }

    /// Fresh conversation with the agent's system prompt and tool set.
    llm::Conversation new_conversation(AgentName agent) const;

    /// Sends `prompt`, then loops on tool calls until the model answers in
    /// plain text. Throws RunawayToolLoopError after kMaxToolIterations
    /// tool-calling responses; BackendError propagates.
    TurnResult run_turn(AgentName agent, llm::Conversation conversation, std::string prompt,
                        std::string_view step_tag, std::optional<int> question_id = std::nullopt);

    /// Executes one tool call on behalf of `agent`. Calls outside the agent's
    /// tool set are refused with an error message the model gets to read.
    std::string dispatch(AgentName agent, const llm::ToolCall& call);

    std::size_t rejected_calls() const noexcept { return rejected_; }
    std::size_t model_calls() const noexcept { return model_calls_; }
    Transcript& transcript() noexcept { return transcript_; }
    const prompts::PromptLibrary& prompts() const noexcept { return prompts_; }

private:
    llm::ModelResponse complete_with_overflow_retry(const llm::CompletionRequest& request);

    llm::Backend& backend_;
    llm::ModelParams params_;
    Transcript& transcript_;
    const prompts::PromptLibrary& prompts_;
    std::size_t output_truncation_;
    sandbox::CodeExecutor* executor_ = nullptr;
    const retrieval::GuidelineIndex* index_ = nullptr;
    std::size_t rejected_ = 0;
    std::size_t model_calls_ = 0;
};

}  // namespace tipline::agents
