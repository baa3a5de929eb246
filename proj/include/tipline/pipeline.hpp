#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tipline/agents.hpp"
#include "tipline/core.hpp"
#include "tipline/llm.hpp"
#include "tipline/prompts.hpp"
#include "tipline/retrieval.hpp"
#include "tipline/sandbox.hpp"

namespace tipline::pipeline {

enum class Terminal { published, dead_end, exhausted };

std::string_view to_string(Terminal t);
Terminal terminal_from_string(std::string_view s);

struct QuestionOutcome {
    int question_id = 0;
    Terminal terminal = Terminal::exhausted;
    std::optional<AnalyticalPlan> plan;
    std::vector<BulletList> all_bullets;
    std::optional<BulletList> final_insights;  // present iff published
    std::vector<FeedbackVerdict> verdicts;
    int analysis_executions = 0;
    std::optional<std::string> diagnostic;
    std::int64_t final_entry = 0;  // transcript id backing final_insights
    bool operator==(const QuestionOutcome&) const = default;
};

void to_json(json& j, const QuestionOutcome& o);
void from_json(const json& j, QuestionOutcome& o);

using ExecutorFactory = std::function<std::unique_ptr<sandbox::CodeExecutor>(const DatasetBundle&)>;

struct EngineOptions {
    std::filesystem::path runs_dir = "runs";
    bool persist = true;
    bool record = false;     // write llm_cassette.jsonl into the run directory
    bool overwrite = false;  // replace an existing run directory
    llm::ModelParams model;
    sandbox::SandboxOptions sandbox;
    ExecutorFactory executor_factory;  // defaults to a lazily started SandboxSession
    std::optional<std::string> run_id;      // replay restores these
    std::optional<std::string> created_at;
    std::optional<std::uint64_t> run_seed;
    Transcript::Clock clock;
};

struct RunState {
    std::string run_id;
    PipelineConfig config;
    Setup setup = Setup::agents;
    DatasetBundle bundle;
    std::uint64_t run_seed = 0;
    std::vector<Question> questions;
    std::vector<QuestionOutcome> outcomes;
    std::optional<TipSheet> tip_sheet;
    std::string step_cursor;
};

std::string make_run_id(const std::string& dataset_id, Setup setup, std::uint64_t seed, int repeat_index);

/// Hash of everything that defines a run except its per-repeat seed.
std::string config_hash(const PipelineConfig& config, Setup setup, const llm::ModelParams& model);

/// One pipeline (or baseline) run. The step methods are public so each
/// stage can be driven and inspected on its own.
class PipelineRun {
public:
    PipelineRun(DatasetBundle bundle, PipelineConfig config, Setup setup, llm::Backend& backend,
                const prompts::PromptLibrary& prompts, const retrieval::GuidelineIndex* index,
                EngineOptions options, int repeat_index = 0);
    ~PipelineRun();

    /// Executes every step and persists the run directory. Backend failures
    /// abort with PipelineError after the transcript has been flushed.
    TipSheet run();

    std::vector<Question> step1_generate_questions();
    AnalyticalPlan step2_plan(const Question& question);
    QuestionOutcome step3_execute_question(const Question& question, const AnalyticalPlan& plan);
    QuestionOutcome baseline_answer(const Question& question);
    TipSheet step4_compile(const std::vector<Question>& questions, const std::vector<QuestionOutcome>& outcomes);

    /// Code execution target for the next tool calls (nullptr disables it).
    void set_executor(sandbox::CodeExecutor* executor) { runtime_.set_executor(executor); }

    const RunState& state() const noexcept { return state_; }
    const Transcript& transcript() const noexcept { return transcript_; }
    const std::filesystem::path& run_dir() const noexcept { return run_dir_; }
    agents::AgentRuntime& runtime() noexcept { return runtime_; }

private:
    std::string description_bindings() const;
    BulletList summarize(llm::Conversation& analyst, int qid, std::int64_t* entry = nullptr);
    std::optional<FeedbackVerdict> reporter_verdict(const Question& q, const BulletList& bullets);
    std::unique_ptr<sandbox::CodeExecutor> make_executor() const;
    void persist_start();
    void persist_end();

    struct Forward final : llm::Backend {
        llm::Backend* target = nullptr;
        llm::ModelResponse complete(const llm::CompletionRequest& r) override { return target->complete(r); }
    };

    RunState state_;
    EngineOptions options_;
    const prompts::PromptLibrary& prompts_;
    int repeat_index_;
    std::filesystem::path run_dir_;
    Transcript transcript_;
    Forward forward_;
    std::unique_ptr<llm::Backend> recorder_;
    agents::AgentRuntime runtime_;
};

struct RunResult {
    TipSheet tip_sheet;
    RunState state;
    Transcript transcript;
    std::filesystem::path run_dir;
};

RunResult run_pipeline(const DatasetBundle& bundle, const PipelineConfig& config, llm::Backend& backend,
                       const prompts::PromptLibrary& prompts, const retrieval::GuidelineIndex* index,
                       const EngineOptions& options, int repeat_index = 0);

/// Steps 2-3 collapse to one system-prompt-free conversation per question.
RunResult run_baseline(const DatasetBundle& bundle, const PipelineConfig& config, llm::Backend& backend,
                       const prompts::PromptLibrary& prompts, const EngineOptions& options, int repeat_index = 0);

// Run directory reading, for evaluation and inspection.
struct StoredRun {
    std::filesystem::path dir;
    json config;
    TipSheet tip_sheet;
    std::vector<Question> questions;
    std::vector<QuestionOutcome> outcomes;
    Transcript transcript;
};

StoredRun load_run(const std::filesystem::path& run_dir);

std::string render_tipsheet_markdown(const TipSheet& sheet);

}  // namespace tipline::pipeline
