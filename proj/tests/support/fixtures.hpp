#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tipline/core.hpp"
#include "tipline/llm.hpp"
#include "tipline/pipeline.hpp"
#include "tipline/prompts.hpp"
#include "tipline/retrieval.hpp"
#include "tipline/sandbox.hpp"

namespace tipline::testing {

inline std::filesystem::path source_dir() { return TIPLINE_DATA_DIR; }
inline std::filesystem::path peer_script() { return source_dir() / "tests" / "support" / "protocol_peer.py"; }

class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("tipline-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// 5 rows x 3 columns.
inline DatasetBundle write_bundle(const std::filesystem::path& dir, const std::string& stem = "contracts") {
    auto csv = dir / (stem + ".csv");
    auto md = dir / (stem + ".md");
    write_text_file(csv,
                    "company,amount,year\n"
                    "Acme,1200,2020\n"
                    "Borealis,560,2020\n"
                    "Acme,3400,2021\n"
                    "Cobalt,90,2021\n"
                    "Acme,780,2021\n");
    write_text_file(md,
                    "# Emergency contracts\n\nOne row per contract awarded without tender.\n\n"
                    "- company: supplier name\n- amount: contract value in euros\n- year: award year\n");
    return load_bundle(csv, md);
}

class FakeExecutor final : public sandbox::CodeExecutor {
public:
    sandbox::ExecutionResult execute(std::string_view code) override {
        ++calls;
        last_code = std::string(code);
        sandbox::ExecutionResult r;
        r.stdout_text = "ok: " + std::to_string(code.size()) + " chars";
        return r;
    }
    int calls = 0;
    std::string last_code;
};

inline pipeline::ExecutorFactory fake_executors() {
    return [](const DatasetBundle&) { return std::make_unique<FakeExecutor>(); };
}

inline prompts::PromptLibrary shipped_prompts() { return prompts::PromptLibrary::load(source_dir() / "prompts"); }

inline retrieval::GuidelineIndex shipped_index() {
    return retrieval::GuidelineIndex::ingest(retrieval::load_corpus(source_dir() / "knowledge"));
}

inline llm::ModelResponse text(std::string content) { return llm::ModelResponse{std::move(content), {}, "stop"}; }

inline llm::ModelResponse tool(const std::string& name, json args, std::string content = {}) {
    llm::ModelResponse r;
    r.content = std::move(content);
    r.tool_calls.push_back(llm::ToolCall{"", name, std::move(args)});
    r.finish_reason = "tool_calls";
    return r;
}

inline std::string verdict_text(int option) {
    switch (option) {
        case 1: return "Option 1: the findings are publishable as they stand.";
        case 2: return "Option 2: split the totals by year and check the largest supplier.";
        default: return "Option 3: there is no story in this question.";
    }
}

inline llm::MockScript::Rule rule(std::string agent, std::string step, std::vector<llm::ModelResponse> responses,
                                  int times = 1000) {
    llm::MockScript::Rule r;
    r.agent = std::move(agent);
    r.step_tag = std::move(step);
    r.responses = std::move(responses);
    r.times = times;
    return r;
}

/// Independent model of the verdict loop for one question.
struct LoopOutcome {
    int executions = 0;
    int verdict_turns = 0;
    std::string terminal;
    bool operator==(const LoopOutcome&) const = default;
};

inline LoopOutcome reference_loop(const std::vector<int>& script, int cap) {
    LoopOutcome r{1, 0, ""};
    std::size_t next = 0;
    for (;;) {
        if (next == script.size()) {
            r.terminal = "aborted";
            return r;
        }
        const int v = script[next++];
        ++r.verdict_turns;
        if (v == 3) {
            r.terminal = "dead_end";
            return r;
        }
        if (v == 1) {
            r.terminal = "published";
            return r;
        }
        if (r.verdict_turns >= cap) {
            r.terminal = "exhausted";
            return r;
        }
        ++r.executions;
    }
}

struct ScriptOptions {
    int num_questions = 10;
    int num_tips = 10;
    // Verdict sequence per question; questions without an entry get {1}.
    std::vector<std::vector<int>> verdicts;
    bool tool_calls = true;
    int max_interactions = 3;
};

/// A complete scripted run: every step answers with a plausible reply,
/// and the reporter's verdicts follow `verdicts` in call order.
inline llm::MockScript full_script(const ScriptOptions& o) {
    llm::MockScript s;
    std::string questions;
    for (int i = 1; i <= o.num_questions; ++i)
        questions += std::to_string(i) + ". Which supplier dominates contract group " + std::to_string(i) + "?\n";

    auto with_tool = [&](const std::string& tool_name, json args, const std::string& reply) {
        std::vector<llm::ModelResponse> r;
        if (o.tool_calls) r.push_back(tool(tool_name, std::move(args)));
        r.push_back(text(reply));
        return r;
    };
    const json code{{"code", "df.sample(frac=1, random_state=0).head()"}};
    const json query{{"query", "check the denominator of every rate"}};

    s.rules.push_back(rule("reporter", "step1_questions",
                           with_tool("code_execution", {{"code", "print(df.columns.tolist())"}}, questions), 1));
    s.rules.push_back(rule("analyst", "step2_plan", {text("1. Clean names.\n2. Sum amount by company.")}));
    s.rules.push_back(rule("editor", "step2_editor_review",
                           with_tool("document_retrieval", query, "Check duplicates before summing.")));
    s.rules.push_back(rule("analyst", "step2_revise",
                           {text("1. Drop duplicates.\n2. Clean names.\n3. Sum amount by company.")}));
    s.rules.push_back(rule("analyst", "step3_execute", with_tool("code_execution", code, "Executed the plan.")));
    s.rules.push_back(rule("analyst", "step3_summarize",
                           {text("- Acme holds 3 of 5 contracts\n- Acme received 5380 euros in total")}));

    std::vector<llm::ModelResponse> verdicts;
    for (int q = 0; q < o.num_questions; ++q) {
        const auto& seq = q < static_cast<int>(o.verdicts.size()) ? o.verdicts[q] : std::vector<int>{1};
        for (int v : seq) verdicts.push_back(text(verdict_text(v)));
    }
    if (!verdicts.empty()) s.rules.push_back(rule("reporter", "step3_reporter_feedback", verdicts, 1));

    s.rules.push_back(rule("analyst", "step3_followup", with_tool("code_execution", code, "Ran the new angle.")));
    s.rules.push_back(rule("editor", "step3_editor_review",
                           with_tool("document_retrieval", query, "Confirm the totals with a second method.")));
    s.rules.push_back(rule("analyst", "step3_editor_revise", with_tool("code_execution", code, "Totals confirmed.")));
    s.rules.push_back(rule("reporter", "step3_final_summary",
                           {text("- Acme won most emergency contracts\n- Acme took 5380 euros")}));

    // Step 4 cites only questions that will reach publication.
    std::vector<int> published;
    for (int q = 0; q < o.num_questions; ++q) {
        const auto& seq = q < static_cast<int>(o.verdicts.size()) ? o.verdicts[q] : std::vector<int>{1};
        if (reference_loop(seq, o.max_interactions).terminal == "published") published.push_back(q + 1);
    }
    if (published.empty()) published.push_back(1);
    std::string compile;
    const int np = static_cast<int>(published.size());
    for (int i = 1; i <= o.num_tips; ++i) {
        const int q = published[static_cast<std::size_t>((i - 1) % np)];
        const int idx = (i - 1) / np + 1;
        compile += "- Tip " + std::to_string(i) + ": Acme dominates group " + std::to_string(q) + " [" +
                   std::to_string(q) + "." + std::to_string(idx) + "]\n";
    }
    s.rules.push_back(rule("reporter", "step4_compile", {text(compile)}));
    s.rules.push_back(rule("baseline", "baseline_answer",
                           with_tool("code_execution", code, "- Acme has the most contracts\n- Total is 6030 euros")));
    return s;
}

inline pipeline::EngineOptions memory_options() {
    pipeline::EngineOptions o;
    o.persist = false;
    o.executor_factory = fake_executors();
    o.created_at = "2024-01-01T00:00:00Z";
    return o;
}

}  // namespace tipline::testing
