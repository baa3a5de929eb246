// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria.
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "support/fixtures.hpp"
#include "support/reference_metrics.hpp"
#include "support/tfidf_oracle.hpp"
#include "tipline/agents.hpp"
#include "tipline/error.hpp"
#include "tipline/evaluation.hpp"
#include "tipline/parsers.hpp"

using namespace tipline;
using namespace tipline::testing;
using Clock = std::chrono::steady_clock;

namespace {

struct Failure {
    std::string why;
};

void require(bool ok, const std::string& why) {
    if (!ok) throw Failure{why};
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Fixture {
    TempDir dir;
    DatasetBundle bundle = write_bundle(dir.path());
    prompts::PromptLibrary lib = shipped_prompts();
    retrieval::GuidelineIndex index = shipped_index();
};

int count_prompts(const Transcript& t, const std::string& tag) {
    int n = 0;
    for (const auto& e : t.entries()) n += e.step_tag == tag && e.direction == Direction::prompt;
    return n;
}

std::vector<std::string> prompt_tags(const Transcript& t) {
    std::vector<std::string> out;
    for (const auto& e : t.entries())
        if (e.direction == Direction::prompt) out.push_back(e.step_tag);
    return out;
}

// ---- criteria ----

std::string verdict_loop_oracle() {
    Fixture f;
    std::vector<std::vector<int>> scripts{{}};
    for (std::size_t len = 1; len <= 4; ++len) {
        std::vector<std::vector<int>> grown;
        for (const auto& s : scripts)
            if (s.size() == len - 1)
                for (int v : {1, 2, 3}) {
                    auto t = s;
                    t.push_back(v);
                    grown.push_back(t);
                }
        scripts.insert(scripts.end(), grown.begin(), grown.end());
    }
    require(scripts.size() == 121, "expected 121 scripts, built " + std::to_string(scripts.size()));

    const auto t0 = Clock::now();
    int cases = 0;
    for (const auto& script : scripts) {
        for (int cap = 1; cap <= 3; ++cap) {
            PipelineConfig cfg;
            cfg.num_questions = 1;
            cfg.num_tips = 2;
            cfg.max_interactions = cap;
            llm::MockBackend backend(full_script({.num_questions = 1, .num_tips = 2, .verdicts = {script}}));
            pipeline::PipelineRun run(f.bundle, cfg, Setup::agents, backend, f.lib, &f.index, memory_options());
            LoopOutcome got;
            try {
                run.run();
                got.terminal = std::string(pipeline::to_string(run.state().outcomes.at(0).terminal));
            } catch (const PipelineError&) {
                got.terminal = "aborted";
            }
            const auto& t = run.transcript();
            got.executions = count_prompts(t, "step3_execute") + count_prompts(t, "step3_followup");
            for (const auto& e : t.entries())
                got.verdict_turns += e.step_tag == "step3_reporter_feedback" && e.direction == Direction::response;
            if (got.terminal != "aborted") {
                const auto& o = run.state().outcomes.at(0);
                require(o.analysis_executions == got.executions, "outcome execution count disagrees with transcript");
                require(static_cast<int>(o.verdicts.size()) == got.verdict_turns,
                        "outcome verdict count disagrees with transcript");
            }
            const LoopOutcome want = reference_loop(script, cap);
            if (!(got == want)) {
                std::ostringstream why;
                why << "script [";
                for (int v : script) why << v;
                why << "] cap " << cap << ": engine (" << got.executions << "," << got.verdict_turns << ","
                    << got.terminal << ") reference (" << want.executions << "," << want.verdict_turns << ","
                    << want.terminal << ")";
                throw Failure{why.str()};
            }
            ++cases;
        }
    }
    const double secs = seconds_since(t0);
    require(secs < 5.0, "took " + std::to_string(secs) + " s");
    char buf[96];
    std::snprintf(buf, sizeof buf, "%d cases in %.2f s", cases, secs);
    return buf;
}

std::string sequencing() {
    Fixture f;
    const auto t0 = Clock::now();
    // Mixed paths: publish, follow-up then publish, dead end, exhausted.
    std::vector<std::vector<int>> verdicts{{1}, {2, 1}, {3}, {2, 2, 2}, {1}, {1}, {2, 1}, {1}, {1}, {1}};
    llm::MockBackend backend(full_script({.verdicts = verdicts}));
    auto r = pipeline::run_pipeline(f.bundle, default_config(), backend, f.lib, &f.index, memory_options());

    std::vector<std::string> want{"step1_questions"};
    for (const auto& v : verdicts) {
        for (const char* tag : {"step2_plan", "step2_editor_review", "step2_revise", "step3_execute", "step3_summarize"})
            want.push_back(tag);
        for (std::size_t i = 0; i < v.size(); ++i) {
            want.push_back("step3_reporter_feedback");
            if (v[i] == 2 && i + 1 < 3) {
                want.push_back("step3_followup");
                want.push_back("step3_summarize");
            }
        }
        if (v.back() == 1) {
            for (const char* tag : {"step3_editor_review", "step3_editor_revise", "step3_summarize", "step3_final_summary"})
                want.push_back(tag);
        }
    }
    want.push_back("step4_compile");
    const auto got = prompt_tags(r.transcript);
    if (got != want) {
        std::size_t i = 0;
        while (i < got.size() && i < want.size() && got[i] == want[i]) ++i;
        throw Failure{"step_tag sequence diverges at prompt " + std::to_string(i) + ": got '" +
                      (i < got.size() ? got[i] : "<end>") + "', want '" + (i < want.size() ? want[i] : "<end>") +
                      "'"};
    }
    require(r.tip_sheet.tips.size() == 10, "tip sheet has " + std::to_string(r.tip_sheet.tips.size()) + " tips");
    const double secs = seconds_since(t0);
    require(secs < 10.0, "took " + std::to_string(secs) + " s");
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu prompts in order, 10 tips, %.2f s", got.size(), secs);
    return buf;
}

std::string baseline_contract() {
    Fixture f;
    llm::MockBackend agents_backend(full_script({}));
    auto ga = pipeline::run_pipeline(f.bundle, default_config(), agents_backend, f.lib, &f.index, memory_options());
    llm::MockBackend bl_backend(full_script({}));
    auto bl = pipeline::run_baseline(f.bundle, default_config(), bl_backend, f.lib, memory_options());

    const auto tags = prompt_tags(bl.transcript);
    require(count_prompts(bl.transcript, "baseline_answer") == 10, "baseline did not answer 10 questions");
    for (const auto& tag : tags)
        require(tag == "step1_questions" || tag == "baseline_answer" || tag == "step4_compile",
                "unexpected baseline turn " + tag);

    // Every baseline answer is its own conversation: one prompt, one final response.
    std::map<int, int> prompts_per_q, responses_per_q;
    for (const auto& e : bl.transcript.entries()) {
        if (e.step_tag != "baseline_answer") continue;
        require(e.agent == AgentName::baseline, "baseline answer from another agent");
        prompts_per_q[*e.question_id] += e.direction == Direction::prompt;
        responses_per_q[*e.question_id] += e.direction == Direction::response;
    }
    for (int q = 1; q <= 10; ++q)
        require(prompts_per_q[q] == 1 && responses_per_q[q] == 1,
                "question " + std::to_string(q) + " is not a single conversation");

    // Empty system prompt for baseline conversations, role prompts for agents.
    Transcript scratch("x");
    agents::AgentRuntime runtime(bl_backend, {}, scratch, f.lib);
    require(!runtime.new_conversation(AgentName::baseline).system_prompt, "baseline has a system prompt");
    for (auto a : {AgentName::analyst, AgentName::reporter, AgentName::editor})
        require(runtime.new_conversation(a).system_prompt.has_value(), "agent without system prompt");

    // Steps 1 and 4 structurally identical between the two setups.
    auto shape = [](const Transcript& t, const std::string& tag) {
        std::vector<std::pair<std::string, std::string>> s;
        for (const auto& e : t.entries())
            if (e.step_tag == tag) s.emplace_back(std::string(to_string(e.agent)), std::string(to_string(e.direction)));
        return s;
    };
    for (const char* tag : {"step1_questions", "step4_compile"})
        require(shape(ga.transcript, tag) == shape(bl.transcript, tag), std::string(tag) + " differs between setups");
    require(bl.tip_sheet.tips.size() == 10, "baseline sheet has wrong length");
    return "10 single-conversation answers, no feedback turns, no system prompt";
}

std::string metrics_arithmetic() {
    using namespace evaluation;
    auto [sheet, key] = make_coding_sheet(reference_sheets(), 42);
    auto t = aggregate(code_from_counts(key), key);
    const std::array<std::array<double, 3>, 5> ga{
        {{0.90, 0.70, 0.13}, {0.77, 0.63, 0.53}, {0.93, 0.73, 0.27}, {0.87, 0.63, 0.57}, {0.97, 0.67, 0.20}}};
    for (std::size_t p = 0; p < 5; ++p) {
        const auto* c = t.cell(reference_projects()[p], Setup::agents);
        require(c && round2(c->validity) == ga[p][0] && round2(c->newsworthiness) == ga[p][1] &&
                    round2(c->precision) == ga[p][2],
                "GA rates differ for " + reference_projects()[p]);
    }
    require(compare_overall(t, {Setup::agents, 0.89, 0.67, 0.34}).empty(), "GA overall differs from 0.89/0.67/0.34");
    const auto& bl = t.overall.at(Setup::baseline);
    require(std::abs(bl.newsworthiness - 0.49) < 0.005 && std::abs(bl.precision - 0.27) < 0.005,
            "BL pooled overall is not 0.49/0.27");
    const auto flags = compare_overall(t, {Setup::baseline, 0.82, 0.52, 0.28});
    require(flags.size() == 2, "expected the BL newsworthiness and precision rows to be flagged");
    return "GA per-project and 0.89/0.67/0.34 overall; BL pooled 0.49/0.27 flagged against 0.52/0.28";
}

std::string blinding() {
    using namespace evaluation;
    auto sheets = reference_sheets();
    auto [a, ka] = make_coding_sheet(sheets, 1234);
    auto [b, kb] = make_coding_sheet(sheets, 1234);
    require(render_sheet_csv(a) == render_sheet_csv(b), "same seed gave different sheets");
    require(ka.entries == kb.entries, "same seed gave different keys");

    const std::string csv = render_sheet_csv(a);
    std::string lower;
    for (char c : csv) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (const char* token : {"baseline", "agents", "agent", "setup"})
        require(lower.find(token) == std::string::npos, std::string("sheet contains '") + token + "'");
    for (const auto& s : sheets) require(csv.find(s.run_id) == std::string::npos, "sheet contains a run id");

    std::size_t matched = 0;
    for (const auto& row : a.rows) {
        const auto& e = ka.entries.at(row.blind_id);
        for (const auto& s : sheets)
            if (s.run_id == e.run_id && s.setup == e.setup && s.dataset_id == e.project &&
                s.tips.at(static_cast<std::size_t>(e.tip_index)).text == row.tip_text)
                ++matched;
    }
    require(matched == 300 && a.rows.size() == 300 && ka.entries.size() == 300, "unblinding is not the identity");
    return "deterministic, no setup tokens, 300/300 tips unblind to their source";
}

std::string parser_suite() {
    using namespace parsers;
    // Example tables.
    auto qs = parse_numbered_list("1. How many rows?\n2. Which region leads?", 2);
    require(qs.size() == 2 && qs[0].text == "How many rows?" && qs[1].text == "Which region leads?",
            "numbered list example");
    bool threw = false;
    try {
        parse_numbered_list("Some prose with no list.", 10);
    } catch (const ReplyFormatError&) {
        threw = true;
    }
    require(threw, "prose accepted as a numbered list");
    require(parse_numbered_list("1) a\n2) b", 2) == parse_numbered_list("1. a\n2. b", 2), "marker forms differ");
    require(parse_bullets("- a\n- b").items == std::vector<std::string>{"a", "b"}, "bullet example");
    require(parse_bullets("- a\n  continued\n- b").items == std::vector<std::string>{"a continued", "b"},
            "continuation example");
    auto v = parse_verdict("Option 2: check per-capita rates");
    require(v.option == VerdictOption::needs_more_work && v.feedback == "check per-capita rates", "verdict example");
    require(parse_verdict("I choose option 1.").option == VerdictOption::publishable, "case-insensitive verdict");
    threw = false;
    try {
        parse_verdict("Interesting analysis.");
    } catch (const ReplyFormatError&) {
        threw = true;
    }
    require(threw, "verdict without option accepted");

    // Properties.
    std::mt19937_64 rng(77);
    const std::vector<std::string> words{"Acme", "won", "42%", "of", "all", "contracts", "(2020)", "vs.", "é", "\"x\""};
    auto item = [&] {
        std::string s;
        for (std::size_t i = rng() % 7 + 1; i > 0; --i) s += (s.empty() ? "" : " ") + words[rng() % words.size()];
        return s;
    };
    for (int iter = 0; iter < 500; ++iter) {
        std::vector<std::string> items(rng() % 10 + 1);
        for (auto& s : items) s = item();
        auto parsed = parse_numbered_list(format_numbered_list(items), static_cast<int>(items.size()));
        for (std::size_t i = 0; i < items.size(); ++i) require(parsed[i].text == items[i], "numbered format∘parse");
        BulletList list{items};
        for (std::string_view m : {"-", "*", "•"}) require(parse_bullets(format_bullets(list, m)) == list, "bullet format∘parse");
        for (int o = 1; o <= 3; ++o) {
            auto pv = parse_verdict("Option " + std::to_string(o) + ": " + item());
            const int got = static_cast<int>(pv.option);
            require(got == o && got >= 1 && got <= 3, "verdict out of range");
        }
    }
    return "example tables and 500 property iterations";
}

std::string tool_matrix() {
    llm::MockBackend backend(llm::MockScript{});
    auto lib = shipped_prompts();
    auto index = shipped_index();
    Transcript t("m");
    agents::AgentRuntime runtime(backend, {}, t, lib);
    FakeExecutor exec;
    runtime.set_executor(&exec);
    runtime.set_index(&index);
    // Table 1: analyst data+no retrieval, reporter data+no retrieval, editor retrieval only.
    const std::map<std::pair<AgentName, llm::Tool>, bool> table{
        {{AgentName::analyst, llm::Tool::code_execution}, true},
        {{AgentName::analyst, llm::Tool::document_retrieval}, false},
        {{AgentName::reporter, llm::Tool::code_execution}, true},
        {{AgentName::reporter, llm::Tool::document_retrieval}, false},
        {{AgentName::editor, llm::Tool::code_execution}, false},
        {{AgentName::editor, llm::Tool::document_retrieval}, true},
    };
    for (const auto& [key, allowed] : table) {
        const auto [agent, tool] = key;
        json args = tool == llm::Tool::code_execution ? json{{"code", "len(df)"}} : json{{"query", "denominator"}};
        const int before = exec.calls;
        const auto rejected_before = runtime.rejected_calls();
        const auto out = runtime.dispatch(agent, llm::ToolCall{"c", std::string(llm::to_string(tool)), args});
        const bool dispatched = out.rfind("error:", 0) != 0;
        require(dispatched == allowed && agents::tool_permitted(agent, tool) == allowed,
                std::string(to_string(agent)) + "/" + std::string(llm::to_string(tool)));
        require((runtime.rejected_calls() - rejected_before == 1) == !allowed, "rejection not counted");
        if (tool == llm::Tool::code_execution) require((exec.calls - before == 1) == allowed, "executor reached");
    }
    return "6/6 agent-tool pairs";
}

std::string retrieval_oracle() {
    std::vector<retrieval::GuidelineDoc> docs;
    for (auto& [id, body] : toy_corpus()) docs.push_back({id, id, body});
    auto index = retrieval::GuidelineIndex::ingest(docs);
    require(index.chunks().size() == 12, "toy corpus has " + std::to_string(index.chunks().size()) + " chunks");
    std::vector<std::pair<std::string, int>> ids;
    std::vector<std::string> texts;
    for (const auto& c : index.chunks()) {
        ids.emplace_back(c.doc_id, c.chunk_index);
        texts.push_back(c.text);
    }
    const auto vocab = toy_vocabulary();
    std::mt19937_64 rng(31337);
    for (int q = 0; q < 20; ++q) {
        std::string query;
        for (std::size_t w = rng() % 4 + 1; w > 0; --w) query += vocab[rng() % vocab.size()] + " ";
        const auto got = index.query(query, 3);
        const auto want = oracle_rank(ids, texts, query, 3);
        require(got.size() == want.size(), "result count differs for '" + query + "'");
        for (std::size_t i = 0; i < got.size(); ++i)
            require(got[i].chunk->doc_id == want[i].doc_id && got[i].chunk->chunk_index == want[i].chunk_index,
                    "ranking differs for '" + query + "'");
    }
    return "20 random queries, k=3, 12 chunks";
}

std::string replay_determinism() {
    Fixture f;
    PipelineConfig cfg;
    cfg.seed = 2024;
    auto opts = memory_options();
    opts.persist = true;
    opts.record = true;
    opts.created_at.reset();
    opts.runs_dir = f.dir / "recorded";
    llm::MockBackend backend(full_script({.verdicts = {{2, 1}, {3}, {1}, {2, 2, 2}}}));
    auto first = pipeline::run_pipeline(f.bundle, cfg, backend, f.lib, &f.index, opts);

    llm::ReplayBackend replay(first.run_dir / "llm_cassette.jsonl");
    auto ropts = memory_options();
    ropts.persist = true;
    ropts.runs_dir = f.dir / "replayed";
    ropts.run_id = replay.header().run_id;
    ropts.run_seed = replay.header().seed;
    ropts.created_at = replay.header().created_at;
    auto second = pipeline::run_pipeline(f.bundle, cfg, replay, f.lib, &f.index, ropts);
    const auto a = read_text_file(first.run_dir / "tipsheet.json");
    const auto b = read_text_file(second.run_dir / "tipsheet.json");
    require(a == b, "tipsheet.json differs after replay");
    return std::to_string(a.size()) + " bytes identical";
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<std::string()>>> criteria{
        {"verdict-loop oracle", verdict_loop_oracle},
        {"pipeline sequencing", sequencing},
        {"baseline contract", baseline_contract},
        {"metrics arithmetic", metrics_arithmetic},
        {"blinding properties", blinding},
        {"parser suite", parser_suite},
        {"tool-access matrix", tool_matrix},
        {"retrieval oracle", retrieval_oracle},
        {"replay determinism", replay_determinism},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        std::string detail;
        bool ok = false;
        try {
            detail = check();
            ok = true;
        } catch (const Failure& f) {
            detail = f.why;
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        failed += !ok;
        std::cout << (ok ? "PASS" : "FAIL") << "  " << name << "  (" << detail << ")\n";
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
              << " acceptance criteria passed\n";
    return failed;
}
