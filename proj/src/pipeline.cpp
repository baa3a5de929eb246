#include "tipline/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <regex>
#include <set>
#include <sstream>

#include "tipline/error.hpp"
#include "tipline/parsers.hpp"

namespace tipline::pipeline {

namespace {

constexpr std::string_view kTerminalNames[] = {"published", "dead_end", "exhausted"};

std::string numbered_questions_reminder(int n) {
    return "Your reply could not be parsed. List exactly " + std::to_string(n) +
           " questions, one per line, numbered \"1.\" to \"" + std::to_string(n) + ".\", with no other numbered lines.";
}

constexpr std::string_view kVerdictReminder =
    "Your reply could not be parsed. Start your answer with exactly one of \"Option 1\", \"Option 2\" or "
    "\"Option 3\". If you choose Option 2, follow it with the specific feedback for the analyst.";

std::string compile_reminder(int n) {
    return "Your reply could not be fully used. Give exactly " + std::to_string(n) +
           " bullet points, each starting with \"- \" and ending with the reference of the insight it is based on, "
           "for example [2.1].";
}

// Bullets from a reply, or the whole reply as one item when the model
// ignored the bullet format.
BulletList bullets_or_whole(const std::string& text) {
    try {
        return parsers::parse_bullets(text);
    } catch (const ReplyFormatError&) {
        BulletList b;
        std::string trimmed = retrieval::normalize_whitespace(text);
        if (!trimmed.empty()) b.items.push_back(std::move(trimmed));
        return b;
    }
}

}  // namespace

std::string_view to_string(Terminal t) { return kTerminalNames[static_cast<int>(t)]; }

Terminal terminal_from_string(std::string_view s) {
    for (int i = 0; i < 3; ++i)
        if (kTerminalNames[i] == s) return static_cast<Terminal>(i);
    throw Error("unknown terminal state '" + std::string(s) + "'");
}

void to_json(json& j, const QuestionOutcome& o) {
    j = json{{"question_id", o.question_id},
             {"terminal", std::string(to_string(o.terminal))},
             {"all_bullets", o.all_bullets},
             {"verdicts", o.verdicts},
             {"analysis_executions", o.analysis_executions},
             {"final_entry", o.final_entry}};
    j["plan"] = o.plan ? json(*o.plan) : json(nullptr);
    j["final_insights"] = o.final_insights ? json(*o.final_insights) : json(nullptr);
    j["diagnostic"] = o.diagnostic ? json(*o.diagnostic) : json(nullptr);
}

void from_json(const json& j, QuestionOutcome& o) {
    j.at("question_id").get_to(o.question_id);
    o.terminal = terminal_from_string(j.at("terminal").get<std::string>());
    j.at("all_bullets").get_to(o.all_bullets);
    j.at("verdicts").get_to(o.verdicts);
    j.at("analysis_executions").get_to(o.analysis_executions);
    o.final_entry = j.value("final_entry", std::int64_t{0});
    o.plan = j.contains("plan") && !j["plan"].is_null() ? std::optional(j["plan"].get<AnalyticalPlan>()) : std::nullopt;
    o.final_insights = j.contains("final_insights") && !j["final_insights"].is_null()
                           ? std::optional(j["final_insights"].get<BulletList>())
                           : std::nullopt;
    o.diagnostic = j.contains("diagnostic") && !j["diagnostic"].is_null()
                       ? std::optional(j["diagnostic"].get<std::string>())
                       : std::nullopt;
}

std::string make_run_id(const std::string& dataset_id, Setup setup, std::uint64_t seed, int repeat_index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(seed));
    return dataset_id + "-" + std::string(to_string(setup)) + "-" + buf + "-" + std::to_string(repeat_index + 1);
}

std::string config_hash(const PipelineConfig& config, Setup setup, const llm::ModelParams& model) {
    json j{{"config", config},
           {"setup", std::string(to_string(setup))},
           {"model_name", model.model_name},
           {"temperature", model.temperature}};
    return sha256_hex(j.dump());
}

// ---- PipelineRun ----

namespace {

RunState initial_state(DatasetBundle bundle, const PipelineConfig& config, Setup setup, const EngineOptions& options,
                       int repeat_index) {
    config.validate();
    RunState s;
    s.config = config;
    s.setup = setup;
    s.bundle = std::move(bundle);
    s.run_seed = options.run_seed.value_or(config.seed + static_cast<std::uint64_t>(repeat_index));
    s.run_id = options.run_id.value_or(make_run_id(s.bundle.dataset_id(), setup, config.seed, repeat_index));
    return s;
}

EngineOptions seeded(EngineOptions options, std::uint64_t seed) {
    options.model.seed = seed;
    return options;
}

}  // namespace

PipelineRun::PipelineRun(DatasetBundle bundle, PipelineConfig config, Setup setup, llm::Backend& backend,
                         const prompts::PromptLibrary& prompts, const retrieval::GuidelineIndex* index,
                         EngineOptions options, int repeat_index)
    : state_(initial_state(std::move(bundle), config, setup, options, repeat_index)),
      options_(seeded(std::move(options), state_.run_seed)),
      prompts_(prompts),
      repeat_index_(repeat_index),
      transcript_(state_.run_id, options_.clock),
      runtime_(forward_, options_.model, transcript_, prompts_, state_.config.output_truncation) {
    runtime_.set_index(index);
    forward_.target = &backend;

    if (options_.persist) {
        run_dir_ = options_.runs_dir / state_.run_id;
        if (std::filesystem::exists(run_dir_)) {
            if (!options_.overwrite)
                throw PipelineError("run directory already exists: " + run_dir_.string() +
                                    " (use a different seed or allow overwriting)");
            std::filesystem::remove_all(run_dir_);
        }
        std::filesystem::create_directories(run_dir_);
        transcript_.attach_sink(run_dir_ / "transcript.jsonl");
        if (options_.record) {
            llm::CassetteHeader header{state_.run_id, state_.run_seed, ""};
            header.created_at = options_.created_at.value_or(iso8601_utc(std::chrono::system_clock::now()));
            options_.created_at = header.created_at;
            recorder_ = std::make_unique<llm::RecordingBackend>(
                std::shared_ptr<llm::Backend>(&backend, [](llm::Backend*) {}), run_dir_ / "llm_cassette.jsonl",
                header);
            forward_.target = recorder_.get();
        }
        persist_start();
    }
}

PipelineRun::~PipelineRun() = default;

std::string PipelineRun::description_bindings() const {
    const auto& b = state_.bundle;
    std::string cols;
    for (const auto& c : b.columns) cols += (cols.empty() ? "" : ", ") + c;
    return b.description + "\n\nDataset file: " + b.csv_path.filename().string() + " (" +
           std::to_string(b.row_count) + " rows; columns: " + cols + "). It is loaded as the DataFrame `df`.";
}

std::unique_ptr<sandbox::CodeExecutor> PipelineRun::make_executor() const {
    if (options_.executor_factory) return options_.executor_factory(state_.bundle);
    sandbox::SandboxOptions opts = options_.sandbox;
    opts.timeout = std::chrono::seconds(state_.config.sandbox_timeout_s);
    opts.output_truncation = state_.config.output_truncation;
    return std::make_unique<sandbox::LazySandbox>(state_.bundle, opts);
}

std::vector<Question> PipelineRun::step1_generate_questions() {
    state_.step_cursor = "step1_questions";
    const int n = state_.config.num_questions;
    const std::string prompt =
        prompts_.render("step1_questions", {{"n", std::to_string(n)}, {"description", description_bindings()}});
    auto turn = runtime_.run_turn(AgentName::reporter, runtime_.new_conversation(AgentName::reporter), prompt,
                                  "step1_questions");
    try {
        state_.questions = parsers::parse_numbered_list(turn.text, n);
    } catch (const ReplyFormatError&) {
        auto retry = runtime_.run_turn(AgentName::reporter, std::move(turn.conversation),
                                       numbered_questions_reminder(n), "step1_questions");
        try {
            state_.questions = parsers::parse_numbered_list(retry.text, n);
        } catch (const ReplyFormatError& e) {
            throw PipelineError(std::string("question generation failed twice: ") + e.what());
        }
    }
    return state_.questions;
}

AnalyticalPlan PipelineRun::step2_plan(const Question& question) {
    state_.step_cursor = "step2_plan:" + std::to_string(question.id);
    if (question.text.empty()) throw PipelineError("question " + std::to_string(question.id) + " is empty");
    AnalyticalPlan plan;
    plan.question_id = question.id;

    auto draft = runtime_.run_turn(
        AgentName::analyst, runtime_.new_conversation(AgentName::analyst),
        prompts_.render("step2_plan", {{"description", description_bindings()}, {"question", question.text}}),
        "step2_plan", question.id);
    plan.draft = draft.text;
    plan.final_text = draft.text;
    if (!state_.config.use_editor) return plan;

    auto review = runtime_.run_turn(
        AgentName::editor, runtime_.new_conversation(AgentName::editor),
        prompts_.render("step2_editor_review", {{"question", question.text}, {"plan", plan.draft}}),
        "step2_editor_review", question.id);
    plan.editor_feedback = review.text;

    auto revised = runtime_.run_turn(AgentName::analyst, std::move(draft.conversation),
                                     prompts_.render("step2_revise", {{"feedback", review.text}}), "step2_revise",
                                     question.id);
    plan.final_text = revised.text;
    return plan;
}

BulletList PipelineRun::summarize(llm::Conversation& analyst, int qid, std::int64_t* entry) {
    auto turn = runtime_.run_turn(AgentName::analyst, std::move(analyst), prompts_.render("step3_summarize", {}),
                                  "step3_summarize", qid);
    analyst = std::move(turn.conversation);
    if (entry) *entry = turn.response_entry;
    return bullets_or_whole(turn.text);
}

std::optional<FeedbackVerdict> PipelineRun::reporter_verdict(const Question& q, const BulletList& bullets) {
    auto turn = runtime_.run_turn(
        AgentName::reporter, runtime_.new_conversation(AgentName::reporter),
        prompts_.render("step3_reporter_feedback",
                        {{"question", q.text}, {"bullets", parsers::format_bullets(bullets)}}),
        "step3_reporter_feedback", q.id);
    try {
        return parsers::parse_verdict(turn.text);
    } catch (const ReplyFormatError&) {
    }
    auto retry = runtime_.run_turn(AgentName::reporter, std::move(turn.conversation), std::string(kVerdictReminder),
                                   "step3_reporter_feedback", q.id);
    try {
        return parsers::parse_verdict(retry.text);
    } catch (const ReplyFormatError&) {
        return std::nullopt;
    }
}

QuestionOutcome PipelineRun::step3_execute_question(const Question& question, const AnalyticalPlan& plan) {
    const int qid = question.id;
    const auto& cfg = state_.config;
    state_.step_cursor = "step3_execute:" + std::to_string(qid);
    if (plan.final_text.empty()) throw PipelineError("question " + std::to_string(qid) + " has an empty plan");

    QuestionOutcome out;
    out.question_id = qid;
    out.plan = plan;

    auto exec = runtime_.run_turn(AgentName::analyst, runtime_.new_conversation(AgentName::analyst),
                                  prompts_.render("step3_execute", {{"description", description_bindings()},
                                                                    {"question", question.text},
                                                                    {"plan", plan.final_text}}),
                                  "step3_execute", qid);
    llm::Conversation analyst = std::move(exec.conversation);
    out.analysis_executions = 1;
    std::int64_t last_summary_entry = 0;
    out.all_bullets.push_back(summarize(analyst, qid, &last_summary_entry));

    if (cfg.use_reporter) {
        for (;;) {
            auto verdict = reporter_verdict(question, out.all_bullets.back());
            if (!verdict) {
                out.terminal = Terminal::exhausted;
                out.diagnostic = "reporter verdict could not be parsed after a format reminder";
                return out;
            }
            out.verdicts.push_back(*verdict);
            if (verdict->option == VerdictOption::dead_end) {
                out.terminal = Terminal::dead_end;
                return out;
            }
            if (verdict->option == VerdictOption::publishable) break;
            if (static_cast<int>(out.verdicts.size()) >= cfg.max_interactions) {
                out.terminal = Terminal::exhausted;
                return out;
            }
            auto follow = runtime_.run_turn(AgentName::analyst, std::move(analyst),
                                            prompts_.render("step3_followup", {{"feedback", verdict->feedback}}),
                                            "step3_followup", qid);
            analyst = std::move(follow.conversation);
            ++out.analysis_executions;
            out.all_bullets.push_back(summarize(analyst, qid, &last_summary_entry));
        }
    }

    if (cfg.use_editor) {
        state_.step_cursor = "step3_editor_review:" + std::to_string(qid);
        auto review = runtime_.run_turn(AgentName::editor, runtime_.new_conversation(AgentName::editor),
                                        prompts_.render("step3_editor_review",
                                                        {{"question", question.text},
                                                         {"plan", plan.final_text},
                                                         {"bullets", parsers::format_bullets(out.all_bullets.back())}}),
                                        "step3_editor_review", qid);
        auto revise = runtime_.run_turn(AgentName::analyst, std::move(analyst),
                                        prompts_.render("step3_editor_revise", {{"feedback", review.text}}),
                                        "step3_editor_revise", qid);
        analyst = std::move(revise.conversation);
        out.all_bullets.push_back(summarize(analyst, qid, &last_summary_entry));
    }

    if (cfg.use_reporter) {
        std::string all;
        for (std::size_t i = 0; i < out.all_bullets.size(); ++i)
            all += "Summary " + std::to_string(i + 1) + ":\n" + parsers::format_bullets(out.all_bullets[i]) + "\n";
        auto fin = runtime_.run_turn(AgentName::reporter, runtime_.new_conversation(AgentName::reporter),
                                     prompts_.render("step3_final_summary",
                                                     {{"question", question.text}, {"all_bullets", all}}),
                                     "step3_final_summary", qid);
        out.final_insights = bullets_or_whole(fin.text);
        out.final_entry = fin.response_entry;
    } else {
        out.final_insights = out.all_bullets.back();
        out.final_entry = last_summary_entry;
    }
    if (out.final_insights->empty()) {
        out.final_insights.reset();
        out.terminal = Terminal::exhausted;
        out.diagnostic = "final summary was empty";
        return out;
    }
    out.terminal = Terminal::published;
    return out;
}

QuestionOutcome PipelineRun::baseline_answer(const Question& question) {
    state_.step_cursor = "baseline_answer:" + std::to_string(question.id);
    auto turn = runtime_.run_turn(
        AgentName::baseline, runtime_.new_conversation(AgentName::baseline),
        prompts_.render("baseline_answer", {{"description", description_bindings()}, {"question", question.text}}),
        "baseline_answer", question.id);
    QuestionOutcome out;
    out.question_id = question.id;
    out.analysis_executions = 1;
    BulletList bullets = bullets_or_whole(turn.text);
    out.all_bullets.push_back(bullets);
    out.final_entry = turn.response_entry;
    if (bullets.empty()) {
        out.terminal = Terminal::exhausted;
        out.diagnostic = "baseline answer was empty";
        return out;
    }
    out.final_insights = std::move(bullets);
    out.terminal = Terminal::published;
    return out;
}

TipSheet PipelineRun::step4_compile(const std::vector<Question>& questions,
                                    const std::vector<QuestionOutcome>& outcomes) {
    state_.step_cursor = "step4_compile";
    TipSheet sheet;
    sheet.setup = state_.setup;
    sheet.dataset_id = state_.bundle.dataset_id();
    sheet.run_id = state_.run_id;
    sheet.created_at = options_.created_at.value_or(iso8601_utc(std::chrono::system_clock::now()));

    struct Candidate {
        int question_id;
        int index;
        std::string text;
        std::int64_t source_entry;
    };
    std::vector<Candidate> candidates;
    std::string numbered;
    for (const auto& o : outcomes) {
        if (o.terminal != Terminal::published || !o.final_insights) continue;
        auto q = std::find_if(questions.begin(), questions.end(), [&](const Question& x) { return x.id == o.question_id; });
        numbered += "Question " + std::to_string(o.question_id) + ": " + (q != questions.end() ? q->text : "") + "\n";
        int i = 1;
        for (const auto& item : o.final_insights->items) {
            numbered += "[" + std::to_string(o.question_id) + "." + std::to_string(i) + "] " + item + "\n";
            candidates.push_back({o.question_id, i++, item, o.final_entry});
        }
        numbered += "\n";
    }
    if (candidates.empty()) {
        sheet.note = std::string(kNoPublishableFindings);
        return sheet;
    }

    const int n = std::min<int>(state_.config.num_tips, static_cast<int>(candidates.size()));
    static const std::regex ref(R"(\[\s*[Qq]?(\d+)(?:\.(\d+))?\s*\])");

    auto extract = [&](const std::string& reply, std::int64_t entry) {
        std::vector<std::pair<Tip, std::pair<int, int>>> tips;
        BulletList bullets;
        try {
            bullets = parsers::parse_bullets(reply);
        } catch (const ReplyFormatError&) {
            return tips;
        }
        for (const auto& item : bullets.items) {
            std::smatch m, last;
            std::string::const_iterator from = item.begin();
            bool found = false;
            while (std::regex_search(from, item.end(), m, ref)) {
                last = m;
                found = true;
                from = m.suffix().first;
            }
            if (!found) continue;
            const int qid = std::stoi(last[1].str());
            const int idx = last[2].matched ? std::stoi(last[2].str()) : 0;
            auto cand = std::find_if(candidates.begin(), candidates.end(),
                                     [&](const Candidate& c) { return c.question_id == qid; });
            if (cand == candidates.end()) continue;
            std::string text = std::string(item.cbegin(), last[0].first) + std::string(last[0].second, item.cend());
            text = retrieval::normalize_whitespace(text);
            if (text.empty()) continue;
            Tip tip{text, qid, state_.run_id, {entry, cand->source_entry}};
            tips.push_back({std::move(tip), {qid, idx}});
        }
        return tips;
    };

    const std::string prompt = prompts_.render("step4_compile", {{"n", std::to_string(n)}, {"all_bullets", numbered}});
    auto turn = runtime_.run_turn(AgentName::reporter, runtime_.new_conversation(AgentName::reporter), prompt,
                                  "step4_compile");
    auto picked = extract(turn.text, turn.response_entry);
    if (static_cast<int>(picked.size()) < n) {
        auto retry = runtime_.run_turn(AgentName::reporter, std::move(turn.conversation), compile_reminder(n),
                                       "step4_compile");
        auto again = extract(retry.text, retry.response_entry);
        if (again.size() > picked.size()) picked = std::move(again);
    }
    if (static_cast<int>(picked.size()) > n) picked.resize(static_cast<std::size_t>(n));

    std::set<std::pair<int, int>> used;
    for (auto& [tip, key] : picked) {
        used.insert(key);
        sheet.tips.push_back(std::move(tip));
    }
    // Top up from unused candidates so the sheet length contract holds.
    for (const auto& c : candidates) {
        if (static_cast<int>(sheet.tips.size()) >= n) break;
        if (used.count({c.question_id, c.index})) continue;
        sheet.tips.push_back(Tip{c.text, c.question_id, state_.run_id, {c.source_entry}});
    }
    return sheet;
}

TipSheet PipelineRun::run() {
    try {
        {
            auto explorer = make_executor();
            runtime_.set_executor(explorer.get());
            step1_generate_questions();
            runtime_.set_executor(nullptr);
        }
        for (const auto& q : state_.questions) {
            auto executor = make_executor();
            runtime_.set_executor(executor.get());
            QuestionOutcome outcome;
            try {
                if (state_.setup == Setup::baseline) {
                    outcome = baseline_answer(q);
                } else {
                    AnalyticalPlan plan = step2_plan(q);
                    outcome = step3_execute_question(q, plan);
                }
            } catch (const BackendError&) {
                throw;
            } catch (const PipelineError&) {
                throw;
            } catch (const Error& e) {
                outcome = QuestionOutcome{};
                outcome.question_id = q.id;
                outcome.terminal = Terminal::exhausted;
                outcome.diagnostic = e.what();
            }
            runtime_.set_executor(nullptr);
            state_.outcomes.push_back(std::move(outcome));
        }
        state_.tip_sheet = step4_compile(state_.questions, state_.outcomes);
        state_.step_cursor = "done";
    } catch (const BackendError& e) {
        runtime_.set_executor(nullptr);
        if (options_.persist) persist_end();
        throw PipelineError("run " + state_.run_id + " aborted at " + state_.step_cursor + ": " + e.what());
    } catch (const PipelineError&) {
        runtime_.set_executor(nullptr);
        if (options_.persist) persist_end();
        throw;
    } catch (const Error& e) {
        runtime_.set_executor(nullptr);
        if (options_.persist) persist_end();
        throw PipelineError("run " + state_.run_id + " aborted at " + state_.step_cursor + ": " + e.what());
    }
    if (options_.persist) persist_end();
    return *state_.tip_sheet;
}

void PipelineRun::persist_start() {
    json cfg{{"run_id", state_.run_id},
             {"setup", std::string(to_string(state_.setup))},
             {"dataset_id", state_.bundle.dataset_id()},
             {"csv_path", state_.bundle.csv_path.string()},
             {"description_sha256", sha256_hex(state_.bundle.description)},
             {"repeat_index", repeat_index_},
             {"run_seed", state_.run_seed},
             {"config", state_.config},
             {"model", {{"model_name", options_.model.model_name}, {"temperature", options_.model.temperature}}},
             {"config_hash", config_hash(state_.config, state_.setup, options_.model)}};
    write_text_file(run_dir_ / "config.json", cfg.dump(2) + "\n");
}

void PipelineRun::persist_end() {
    write_text_file(run_dir_ / "questions.json", json(state_.questions).dump(2) + "\n");
    write_text_file(run_dir_ / "outcomes.json", json(state_.outcomes).dump(2) + "\n");
    if (state_.tip_sheet) {
        write_text_file(run_dir_ / "tipsheet.json", json(*state_.tip_sheet).dump(2) + "\n");
        write_text_file(run_dir_ / "tipsheet.md", render_tipsheet_markdown(*state_.tip_sheet));
    }
}

// ---- entry points ----

namespace {

RunResult finish(PipelineRun& run) {
    TipSheet sheet = run.run();
    RunResult r;
    r.tip_sheet = std::move(sheet);
    r.state = run.state();
    r.transcript = Transcript::from_entries(run.transcript().run_id(), run.transcript().entries());
    r.run_dir = run.run_dir();
    return r;
}

}  // namespace

RunResult run_pipeline(const DatasetBundle& bundle, const PipelineConfig& config, llm::Backend& backend,
                       const prompts::PromptLibrary& prompts, const retrieval::GuidelineIndex* index,
                       const EngineOptions& options, int repeat_index) {
    PipelineRun run(bundle, config, Setup::agents, backend, prompts, index, options, repeat_index);
    return finish(run);
}

RunResult run_baseline(const DatasetBundle& bundle, const PipelineConfig& config, llm::Backend& backend,
                       const prompts::PromptLibrary& prompts, const EngineOptions& options, int repeat_index) {
    PipelineRun run(bundle, config, Setup::baseline, backend, prompts, nullptr, options, repeat_index);
    return finish(run);
}

std::string render_tipsheet_markdown(const TipSheet& sheet) {
    std::string md = "# Tip sheet: " + sheet.dataset_id + "\n\n";
    md += "- run: " + sheet.run_id + "\n- created: " + sheet.created_at + "\n\n";
    if (sheet.tips.empty()) {
        md += "_" + sheet.note.value_or(std::string(kNoPublishableFindings)) + "_\n";
        return md;
    }
    for (std::size_t i = 0; i < sheet.tips.size(); ++i)
        md += std::to_string(i + 1) + ". " + sheet.tips[i].text + " (question " +
              std::to_string(sheet.tips[i].question_id) + ")\n";
    return md;
}

StoredRun load_run(const std::filesystem::path& run_dir) {
    if (!std::filesystem::is_directory(run_dir)) throw Error("run directory not found: " + run_dir.string());
    StoredRun r;
    r.dir = run_dir;
    r.config = json::parse(read_text_file(run_dir / "config.json"));
    if (std::filesystem::exists(run_dir / "tipsheet.json"))
        r.tip_sheet = json::parse(read_text_file(run_dir / "tipsheet.json")).get<TipSheet>();
    if (std::filesystem::exists(run_dir / "questions.json"))
        r.questions = json::parse(read_text_file(run_dir / "questions.json")).get<std::vector<Question>>();
    if (std::filesystem::exists(run_dir / "outcomes.json"))
        r.outcomes = json::parse(read_text_file(run_dir / "outcomes.json")).get<std::vector<QuestionOutcome>>();
    std::vector<TranscriptEntry> entries;
    std::ifstream in(run_dir / "transcript.jsonl");
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) entries.push_back(json::parse(line).get<TranscriptEntry>());
    r.transcript = Transcript::from_entries(r.config.value("run_id", std::string{}), std::move(entries));
    return r;
}

}  // namespace tipline::pipeline
