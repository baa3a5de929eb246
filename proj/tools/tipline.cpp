#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tipline/core.hpp"
#include "tipline/error.hpp"
#include "tipline/evaluation.hpp"
#include "tipline/llm.hpp"
#include "tipline/pipeline.hpp"
#include "tipline/prompts.hpp"
#include "tipline/retrieval.hpp"

namespace fs = std::filesystem;
using namespace tipline;

namespace {

constexpr int kOk = 0;
constexpr int kRunError = 1;
constexpr int kUsage = 2;

// Bad invocation or missing input; maps to exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_file(const fs::path& p, const std::string& what) {
    if (!fs::is_regular_file(p)) throw UsageError(what + " not found: " + p.string());
}

void require_dir(const fs::path& p, const std::string& what) {
    if (!fs::is_directory(p)) throw UsageError(what + " not found: " + p.string());
}

fs::path data_dir() { return TIPLINE_DATA_DIR; }

fs::path default_runner() {
    if (const char* env = std::getenv("TIPLINE_RUNNER"); env && *env) return env;
    return data_dir() / "tests" / "support" / "protocol_peer.py";
}

std::uint64_t random_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

// ---- run ----

struct RunFlags {
    std::string csv;
    std::string description;
    int questions = 10;
    int tips = 10;
    int max_interactions = 3;
    bool no_editor = false;
    bool no_reporter = false;
    int repeats = 1;
    std::optional<std::uint64_t> seed;
    std::string mock;
    bool record = false;
    std::string replay;
    bool baseline = false;
    std::string model = llm::ModelParams{}.model_name;
    double temperature = 1.0;
    std::string runs_dir = "runs";
    std::string prompts_dir = (data_dir() / "prompts").string();
    std::string knowledge_dir = (data_dir() / "knowledge").string();
    std::string python = "python3";
    std::string runner;
    int sandbox_timeout = 60;
    std::size_t output_truncation = 8000;
    bool overwrite = false;
    int max_retries = 3;
};

int cmd_run(const RunFlags& f) {
    require_file(f.csv, "dataset CSV");
    require_file(f.description, "description file");
    if (!f.mock.empty()) require_file(f.mock, "mock script");
    if (!f.replay.empty()) require_file(f.replay, "cassette");
    if (!f.mock.empty() && !f.replay.empty()) throw UsageError("--mock and --replay are mutually exclusive");
    if (!f.replay.empty() && f.repeats != 1) throw UsageError("--replay reproduces a single run; drop --repeats");
    require_dir(f.prompts_dir, "prompt directory");

    const DatasetBundle bundle = load_bundle(f.csv, f.description);
    const auto prompts = prompts::PromptLibrary::load(f.prompts_dir);
    std::optional<retrieval::GuidelineIndex> index;
    if (!f.baseline) {
        require_dir(f.knowledge_dir, "knowledge directory");
        index = retrieval::GuidelineIndex::ingest(retrieval::load_corpus(f.knowledge_dir));
    }

    PipelineConfig cfg = default_config();
    cfg.num_questions = f.questions;
    cfg.num_tips = f.tips;
    cfg.max_interactions = f.max_interactions;
    cfg.use_editor = !f.no_editor;
    cfg.use_reporter = !f.no_reporter;
    cfg.repeats = f.repeats;
    cfg.seed = f.seed.value_or(random_seed());
    cfg.sandbox_timeout_s = f.sandbox_timeout;
    cfg.output_truncation = f.output_truncation;
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }

    pipeline::EngineOptions opts;
    opts.runs_dir = f.runs_dir;
    opts.record = f.record;
    opts.overwrite = f.overwrite;
    opts.model.model_name = f.model;
    opts.model.temperature = f.temperature;
    opts.sandbox.interpreter = f.python;
    opts.sandbox.runner_script = f.runner.empty() ? default_runner() : fs::path(f.runner);

    std::optional<llm::MockScript> script;
    if (!f.mock.empty()) script = llm::MockScript::load(f.mock);
    std::shared_ptr<llm::Backend> live;
    std::unique_ptr<llm::ReplayBackend> replay;
    if (!f.replay.empty()) {
        replay = std::make_unique<llm::ReplayBackend>(f.replay);
        opts.run_id = replay->header().run_id;
        opts.run_seed = replay->header().seed;
        opts.created_at = replay->header().created_at;
    } else if (!script) {
        llm::HttpOptions http;
        try {
            http = llm::HttpOptions::from_env();
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
        llm::RetryPolicy policy;
        policy.max_attempts = f.max_retries;
        live = std::make_shared<llm::RetryingBackend>(std::make_shared<llm::HttpBackend>(http), policy);
    }

    int failures = 0;
    for (int r = 0; r < cfg.repeats; ++r) {
        // Every repeat replays the mock script from its first rule.
        std::unique_ptr<llm::MockBackend> mock;
        llm::Backend* backend = live.get();
        if (script) {
            mock = std::make_unique<llm::MockBackend>(*script);
            backend = mock.get();
        } else if (replay) {
            backend = replay.get();
        }
        try {
            auto result = f.baseline ? pipeline::run_baseline(bundle, cfg, *backend, prompts, opts, r)
                                     : pipeline::run_pipeline(bundle, cfg, *backend, prompts, &*index, opts, r);
            std::cout << (result.run_dir / "tipsheet.md").string() << "\n";
        } catch (const PipelineError& e) {
            std::cerr << "run " << r + 1 << "/" << cfg.repeats << " failed: " << e.what() << "\n";
            ++failures;
        }
    }
    return failures ? kRunError : kOk;
}

// ---- evaluate ----

std::vector<fs::path> collect_run_dirs(const std::vector<std::string>& args) {
    std::vector<fs::path> dirs;
    for (const auto& a : args) {
        fs::path p(a);
        require_dir(p, "run directory");
        if (fs::exists(p / "config.json")) {
            dirs.push_back(p);
            continue;
        }
        std::vector<fs::path> children;
        for (const auto& e : fs::directory_iterator(p))
            if (e.is_directory() && fs::exists(e.path() / "tipsheet.json")) children.push_back(e.path());
        if (children.empty()) throw UsageError("no runs found under " + p.string());
        std::sort(children.begin(), children.end());
        dirs.insert(dirs.end(), children.begin(), children.end());
    }
    return dirs;
}

int cmd_blind(const std::vector<std::string>& runs, std::uint64_t seed, const std::string& out,
              const std::string& key_path) {
    std::vector<TipSheet> sheets;
    for (const auto& dir : collect_run_dirs(runs)) {
        if (!fs::exists(dir / "tipsheet.json")) throw UsageError("run has no tip sheet: " + dir.string());
        sheets.push_back(json::parse(read_text_file(dir / "tipsheet.json")).get<TipSheet>());
    }
    auto [sheet, key] = evaluation::make_coding_sheet(sheets, seed);
    write_text_file(out, evaluation::render_sheet_csv(sheet));
    evaluation::write_sealed_key(key_path, key);
    std::cout << "coding sheet: " << out << " (" << sheet.rows.size() << " tips from " << sheets.size()
              << " runs)\nsealed key: " << key_path << "\n";
    return kOk;
}

evaluation::ExpectedRow parse_expect(const std::string& s) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--expect wants setup=validity,newsworthiness,precision: " + s);
    evaluation::ExpectedRow row{};
    std::string setup = s.substr(0, eq);
    if (setup == "GA" || setup == "ga") setup = "agents";
    if (setup == "BL" || setup == "bl") setup = "baseline";
    try {
        row.setup = setup_from_string(setup);
    } catch (const Error&) {
        throw UsageError("unknown setup in --expect: " + setup);
    }
    std::vector<double> v;
    std::stringstream ss(s.substr(eq + 1));
    for (std::string part; std::getline(ss, part, ',');) {
        try {
            v.push_back(std::stod(part));
        } catch (const std::exception&) {
            throw UsageError("bad number in --expect: " + part);
        }
    }
    if (v.size() != 3) throw UsageError("--expect wants three rates: " + s);
    row.validity = v[0];
    row.newsworthiness = v[1];
    row.precision = v[2];
    return row;
}

int cmd_aggregate(const std::string& codings_path, const std::string& key_path, const std::string& denominator,
                  const std::vector<std::string>& expects, const std::string& json_out) {
    require_file(codings_path, "codings file");
    require_file(key_path, "key file");
    std::vector<evaluation::ExpectedRow> expected;
    for (const auto& e : expects) expected.push_back(parse_expect(e));

    const auto key = evaluation::read_sealed_key(key_path);
    const auto rows = evaluation::parse_codings_csv(read_text_file(codings_path));
    const auto report = evaluation::validate_codings(key.blind_ids(), rows);
    if (!report.ok()) {
        for (const auto& v : report.violations) std::cerr << "invalid: " << v << "\n";
        if (!report.missing.empty()) {
            std::cerr << report.missing.size() << " tips are not fully coded:\n";
            for (const auto& id : report.missing) std::cerr << "  " << id << "\n";
        }
        return kRunError;
    }

    const auto mode = denominator == "unmatched" ? evaluation::NewsworthyDenominator::unmatched
                                                 : evaluation::NewsworthyDenominator::all;
    const auto table = evaluation::aggregate(evaluation::to_tip_codings(rows), key, mode);
    std::cout << table.render_markdown();
    if (!json_out.empty()) write_text_file(json_out, table.to_json().dump(2) + "\n");

    int mismatches = 0;
    for (const auto& e : expected)
        for (const auto& flag : evaluation::compare_overall(table, e)) {
            std::cerr << "mismatch: " << flag << "\n";
            ++mismatches;
        }
    return mismatches ? kRunError : kOk;
}

int cmd_lookup(const std::string& key_path, const std::string& blind_id) {
    require_file(key_path, "key file");
    const auto key = evaluation::read_sealed_key(key_path);
    auto it = key.entries.find(blind_id);
    if (it == key.entries.end()) throw UsageError("blind id not in key: " + blind_id);
    const auto& e = it->second;
    std::cout << "blind_id: " << blind_id << "\nrun_id:   " << e.run_id << "\nsetup:    " << to_string(e.setup)
              << "\nproject:  " << e.project << "\ntip:      " << e.tip_index << "\ntext:     " << e.tip_text << "\n";
    return kOk;
}

// ---- inspect ----

fs::path resolve_run(const std::string& run, const std::string& runs_dir) {
    if (fs::is_directory(run) && fs::exists(fs::path(run) / "config.json")) return run;
    fs::path p = fs::path(runs_dir) / run;
    if (fs::is_directory(p) && fs::exists(p / "config.json")) return p;
    throw UsageError("unknown run: " + run);
}

std::string question_text(const pipeline::StoredRun& r, int id) {
    for (const auto& q : r.questions)
        if (q.id == id) return q.text;
    return "";
}

void print_outcome(const pipeline::StoredRun& r, const pipeline::QuestionOutcome& o) {
    std::cout << "Question " << o.question_id << ": " << question_text(r, o.question_id) << "\n";
    std::cout << "  terminal:   " << to_string(o.terminal) << "\n";
    std::cout << "  executions: " << o.analysis_executions << "\n";
    std::cout << "  verdicts:   ";
    if (o.verdicts.empty()) std::cout << "(none)";
    for (std::size_t i = 0; i < o.verdicts.size(); ++i)
        std::cout << (i ? " -> " : "") << static_cast<int>(o.verdicts[i].option);
    std::cout << "\n";
    if (o.diagnostic) std::cout << "  diagnostic: " << *o.diagnostic << "\n";

    std::cout << "  steps:\n";
    std::string last;
    for (const auto& e : r.transcript.entries()) {
        if (e.question_id != o.question_id || e.direction != Direction::prompt) continue;
        const std::string line = std::string(to_string(e.agent)) + " " + e.step_tag;
        if (line == last) continue;
        std::cout << "    " << line << "\n";
        last = line;
    }
    if (o.final_insights) {
        std::cout << "  insights:\n";
        for (const auto& item : o.final_insights->items) std::cout << "    - " << item << "\n";
    }
}

int cmd_inspect(const std::string& run, const std::string& runs_dir, std::optional<int> question,
                std::optional<int> tip) {
    const auto stored = pipeline::load_run(resolve_run(run, runs_dir));
    std::cout << "run " << stored.config.value("run_id", "") << " (" << stored.config.value("setup", "") << ", "
              << stored.config.value("dataset_id", "") << ")\n\n";

    if (tip) {
        const auto& tips = stored.tip_sheet.tips;
        if (*tip < 1 || *tip > static_cast<int>(tips.size()))
            throw UsageError("tip " + std::to_string(*tip) + " out of range (sheet has " +
                             std::to_string(tips.size()) + ")");
        const Tip& t = tips[static_cast<std::size_t>(*tip - 1)];
        std::cout << "Tip " << *tip << ": " << t.text << "\n";
        std::cout << "Question " << t.question_id << ": " << question_text(stored, t.question_id) << "\n";
        std::cout << "Analyst code:\n";
        int blocks = 0;
        for (const auto& e : stored.transcript.entries()) {
            if (e.question_id != t.question_id || e.direction != Direction::tool_call) continue;
            if (e.agent != AgentName::analyst && e.agent != AgentName::baseline) continue;
            const json body = json::parse(e.body, nullptr, false);
            if (body.is_discarded() || body.value("tool", "") != "code_execution") continue;
            std::cout << "--- [" << e.step_tag << "]\n"
                      << body["arguments"].value("code", "") << "\n";
            ++blocks;
        }
        if (!blocks) std::cout << "(no code executed)\n";
        std::cout << "Provenance entries:";
        for (auto id : t.provenance) std::cout << " " << id;
        std::cout << "\n";
        return kOk;
    }

    bool shown = false;
    for (const auto& o : stored.outcomes) {
        if (question && o.question_id != *question) continue;
        print_outcome(stored, o);
        std::cout << "\n";
        shown = true;
    }
    if (question && !shown) throw UsageError("run has no question " + std::to_string(*question));
    if (!question) {
        std::cout << stored.tip_sheet.tips.size() << " tips";
        if (stored.tip_sheet.note) std::cout << " (" << *stored.tip_sheet.note << ")";
        std::cout << "\n";
    }
    return kOk;
}

// ---- prompts / knowledge ----

int cmd_prompts_list(const std::string& dir, bool show) {
    require_dir(dir, "prompt directory");
    const auto lib = prompts::PromptLibrary::load(dir);
    for (const auto& id : lib.ids()) {
        std::cout << id;
        const auto ph = prompts::placeholders(lib.body(id));
        if (!ph.empty()) {
            std::cout << "  {";
            for (std::size_t i = 0; i < ph.size(); ++i) std::cout << (i ? ", " : "") << ph[i];
            std::cout << "}";
        }
        std::cout << "\n";
        if (show) std::cout << lib.body(id) << "\n";
    }
    return kOk;
}

int cmd_knowledge_ingest(const std::string& dir, const std::string& query, int k) {
    require_dir(dir, "knowledge directory");
    const auto index = retrieval::GuidelineIndex::ingest(retrieval::load_corpus(dir));
    std::cout << index.docs().size() << " documents, " << index.chunks().size() << " chunks\n";
    for (const auto& d : index.docs()) {
        int n = 0;
        for (const auto& c : index.chunks()) n += c.doc_id == d.doc_id;
        std::cout << "  " << d.doc_id << "  " << n << " chunks  " << d.title << "\n";
    }
    if (!query.empty()) {
        std::cout << "\n";
        const auto hits = index.query(query, k);
        if (hits.empty()) std::cout << "no matching chunks\n";
        for (const auto& h : hits)
            std::cout << h.chunk->doc_id << "#" << h.chunk->chunk_index << "  " << h.score << "\n";
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tipline: turn a dataset and its description into a tip sheet of candidate stories"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    RunFlags rf;
    std::uint64_t seed_value = 0;
    auto* run = app.add_subcommand("run", "Run the agent pipeline (or the baseline) and write a run directory");
    run->add_option("--csv", rf.csv, "Dataset CSV")->required();
    run->add_option("--description", rf.description, "Dataset description (text or markdown)")->required();
    run->add_option("--questions", rf.questions, "Questions to generate in step 1")->capture_default_str();
    run->add_option("--tips", rf.tips, "Tips to compile in step 4")->capture_default_str();
    run->add_option("--max-interactions", rf.max_interactions, "Reporter verdicts allowed per question")
        ->capture_default_str();
    run->add_flag("--no-editor", rf.no_editor, "Skip the editor's plan review and final check");
    run->add_flag("--no-reporter", rf.no_reporter, "Skip the reporter's verdict loop");
    run->add_option("--repeats", rf.repeats, "Independent runs with consecutive seeds")->capture_default_str();
    auto* seed_opt = run->add_option("--seed", seed_value, "Base seed (random when omitted)");
    run->add_option("--mock", rf.mock, "Serve model replies from a mock script (JSON)");
    run->add_flag("--record", rf.record, "Write llm_cassette.jsonl into each run directory");
    run->add_option("--replay", rf.replay, "Serve model replies from a recorded cassette");
    run->add_flag("--baseline", rf.baseline, "Single-agent baseline instead of the agent pipeline");
    run->add_option("--model", rf.model, "Model name")->capture_default_str();
    run->add_option("--temperature", rf.temperature, "Sampling temperature")->capture_default_str();
    run->add_option("--runs-dir", rf.runs_dir, "Where run directories are created")->capture_default_str();
    run->add_option("--prompts", rf.prompts_dir, "Prompt template directory")->capture_default_str();
    run->add_option("--knowledge", rf.knowledge_dir, "Guideline documents for the editor")->capture_default_str();
    run->add_option("--python", rf.python, "Interpreter for the code sandbox")->capture_default_str();
    run->add_option("--runner", rf.runner, "Sandbox runner script (default: $TIPLINE_RUNNER)");
    run->add_option("--sandbox-timeout", rf.sandbox_timeout, "Seconds per code execution")->capture_default_str();
    run->add_option("--output-truncation", rf.output_truncation, "Max characters of tool output shown to a model")
        ->capture_default_str();
    run->add_flag("--overwrite", rf.overwrite, "Replace an existing run directory");
    run->add_option("--max-retries", rf.max_retries, "Attempts per live model call")->capture_default_str();

    auto* eval = app.add_subcommand("evaluate", "Blind coding sheets and metrics");
    eval->require_subcommand(1);

    std::vector<std::string> blind_runs;
    std::uint64_t blind_seed = 0;
    std::string sheet_out = "coding_sheet.csv";
    std::string key_out = "coding_key.json";
    auto* blind = eval->add_subcommand("blind", "Pool tips from runs into a shuffled coding sheet and a sealed key");
    blind->add_option("--runs", blind_runs, "Run directories, or directories holding runs")->required();
    blind->add_option("--seed", blind_seed, "Shuffle seed")->required();
    blind->add_option("--out", sheet_out, "Coding sheet CSV")->capture_default_str();
    blind->add_option("--key", key_out, "Sealed key JSON")->capture_default_str();

    std::string codings, agg_key, denominator = "all", json_out;
    std::vector<std::string> expects;
    auto* agg = eval->add_subcommand("aggregate", "Unblind coded tips and print validity, newsworthiness, precision");
    agg->add_option("--codings", codings, "Coded sheet CSV")->required();
    agg->add_option("--key", agg_key, "Sealed key JSON")->required();
    agg->add_option("--newsworthy-denominator", denominator, "Newsworthiness over all tips or unmatched tips")
        ->check(CLI::IsMember({"all", "unmatched"}))
        ->capture_default_str();
    agg->add_option("--expect", expects, "Check an overall row, e.g. agents=0.89,0.67,0.34 (exit 1 on mismatch)");
    agg->add_option("--json", json_out, "Also write the table as JSON");

    std::string lookup_key, blind_id;
    auto* lookup = eval->add_subcommand("lookup", "Show the source of one blinded tip");
    lookup->add_option("--key", lookup_key, "Sealed key JSON")->required();
    lookup->add_option("--blind-id", blind_id, "Blind id from the coding sheet")->required();

    std::string inspect_run, inspect_runs_dir = "runs";
    int question_value = 0, tip_value = 0;
    auto* inspect = app.add_subcommand("inspect", "Show each question's path through a run");
    inspect->add_option("--run", inspect_run, "Run id or run directory")->required();
    inspect->add_option("--runs-dir", inspect_runs_dir, "Where run ids are looked up")->capture_default_str();
    auto* question_opt = inspect->add_option("--question", question_value, "Only this question id");
    auto* tip_opt = inspect->add_option("--tip", tip_value, "Show tip n with its question and analyst code");

    auto* prompts_cmd = app.add_subcommand("prompts", "Prompt templates");
    prompts_cmd->require_subcommand(1);
    std::string list_dir = (data_dir() / "prompts").string();
    bool show_bodies = false;
    auto* list = prompts_cmd->add_subcommand("list", "List template ids and their placeholders");
    list->add_option("--dir", list_dir, "Prompt template directory")->capture_default_str();
    list->add_flag("--show", show_bodies, "Print template bodies");

    auto* knowledge = app.add_subcommand("knowledge", "Editor guideline corpus");
    knowledge->require_subcommand(1);
    std::string ingest_dir = (data_dir() / "knowledge").string(), query;
    int top_k = retrieval::kDefaultTopK;
    auto* ingest = knowledge->add_subcommand("ingest", "Index a guideline directory and report its chunks");
    ingest->add_option("--dir", ingest_dir, "Directory of .md/.txt guideline documents")->capture_default_str();
    ingest->add_option("--query", query, "Try a retrieval query against the index");
    ingest->add_option("--k", top_k, "Results for --query")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*run) {
            if (*seed_opt) rf.seed = seed_value;
            return cmd_run(rf);
        }
        if (*blind) return cmd_blind(blind_runs, blind_seed, sheet_out, key_out);
        if (*agg) return cmd_aggregate(codings, agg_key, denominator, expects, json_out);
        if (*lookup) return cmd_lookup(lookup_key, blind_id);
        if (*inspect)
            return cmd_inspect(inspect_run, inspect_runs_dir,
                               *question_opt ? std::optional<int>(question_value) : std::nullopt,
                               *tip_opt ? std::optional<int>(tip_value) : std::nullopt);
        if (*list) return cmd_prompts_list(list_dir, show_bodies);
        if (*ingest) return cmd_knowledge_ingest(ingest_dir, query, top_k);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const DatasetError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRunError;
    }
    return kUsage;
}
