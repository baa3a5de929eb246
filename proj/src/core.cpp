#include "tipline/core.hpp"

#include <algorithm>
#include <array>
#include <ctime>
#include <iomanip>
#include <sstream>

#include <openssl/sha.h>

#include "tipline/csv.hpp"
#include "tipline/error.hpp"

namespace tipline {

namespace {

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

template <typename Enum, std::size_t N>
Enum enum_from(std::string_view s, const std::array<std::string_view, N>& names, const char* what) {
    for (std::size_t i = 0; i < N; ++i)
        if (names[i] == s) return static_cast<Enum>(i);
    throw Error(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

constexpr std::array<std::string_view, 2> kSetupNames{"agents", "baseline"};
constexpr std::array<std::string_view, 4> kAgentNames{"analyst", "reporter", "editor", "baseline"};
constexpr std::array<std::string_view, 4> kDirectionNames{"prompt", "response", "tool_call", "tool_result"};

}  // namespace

std::string_view to_string(Setup s) { return kSetupNames[static_cast<std::size_t>(s)]; }
std::string_view to_string(AgentName a) { return kAgentNames[static_cast<std::size_t>(a)]; }
std::string_view to_string(Direction d) { return kDirectionNames[static_cast<std::size_t>(d)]; }
Setup setup_from_string(std::string_view s) { return enum_from<Setup>(s, kSetupNames, "setup"); }
AgentName agent_from_string(std::string_view s) { return enum_from<AgentName>(s, kAgentNames, "agent"); }
Direction direction_from_string(std::string_view s) {
    return enum_from<Direction>(s, kDirectionNames, "direction");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

DatasetBundle load_bundle(const std::filesystem::path& csv_path,
                          const std::filesystem::path& description_path) {
    if (!std::filesystem::is_regular_file(csv_path))
        throw DatasetError("dataset file not found: " + csv_path.string());
    if (!std::filesystem::is_regular_file(description_path))
        throw DatasetError("description file not found: " + description_path.string());

    const std::string csv_text = read_text_file(csv_path);
    if (is_blank(csv_text)) throw MalformedCsvError("dataset is empty: " + csv_path.string());

    const auto rows = csv::parse(csv_text);
    if (rows.empty()) throw MalformedCsvError("dataset has no header: " + csv_path.string());
    const auto& header = rows.front();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (is_blank(header[i]))
            throw MalformedCsvError("column " + std::to_string(i + 1) + " has no name");
    if (rows.size() < 2) throw MalformedCsvError("dataset has a header but no rows");
    for (std::size_t r = 1; r < rows.size(); ++r)
        if (rows[r].size() != header.size())
            throw MalformedCsvError("row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                                    " fields, expected " + std::to_string(header.size()));

    std::string description = read_text_file(description_path);
    if (is_blank(description))
        throw MissingDescriptionError("description is empty: " + description_path.string());

    DatasetBundle bundle;
    bundle.csv_path = csv_path;
    bundle.description = std::move(description);
    bundle.columns = header;
    bundle.row_count = rows.size() - 1;
    return bundle;
}

void PipelineConfig::validate() const {
    if (num_questions < 1) throw ConfigError("num_questions must be >= 1");
    if (num_tips < 1) throw ConfigError("num_tips must be >= 1");
    if (max_interactions < 1) throw ConfigError("max_interactions must be >= 1");
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    if (sandbox_timeout_s < 1) throw ConfigError("sandbox_timeout must be >= 1");
    if (output_truncation < 1) throw ConfigError("output_truncation must be >= 1");
}

PipelineConfig default_config() { return PipelineConfig{}; }

// ---- Transcript ----

std::int64_t wall_clock_us() {
    using namespace std::chrono;
    return duration_cast<microseconds>(system_clock::now().time_since_epoch()).count();
}

std::string iso8601_utc(std::chrono::system_clock::time_point tp) {
    std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

Transcript::Transcript(std::string run_id, Clock clock)
    : run_id_(std::move(run_id)), clock_(clock ? std::move(clock) : Clock(wall_clock_us)) {}

std::int64_t Transcript::append(AgentName agent, std::string step_tag, Direction direction, std::string body,
                                std::optional<int> question_id) {
    TranscriptEntry e;
    e.id = next_id_++;
    e.agent = agent;
    e.step_tag = std::move(step_tag);
    e.direction = direction;
    e.body = std::move(body);
    e.question_id = question_id;
    e.timestamp_us = clock_();
    if (!entries_.empty() && e.timestamp_us <= entries_.back().timestamp_us)
        e.timestamp_us = entries_.back().timestamp_us + 1;
    if (sink_.is_open()) {
        sink_ << json(e).dump() << '\n';
        sink_.flush();
    }
    entries_.push_back(std::move(e));
    return entries_.back().id;
}

const TranscriptEntry* Transcript::find(std::int64_t id) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                               [](const TranscriptEntry& e, std::int64_t v) { return e.id < v; });
    return (it != entries_.end() && it->id == id) ? &*it : nullptr;
}

void Transcript::attach_sink(const std::filesystem::path& path) {
    sink_.open(path, std::ios::binary | std::ios::trunc);
    if (!sink_) throw Error("cannot open transcript sink " + path.string());
    for (const auto& e : entries_) sink_ << json(e).dump() << '\n';
    sink_.flush();
}

Transcript Transcript::from_entries(std::string run_id, std::vector<TranscriptEntry> entries) {
    Transcript t(std::move(run_id));
    t.entries_ = std::move(entries);
    t.next_id_ = t.entries_.empty() ? 1 : t.entries_.back().id + 1;
    return t;
}

// ---- JSON ----

void to_json(json& j, const PipelineConfig& c) {
    j = json{{"num_questions", c.num_questions},
             {"num_tips", c.num_tips},
             {"max_interactions", c.max_interactions},
             {"use_editor", c.use_editor},
             {"use_reporter", c.use_reporter},
             {"repeats", c.repeats},
             {"seed", c.seed},
             {"sandbox_timeout", c.sandbox_timeout_s},
             {"output_truncation", c.output_truncation}};
}

void from_json(const json& j, PipelineConfig& c) {
    PipelineConfig d;
    c.num_questions = j.value("num_questions", d.num_questions);
    c.num_tips = j.value("num_tips", d.num_tips);
    c.max_interactions = j.value("max_interactions", d.max_interactions);
    c.use_editor = j.value("use_editor", d.use_editor);
    c.use_reporter = j.value("use_reporter", d.use_reporter);
    c.repeats = j.value("repeats", d.repeats);
    c.seed = j.value("seed", d.seed);
    c.sandbox_timeout_s = j.value("sandbox_timeout", d.sandbox_timeout_s);
    c.output_truncation = j.value("output_truncation", d.output_truncation);
}

void to_json(json& j, const Question& q) { j = json{{"id", q.id}, {"text", q.text}}; }
void from_json(const json& j, Question& q) {
    j.at("id").get_to(q.id);
    j.at("text").get_to(q.text);
}

void to_json(json& j, const AnalyticalPlan& p) {
    j = json{{"question_id", p.question_id}, {"draft", p.draft}, {"final", p.final_text}};
    j["editor_feedback"] = p.editor_feedback ? json(*p.editor_feedback) : json(nullptr);
}
void from_json(const json& j, AnalyticalPlan& p) {
    j.at("question_id").get_to(p.question_id);
    j.at("draft").get_to(p.draft);
    j.at("final").get_to(p.final_text);
    if (j.contains("editor_feedback") && !j["editor_feedback"].is_null())
        p.editor_feedback = j["editor_feedback"].get<std::string>();
    else
        p.editor_feedback.reset();
}

void to_json(json& j, const BulletList& b) { j = json{{"items", b.items}}; }
void from_json(const json& j, BulletList& b) { j.at("items").get_to(b.items); }

void to_json(json& j, const FeedbackVerdict& v) {
    j = json{{"option", static_cast<int>(v.option)}, {"feedback", v.feedback}};
}
void from_json(const json& j, FeedbackVerdict& v) {
    int o = j.at("option").get<int>();
    if (o < 1 || o > 3) throw Error("verdict option out of range: " + std::to_string(o));
    v.option = static_cast<VerdictOption>(o);
    v.feedback = j.value("feedback", std::string{});
}

void to_json(json& j, const Tip& t) {
    j = json{{"text", t.text}, {"question_id", t.question_id}, {"run_id", t.run_id}, {"provenance", t.provenance}};
}
void from_json(const json& j, Tip& t) {
    j.at("text").get_to(t.text);
    j.at("question_id").get_to(t.question_id);
    j.at("run_id").get_to(t.run_id);
    j.at("provenance").get_to(t.provenance);
}

void to_json(json& j, const TipSheet& s) {
    j = json{{"run_id", s.run_id},
             {"setup", std::string(to_string(s.setup))},
             {"dataset_id", s.dataset_id},
             {"created_at", s.created_at},
             {"tips", s.tips}};
    if (s.note) j["note"] = *s.note;
}
void from_json(const json& j, TipSheet& s) {
    j.at("run_id").get_to(s.run_id);
    s.setup = setup_from_string(j.at("setup").get<std::string>());
    j.at("dataset_id").get_to(s.dataset_id);
    j.at("created_at").get_to(s.created_at);
    j.at("tips").get_to(s.tips);
    if (j.contains("note"))
        s.note = j["note"].get<std::string>();
    else
        s.note.reset();
}

void to_json(json& j, const TranscriptEntry& e) {
    j = json{{"id", e.id},
             {"agent", std::string(to_string(e.agent))},
             {"step_tag", e.step_tag},
             {"direction", std::string(to_string(e.direction))},
             {"body", e.body},
             {"timestamp", e.timestamp_us}};
    j["question_id"] = e.question_id ? json(*e.question_id) : json(nullptr);
}
void from_json(const json& j, TranscriptEntry& e) {
    j.at("id").get_to(e.id);
    e.agent = agent_from_string(j.at("agent").get<std::string>());
    j.at("step_tag").get_to(e.step_tag);
    e.direction = direction_from_string(j.at("direction").get<std::string>());
    j.at("body").get_to(e.body);
    j.at("timestamp").get_to(e.timestamp_us);
    if (j.contains("question_id") && !j["question_id"].is_null())
        e.question_id = j["question_id"].get<int>();
    else
        e.question_id.reset();
}

void to_json(json& j, const DatasetBundle& b) {
    j = json{{"csv_path", b.csv_path.string()},
             {"description", b.description},
             {"columns", b.columns},
             {"row_count", b.row_count}};
}
void from_json(const json& j, DatasetBundle& b) {
    b.csv_path = j.at("csv_path").get<std::string>();
    j.at("description").get_to(b.description);
    j.at("columns").get_to(b.columns);
    j.at("row_count").get_to(b.row_count);
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * SHA256_DIGEST_LENGTH);
    for (unsigned char b : digest) {
        out += kHex[b >> 4];
        out += kHex[b & 0xF];
    }
    return out;
}

}  // namespace tipline
