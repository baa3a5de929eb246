#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace tipline {

using json = nlohmann::json;

/// A single CSV table plus the Markdown description and data dictionary
/// handed to the agents. Column names are read once at load time.
struct DatasetBundle {
    std::filesystem::path csv_path;
    std::string description;
    std::vector<std::string> columns;
    std::size_t row_count = 0;

    /// Short identifier used in run ids and tip sheets (the CSV file stem).
    std::string dataset_id() const { return csv_path.stem().string(); }

    bool operator==(const DatasetBundle&) const = default;
};

/// Reads and validates both input files. Throws MalformedCsvError or
/// MissingDescriptionError.
DatasetBundle load_bundle(const std::filesystem::path& csv_path,
                          const std::filesystem::path& description_path);

struct PipelineConfig {
    int num_questions = 10;
    int num_tips = 10;
    int max_interactions = 3;
    bool use_editor = true;
    bool use_reporter = true;
    int repeats = 1;
    std::uint64_t seed = 0;
    int sandbox_timeout_s = 60;
    std::size_t output_truncation = 8000;

    /// Throws ConfigError when a count is not positive.
    void validate() const;

    bool operator==(const PipelineConfig&) const = default;
};

PipelineConfig default_config();

enum class Setup { agents, baseline };

enum class AgentName { analyst, reporter, editor, baseline };

enum class Direction { prompt, response, tool_call, tool_result };

std::string_view to_string(Setup s);
std::string_view to_string(AgentName a);
std::string_view to_string(Direction d);
Setup setup_from_string(std::string_view s);
AgentName agent_from_string(std::string_view s);
Direction direction_from_string(std::string_view s);

struct Question {
    int id = 0;
    std::string text;
    bool operator==(const Question&) const = default;
};

struct AnalyticalPlan {
    int question_id = 0;
    std::string draft;
    std::optional<std::string> editor_feedback;
    std::string final_text;
    bool operator==(const AnalyticalPlan&) const = default;
};

struct BulletList {
    std::vector<std::string> items;
    bool empty() const noexcept { return items.empty(); }
    std::size_t size() const noexcept { return items.size(); }
    bool operator==(const BulletList&) const = default;
};

enum class VerdictOption : int { publishable = 1, needs_more_work = 2, dead_end = 3 };

struct FeedbackVerdict {
    VerdictOption option = VerdictOption::publishable;
    std::string feedback;
    bool operator==(const FeedbackVerdict&) const = default;
};

struct Tip {
    std::string text;
    int question_id = 0;
    std::string run_id;
    std::vector<std::int64_t> provenance;
    bool operator==(const Tip&) const = default;
};

struct TipSheet {
    std::vector<Tip> tips;
    Setup setup = Setup::agents;
    std::string dataset_id;
    std::string run_id;
    std::string created_at;
    // Set when no question produced publishable findings.
    std::optional<std::string> note;
    bool operator==(const TipSheet&) const = default;
};

inline constexpr std::string_view kNoPublishableFindings = "no publishable findings";

struct TranscriptEntry {
    std::int64_t id = 0;
    AgentName agent = AgentName::analyst;
    std::string step_tag;
    Direction direction = Direction::prompt;
    std::string body;
    std::int64_t timestamp_us = 0;
    std::optional<int> question_id;
    bool operator==(const TranscriptEntry&) const = default;
};

/// Append-only audit log of every prompt, response and tool exchange in a
/// run. Timestamps are forced strictly increasing. When a sink is attached,
/// each entry is flushed to it as one JSON line as soon as it is appended.
class Transcript {
public:
    using Clock = std::function<std::int64_t()>;

    explicit Transcript(std::string run_id = {}, Clock clock = {});

    const std::string& run_id() const noexcept { return run_id_; }
    const std::vector<TranscriptEntry>& entries() const noexcept { return entries_; }

    std::int64_t append(AgentName agent, std::string step_tag, Direction direction, std::string body,
                        std::optional<int> question_id = std::nullopt);

    const TranscriptEntry* find(std::int64_t id) const;

    void attach_sink(const std::filesystem::path& path);

    static Transcript from_entries(std::string run_id, std::vector<TranscriptEntry> entries);

private:
    std::string run_id_;
    Clock clock_;
    std::vector<TranscriptEntry> entries_;
    std::int64_t next_id_ = 1;
    std::ofstream sink_;
};

std::int64_t wall_clock_us();
std::string iso8601_utc(std::chrono::system_clock::time_point tp);

// JSON mapping, lower_snake_case keys.
void to_json(json& j, const PipelineConfig& c);
void from_json(const json& j, PipelineConfig& c);
void to_json(json& j, const Question& q);
void from_json(const json& j, Question& q);
void to_json(json& j, const AnalyticalPlan& p);
void from_json(const json& j, AnalyticalPlan& p);
void to_json(json& j, const BulletList& b);
void from_json(const json& j, BulletList& b);
void to_json(json& j, const FeedbackVerdict& v);
void from_json(const json& j, FeedbackVerdict& v);
void to_json(json& j, const Tip& t);
void from_json(const json& j, Tip& t);
void to_json(json& j, const TipSheet& s);
void from_json(const json& j, TipSheet& s);
void to_json(json& j, const TranscriptEntry& e);
void from_json(const json& j, TranscriptEntry& e);
void to_json(json& j, const DatasetBundle& b);
void from_json(const json& j, DatasetBundle& b);

/// Hex SHA-256 of arbitrary bytes.
std::string sha256_hex(std::string_view data);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace tipline
