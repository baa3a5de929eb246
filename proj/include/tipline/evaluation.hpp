#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tipline/core.hpp"

namespace tipline::evaluation {

inline constexpr std::array<std::string_view, 8> kNewsValues{
    "timeliness", "power_elite", "relevance", "bad_news", "magnitude", "controversy", "surprise", "actuality"};

bool is_news_value(std::string_view name);

struct SheetRow {
    std::string blind_id;
    std::string tip_text;
};

/// Pooled tips in randomized order, carrying nothing that reveals the
/// setup or run a tip came from.
struct CodingSheet {
    std::string sheet_id;
    std::vector<SheetRow> rows;
    std::set<std::string> blind_ids() const;
};

struct KeyEntry {
    std::string run_id;
    Setup setup = Setup::agents;
    std::string project;
    int tip_index = 0;
    std::string tip_text;
    bool operator==(const KeyEntry&) const = default;
};

/// blind_id -> source tip. Kept in a separate, owner-only file.
struct SealedKey {
    std::string sheet_id;
    std::map<std::string, KeyEntry> entries;
    std::set<std::string> blind_ids() const;
};

struct TipCoding {
    std::string blind_id;
    bool valid = false;
    bool newsworthy = false;
    std::vector<std::string> news_values;
    bool matched_claim = false;
    std::string notes;
};

/// One coded row as read from the sheet; unanswered fields stay empty.
struct CodingRow {
    std::string blind_id;
    std::string tip_text;
    std::optional<bool> valid;
    std::optional<bool> newsworthy;
    std::vector<std::string> news_values;
    std::optional<bool> matched_claim;
    std::string notes;
};

/// Throws EvaluationError on duplicate run ids or no tip sheets. The
/// shuffle is a seeded Fisher-Yates permutation, stable across platforms.
std::pair<CodingSheet, SealedKey> make_coding_sheet(const std::vector<TipSheet>& tip_sheets, std::uint64_t seed);

/// Rubric printed at the top of every coding sheet.
std::string claim_alignment_guide();

std::string render_sheet_csv(const CodingSheet& sheet);
std::vector<CodingRow> parse_codings_csv(std::string_view text);

void write_sealed_key(const std::filesystem::path& path, const SealedKey& key);
SealedKey read_sealed_key(const std::filesystem::path& path);

struct ValidationReport {
    std::vector<std::string> missing;     // blind ids without a complete coding
    std::vector<std::string> violations;  // human-readable invariant failures
    bool ok() const noexcept { return missing.empty() && violations.empty(); }
};

/// Throws EvaluationError for a coding whose blind_id is not on the sheet.
ValidationReport validate_codings(const std::set<std::string>& sheet_ids, const std::vector<CodingRow>& codings);

/// Converts fully answered rows; throws EvaluationError if any field is unanswered.
std::vector<TipCoding> to_tip_codings(const std::vector<CodingRow>& rows);

enum class NewsworthyDenominator { all, unmatched };

struct MetricsCell {
    std::string project;
    Setup setup = Setup::agents;
    int tips = 0;
    int valid = 0;
    int newsworthy = 0;
    int matched = 0;
    int newsworthy_denominator = 0;
    double validity = 0.0;
    double newsworthiness = 0.0;
    double precision = 0.0;
};

struct MetricsTable {
    std::vector<MetricsCell> cells;          // sorted by (project, setup)
    std::map<Setup, MetricsCell> overall;    // pooled counts per setup
    NewsworthyDenominator denominator = NewsworthyDenominator::all;

    const MetricsCell* cell(std::string_view project, Setup setup) const;
    std::string render_markdown() const;
    json to_json() const;
};

/// Unblinds through the key and computes per-(project, setup) and pooled
/// rates. Throws EvaluationError on unknown ids or an empty denominator.
MetricsTable aggregate(const std::vector<TipCoding>& codings, const SealedKey& key,
                       NewsworthyDenominator denominator = NewsworthyDenominator::all);

struct ExpectedRow {
    Setup setup;
    double validity;
    double newsworthiness;
    double precision;
};

/// Lists every overall rate that differs from the expected row by more
/// than `tolerance`.
std::vector<std::string> compare_overall(const MetricsTable& table, const ExpectedRow& expected,
                                         double tolerance = 0.005);

/// Rounds half away from zero to two decimals, as reported.
double round2(double v);

}  // namespace tipline::evaluation
