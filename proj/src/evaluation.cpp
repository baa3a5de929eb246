#include "tipline/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include <sys/stat.h>

#include "tipline/csv.hpp"
#include "tipline/error.hpp"

namespace tipline::evaluation {

namespace {

const std::vector<std::string> kColumns{"blind_id", "tip_text", "valid", "newsworthy",
                                        "news_values", "matched_claim", "notes"};

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = std::mt19937_64::max() - (std::mt19937_64::max() % n);
    std::uint64_t x;
    do x = rng();
    while (x >= limit);
    return x % n;
}

std::string hex(std::uint64_t v, int digits) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%0*llx", digits, static_cast<unsigned long long>(v));
    return std::string(buf).substr(0, static_cast<std::size_t>(digits));
}

std::string lower_trim(std::string_view s) {
    std::string out;
    for (unsigned char c : s)
        if (!std::isspace(c)) out += static_cast<char>(std::tolower(c));
    return out;
}

std::optional<bool> parse_flag(std::string_view raw, const std::string& blind_id, const char* column) {
    const std::string v = lower_trim(raw);
    if (v.empty()) return std::nullopt;
    if (v == "1" || v == "true" || v == "yes" || v == "y") return true;
    if (v == "0" || v == "false" || v == "no" || v == "n") return false;
    throw EvaluationError(blind_id + ": cannot read '" + std::string(raw) + "' in column " + column);
}

std::string fmt2(double v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", round2(v));
    return buf;
}

std::string setup_label(Setup s) { return s == Setup::baseline ? "BL" : "GA"; }

}  // namespace

bool is_news_value(std::string_view name) {
    return std::find(kNewsValues.begin(), kNewsValues.end(), name) != kNewsValues.end();
}

std::set<std::string> CodingSheet::blind_ids() const {
    std::set<std::string> ids;
    for (const auto& r : rows) ids.insert(r.blind_id);
    return ids;
}

std::set<std::string> SealedKey::blind_ids() const {
    std::set<std::string> ids;
    for (const auto& [id, _] : entries) ids.insert(id);
    return ids;
}

std::pair<CodingSheet, SealedKey> make_coding_sheet(const std::vector<TipSheet>& tip_sheets, std::uint64_t seed) {
    if (tip_sheets.empty()) throw EvaluationError("no tip sheets to code");
    std::set<std::string> runs;
    for (const auto& s : tip_sheets)
        if (!runs.insert(s.run_id).second) throw EvaluationError("duplicate run id '" + s.run_id + "'");

    // Pooled in run id order, so the sheet depends only on the set of runs.
    std::vector<const TipSheet*> ordered;
    for (const auto& s : tip_sheets) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(), [](const TipSheet* a, const TipSheet* b) { return a->run_id < b->run_id; });

    std::vector<KeyEntry> pooled;
    for (const TipSheet* s : ordered)
        for (std::size_t i = 0; i < s->tips.size(); ++i)
            pooled.push_back(KeyEntry{s->run_id, s->setup, s->dataset_id, static_cast<int>(i), s->tips[i].text});

    std::mt19937_64 rng(seed);
    for (std::size_t i = pooled.size(); i > 1; --i) std::swap(pooled[i - 1], pooled[bounded(rng, i)]);

    std::string ids_joined;
    for (const auto& r : runs) ids_joined += r + "\n";
    CodingSheet sheet;
    sheet.sheet_id = "sheet-" + sha256_hex(ids_joined + std::to_string(seed)).substr(0, 12);
    SealedKey key;
    key.sheet_id = sheet.sheet_id;
    std::set<std::string> used;
    for (auto& entry : pooled) {
        std::string id;
        do id = "T" + hex(rng(), 8);
        while (!used.insert(id).second);
        sheet.rows.push_back(SheetRow{id, entry.tip_text});
        key.entries.emplace(id, std::move(entry));
    }
    return {std::move(sheet), std::move(key)};
}

std::string claim_alignment_guide() {
    return "CODING GUIDE\n"
           "valid: 1 if the tip is a reasonable inference from the provided data (check it against the dataset), "
           "else 0.\n"
           "newsworthy: 1 if the tip is potentially newsworthy, i.e. it aligns with at least one news value, else 0.\n"
           "news_values: semicolon-separated subset of timeliness;power_elite;relevance;bad_news;magnitude;"
           "controversy;surprise;actuality (required when newsworthy is 1).\n"
           "matched_claim: 1 if the tip describes an insight also claimed in the published story, else 0.\n"
           "A tip matches a story claim when the described insight is similar in terms of relationships between "
           "variables, categorical distinctions, rankings, or the mention of specific numerical values.\n"
           "The wording does not need to match, and neither does the methodology.\n"
           "Code each row on its own. If a tip lacks the information needed to judge validity, look up its "
           "provenance with: tipline evaluate lookup --key <key file> --blind-id <blind_id>\n";
}

std::string render_sheet_csv(const CodingSheet& sheet) {
    std::string out;
    out += "# sheet_id: " + sheet.sheet_id + "\n";
    std::istringstream guide(claim_alignment_guide());
    for (std::string line; std::getline(guide, line);) out += "# " + line + "\n";
    out += csv::format_row(kColumns) + "\n";
    for (const auto& r : sheet.rows) out += csv::format_row({r.blind_id, r.tip_text, "", "", "", "", ""}) + "\n";
    return out;
}

std::vector<CodingRow> parse_codings_csv(std::string_view text) {
    // Skip the leading comment block.
    std::size_t pos = 0;
    while (pos < text.size() && text[pos] == '#') {
        auto nl = text.find('\n', pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
    }
    auto rows = csv::parse(text.substr(pos));
    if (rows.empty()) throw EvaluationError("coding sheet has no header row");

    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < rows[0].size(); ++i) col[lower_trim(rows[0][i])] = i;
    for (const auto& c : kColumns)
        if (!col.count(c)) throw EvaluationError("coding sheet is missing column '" + c + "'");

    std::vector<CodingRow> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        auto get = [&](const std::string& c) -> std::string {
            std::size_t i = col.at(c);
            return i < row.size() ? row[i] : std::string{};
        };
        CodingRow c;
        c.blind_id = get("blind_id");
        c.tip_text = get("tip_text");
        c.valid = parse_flag(get("valid"), c.blind_id, "valid");
        c.newsworthy = parse_flag(get("newsworthy"), c.blind_id, "newsworthy");
        c.matched_claim = parse_flag(get("matched_claim"), c.blind_id, "matched_claim");
        std::istringstream values(get("news_values"));
        for (std::string v; std::getline(values, v, ';');)
            if (auto t = lower_trim(v); !t.empty()) c.news_values.push_back(t);
        c.notes = get("notes");
        out.push_back(std::move(c));
    }
    return out;
}

void write_sealed_key(const std::filesystem::path& path, const SealedKey& key) {
    json entries = json::object();
    for (const auto& [id, e] : key.entries)
        entries[id] = {{"run_id", e.run_id},
                       {"setup", std::string(to_string(e.setup))},
                       {"project", e.project},
                       {"tip_index", e.tip_index},
                       {"tip_text", e.tip_text}};
    write_text_file(path, json{{"sheet_id", key.sheet_id}, {"entries", entries}}.dump(2) + "\n");
    ::chmod(path.c_str(), S_IRUSR | S_IWUSR);
}

SealedKey read_sealed_key(const std::filesystem::path& path) {
    json j = json::parse(read_text_file(path));
    SealedKey key;
    key.sheet_id = j.value("sheet_id", std::string{});
    for (const auto& [id, e] : j.at("entries").items())
        key.entries.emplace(id, KeyEntry{e.at("run_id").get<std::string>(),
                                         setup_from_string(e.at("setup").get<std::string>()),
                                         e.at("project").get<std::string>(), e.at("tip_index").get<int>(),
                                         e.value("tip_text", std::string{})});
    return key;
}

ValidationReport validate_codings(const std::set<std::string>& sheet_ids, const std::vector<CodingRow>& codings) {
    ValidationReport report;
    std::set<std::string> seen;
    for (const auto& c : codings) {
        if (!sheet_ids.count(c.blind_id)) throw EvaluationError("unknown blind_id '" + c.blind_id + "'");
        if (!seen.insert(c.blind_id).second) {
            report.violations.push_back(c.blind_id + ": coded more than once");
            continue;
        }
        if (!c.valid || !c.newsworthy || !c.matched_claim) {
            report.missing.push_back(c.blind_id);
            continue;
        }
        if (*c.newsworthy && c.news_values.empty())
            report.violations.push_back(c.blind_id + ": newsworthy without any news value");
        for (const auto& v : c.news_values)
            if (!is_news_value(v)) report.violations.push_back(c.blind_id + ": unknown news value '" + v + "'");
    }
    for (const auto& id : sheet_ids)
        if (!seen.count(id)) report.missing.push_back(id);
    std::sort(report.missing.begin(), report.missing.end());
    return report;
}

std::vector<TipCoding> to_tip_codings(const std::vector<CodingRow>& rows) {
    std::vector<TipCoding> out;
    for (const auto& r : rows) {
        if (!r.valid || !r.newsworthy || !r.matched_claim)
            throw EvaluationError(r.blind_id + ": coding is incomplete");
        out.push_back(TipCoding{r.blind_id, *r.valid, *r.newsworthy, r.news_values, *r.matched_claim, r.notes});
    }
    return out;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

const MetricsCell* MetricsTable::cell(std::string_view project, Setup setup) const {
    for (const auto& c : cells)
        if (c.project == project && c.setup == setup) return &c;
    return nullptr;
}

namespace {

void finalize(MetricsCell& c, NewsworthyDenominator d, const std::string& label) {
    if (c.tips == 0) throw EvaluationError(label + ": no coded tips");
    if (c.newsworthy_denominator == 0)
        throw EvaluationError(label + ": no tips in the newsworthiness denominator");
    (void)d;
    c.validity = static_cast<double>(c.valid) / c.tips;
    c.newsworthiness = static_cast<double>(c.newsworthy) / c.newsworthy_denominator;
    c.precision = static_cast<double>(c.matched) / c.tips;
}

}  // namespace

MetricsTable aggregate(const std::vector<TipCoding>& codings, const SealedKey& key, NewsworthyDenominator denominator) {
    if (codings.empty()) throw EvaluationError("no codings to aggregate");
    std::map<std::pair<std::string, Setup>, MetricsCell> cells;
    std::map<Setup, MetricsCell> overall;
    std::set<std::string> seen;
    for (const auto& c : codings) {
        auto it = key.entries.find(c.blind_id);
        if (it == key.entries.end()) throw EvaluationError("unknown blind_id '" + c.blind_id + "'");
        if (!seen.insert(c.blind_id).second) throw EvaluationError("blind_id coded twice: " + c.blind_id);
        const KeyEntry& e = it->second;
        for (MetricsCell* cell : {&cells[{e.project, e.setup}], &overall[e.setup]}) {
            ++cell->tips;
            cell->valid += c.valid;
            cell->matched += c.matched_claim;
            if (denominator == NewsworthyDenominator::all || !c.matched_claim) {
                ++cell->newsworthy_denominator;
                cell->newsworthy += c.newsworthy;
            }
        }
    }
    MetricsTable table;
    table.denominator = denominator;
    for (auto& [k, cell] : cells) {
        cell.project = k.first;
        cell.setup = k.second;
        finalize(cell, denominator, k.first + "/" + std::string(to_string(k.second)));
        table.cells.push_back(cell);
    }
    for (auto& [setup, cell] : overall) {
        cell.project = "overall";
        cell.setup = setup;
        finalize(cell, denominator, "overall/" + std::string(to_string(setup)));
        table.overall[setup] = cell;
    }
    return table;
}

std::string MetricsTable::render_markdown() const {
    std::set<std::string> projects;
    for (const auto& c : cells) projects.insert(c.project);
    const std::array<Setup, 2> setups{Setup::baseline, Setup::agents};

    auto rates = [&](const MetricsCell* c) {
        std::array<std::string, 3> r{"-", "-", "-"};
        if (c) r = {fmt2(c->validity), fmt2(c->newsworthiness), fmt2(c->precision)};
        return r;
    };
    auto row = [&](const std::string& name, const MetricsCell* bl, const MetricsCell* ga) {
        auto b = rates(bl), g = rates(ga);
        return "| " + name + " | " + b[0] + " | " + g[0] + " | " + b[1] + " | " + g[1] + " | " + b[2] + " | " +
               g[2] + " |\n";
    };

    std::string md = "| Project | Validity BL | Validity GA | Newsw. BL | Newsw. GA | Precision BL | Precision GA |\n";
    md += "|---|---|---|---|---|---|---|\n";
    for (const auto& p : projects) md += row(p, cell(p, setups[0]), cell(p, setups[1]));
    auto find_overall = [&](Setup s) -> const MetricsCell* {
        auto it = overall.find(s);
        return it == overall.end() ? nullptr : &it->second;
    };
    md += row("**Overall**", find_overall(Setup::baseline), find_overall(Setup::agents));
    md += "\nBL = baseline, GA = generative agents. Newsworthiness denominator: ";
    md += denominator == NewsworthyDenominator::all ? "all tips.\n" : "tips without a matched claim.\n";
    return md;
}

json MetricsTable::to_json() const {
    auto cell_json = [](const MetricsCell& c) {
        return json{{"project", c.project},
                    {"setup", std::string(tipline::to_string(c.setup))},
                    {"label", setup_label(c.setup)},
                    {"tips", c.tips},
                    {"valid", c.valid},
                    {"newsworthy", c.newsworthy},
                    {"matched", c.matched},
                    {"newsworthy_denominator", c.newsworthy_denominator},
                    {"validity", c.validity},
                    {"newsworthiness", c.newsworthiness},
                    {"precision", c.precision}};
    };
    json j{{"newsworthy_denominator", denominator == NewsworthyDenominator::all ? "all" : "unmatched"},
           {"cells", json::array()},
           {"overall", json::array()}};
    for (const auto& c : cells) j["cells"].push_back(cell_json(c));
    for (const auto& [_, c] : overall) j["overall"].push_back(cell_json(c));
    return j;
}

std::vector<std::string> compare_overall(const MetricsTable& table, const ExpectedRow& expected, double tolerance) {
    std::vector<std::string> flags;
    auto it = table.overall.find(expected.setup);
    const std::string label = setup_label(expected.setup);
    if (it == table.overall.end()) {
        flags.push_back(label + ": no coded tips for this setup");
        return flags;
    }
    auto check = [&](const char* metric, double got, double want) {
        if (std::abs(got - want) > tolerance)
            flags.push_back(label + " overall " + metric + " is " + fmt2(got) + " (pooled), expected " + fmt2(want));
    };
    check("validity", it->second.validity, expected.validity);
    check("newsworthiness", it->second.newsworthiness, expected.newsworthiness);
    check("precision", it->second.precision, expected.precision);
    return flags;
}

}  // namespace tipline::evaluation
