#include <gtest/gtest.h>

#include <sys/stat.h>

#include "support/fixtures.hpp"
#include "support/reference_metrics.hpp"
#include "tipline/error.hpp"
#include "tipline/evaluation.hpp"

using namespace tipline;
using namespace tipline::evaluation;
using tipline::testing::TempDir;

namespace {

MetricsTable reference_table(NewsworthyDenominator d = NewsworthyDenominator::all) {
    auto [sheet, key] = make_coding_sheet(tipline::testing::reference_sheets(), 42);
    return aggregate(tipline::testing::code_from_counts(key), key, d);
}

}  // namespace

TEST(Aggregate, GaColumnMatchesReference) {
    auto t = reference_table();
    const std::array<std::array<double, 3>, 5> expected{{{0.90, 0.70, 0.13},
                                                         {0.77, 0.63, 0.53},
                                                         {0.93, 0.73, 0.27},
                                                         {0.87, 0.63, 0.57},
                                                         {0.97, 0.67, 0.20}}};
    for (std::size_t p = 0; p < 5; ++p) {
        const auto* c = t.cell(tipline::testing::reference_projects()[p], Setup::agents);
        ASSERT_NE(c, nullptr);
        EXPECT_DOUBLE_EQ(round2(c->validity), expected[p][0]);
        EXPECT_DOUBLE_EQ(round2(c->newsworthiness), expected[p][1]);
        EXPECT_DOUBLE_EQ(round2(c->precision), expected[p][2]);
    }
    const auto& ga = t.overall.at(Setup::agents);
    EXPECT_NEAR(ga.validity, 0.89, 0.005);
    EXPECT_NEAR(ga.newsworthiness, 0.67, 0.005);
    EXPECT_NEAR(ga.precision, 0.34, 0.005);
    EXPECT_TRUE(compare_overall(t, {Setup::agents, 0.89, 0.67, 0.34}).empty());
}

TEST(Aggregate, BaselineOverallIsPooledAndFlagged) {
    auto t = reference_table();
    const auto& bl = t.overall.at(Setup::baseline);
    EXPECT_EQ(bl.tips, 150);
    EXPECT_NEAR(bl.validity, 0.82, 0.005);
    EXPECT_NEAR(bl.newsworthiness, 0.49, 0.005);
    EXPECT_NEAR(bl.precision, 0.27, 0.005);
    auto flags = compare_overall(t, {Setup::baseline, 0.82, 0.52, 0.28});
    ASSERT_EQ(flags.size(), 2u);
    EXPECT_NE(flags[0].find("newsworthiness"), std::string::npos);
    EXPECT_NE(flags[1].find("precision"), std::string::npos);
    auto md = t.render_markdown();
    EXPECT_NE(md.find("| **Overall** | 0.82 | 0.89 | 0.49 | 0.67 | 0.27 | 0.34 |"), std::string::npos) << md;
}

TEST(Aggregate, UnmatchedDenominator) {
    auto t = reference_table(NewsworthyDenominator::unmatched);
    const auto* c = t.cell("themarkup-scoring", Setup::agents);
    // tips 0..3 matched; newsworthy are tips 0..20, so 17 of the 26 unmatched.
    EXPECT_EQ(c->newsworthy_denominator, 26);
    EXPECT_EQ(c->newsworthy, 17);
    EXPECT_EQ(t.to_json()["newsworthy_denominator"], "unmatched");
}

TEST(Aggregate, UnknownIdAndEmptyInput) {
    auto [sheet, key] = make_coding_sheet(tipline::testing::reference_sheets(2), 1);
    EXPECT_THROW(aggregate({}, key), EvaluationError);
    EXPECT_THROW(aggregate({TipCoding{"Tnope"}}, key), EvaluationError);
}

TEST(Blinding, DeterministicForSeed) {
    auto sheets = tipline::testing::reference_sheets();
    auto [a, ka] = make_coding_sheet(sheets, 7);
    auto [b, kb] = make_coding_sheet(sheets, 7);
    auto [c, kc] = make_coding_sheet(sheets, 8);
    EXPECT_EQ(render_sheet_csv(a), render_sheet_csv(b));
    EXPECT_NE(render_sheet_csv(a), render_sheet_csv(c));
}

TEST(Blinding, SheetCarriesNoSetupTokens) {
    auto sheets = tipline::testing::reference_sheets();
    auto [sheet, key] = make_coding_sheet(sheets, 7);
    const auto csv = render_sheet_csv(sheet);
    std::string lower;
    for (char ch : csv) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    for (const char* token : {"baseline", "agents", "\"ga\"", ",ga,", ",bl,"})
        EXPECT_EQ(lower.find(token), std::string::npos) << token;
    for (const auto& s : sheets) EXPECT_EQ(csv.find(s.run_id), std::string::npos);
}

TEST(Blinding, UnblindRoundTripIsIdentity) {
    auto sheets = tipline::testing::reference_sheets();
    auto [sheet, key] = make_coding_sheet(sheets, 7);
    ASSERT_EQ(sheet.rows.size(), 300u);
    EXPECT_EQ(sheet.blind_ids(), key.blind_ids());
    std::set<std::pair<std::string, int>> seen;
    for (const auto& row : sheet.rows) {
        const auto& e = key.entries.at(row.blind_id);
        const TipSheet* src = nullptr;
        for (const auto& s : sheets)
            if (s.run_id == e.run_id) src = &s;
        ASSERT_NE(src, nullptr);
        EXPECT_EQ(src->setup, e.setup);
        EXPECT_EQ(src->tips[static_cast<std::size_t>(e.tip_index)].text, row.tip_text);
        seen.insert({e.run_id, e.tip_index});
    }
    EXPECT_EQ(seen.size(), 300u);
}

TEST(Blinding, ShuffleMixesSetups) {
    auto [sheet, key] = make_coding_sheet(tipline::testing::reference_sheets(), 3);
    int ga_in_first_half = 0;
    for (std::size_t i = 0; i < 150; ++i) ga_in_first_half += key.entries.at(sheet.rows[i].blind_id).setup == Setup::agents;
    EXPECT_GT(ga_in_first_half, 50);
    EXPECT_LT(ga_in_first_half, 100);
}

TEST(Blinding, DuplicateRunIdRejected) {
    auto sheets = tipline::testing::reference_sheets(1);
    sheets.push_back(sheets.front());
    EXPECT_THROW(make_coding_sheet(sheets, 1), EvaluationError);
    EXPECT_THROW(make_coding_sheet({}, 1), EvaluationError);
}

TEST(Blinding, KeyIsOwnerOnlyAndRoundTrips) {
    TempDir dir;
    auto [sheet, key] = make_coding_sheet(tipline::testing::reference_sheets(3), 5);
    write_sealed_key(dir / "key.json", key);
    struct stat st {};
    ASSERT_EQ(::stat((dir / "key.json").c_str(), &st), 0);
    EXPECT_EQ(st.st_mode & 0777, 0600u);
    auto back = read_sealed_key(dir / "key.json");
    EXPECT_EQ(back.sheet_id, key.sheet_id);
    EXPECT_EQ(back.entries, key.entries);
}

TEST(Sheet, GuideStatesAlignmentRule) {
    const auto guide = claim_alignment_guide();
    for (const char* s : {"relationships between variables", "categorical distinctions", "rankings",
                          "specific numerical values", "wording does not need to match", "methodology"})
        EXPECT_NE(guide.find(s), std::string::npos) << s;
    for (auto v : kNewsValues) EXPECT_NE(guide.find(v), std::string::npos) << v;
}

TEST(Codings, ParseValidateAndConvert) {
    auto [sheet, key] = make_coding_sheet(tipline::testing::reference_sheets(1), 5);
    std::string csv = render_sheet_csv(sheet);
    // Fill in every row.
    std::string filled;
    std::istringstream in(csv);
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line[0] == 'T' && line.find(",,,,,") != std::string::npos)
            line.replace(line.find(",,,,,"), 5, ",1,1,magnitude;surprise,0,");
        filled += line + "\n";
    }
    auto rows = parse_codings_csv(filled);
    ASSERT_EQ(rows.size(), sheet.rows.size());
    auto report = validate_codings(sheet.blind_ids(), rows);
    EXPECT_TRUE(report.ok());
    auto codings = to_tip_codings(rows);
    EXPECT_EQ(codings[0].news_values, (std::vector<std::string>{"magnitude", "surprise"}));
    auto t = aggregate(codings, key);
    EXPECT_DOUBLE_EQ(t.overall.at(Setup::agents).validity, 1.0);
}

TEST(Codings, MissingAndViolations) {
    std::set<std::string> ids{"T1", "T2", "T3", "T4"};
    std::vector<CodingRow> rows(3);
    rows[0] = {"T1", "", true, true, {}, false, ""};
    rows[1] = {"T2", "", true, false, {"gossip"}, false, ""};
    rows[2] = {"T3", "", true, std::nullopt, {}, false, ""};
    auto report = validate_codings(ids, rows);
    EXPECT_EQ(report.missing, (std::vector<std::string>{"T3", "T4"}));
    ASSERT_EQ(report.violations.size(), 2u);
    EXPECT_THROW(validate_codings(ids, {CodingRow{"T9"}}), EvaluationError);
    EXPECT_THROW(to_tip_codings({rows[2]}), EvaluationError);
    EXPECT_THROW(parse_codings_csv("blind_id,tip_text\nT1,x\n"), EvaluationError);
}

TEST(Blinding, IndependentOfInputOrder) {
    auto sheets = tipline::testing::reference_sheets(5);
    auto reversed = sheets;
    std::reverse(reversed.begin(), reversed.end());
    auto [a, ka] = evaluation::make_coding_sheet(sheets, 11);
    auto [b, kb] = evaluation::make_coding_sheet(reversed, 11);
    EXPECT_EQ(evaluation::render_sheet_csv(a), evaluation::render_sheet_csv(b));
    EXPECT_EQ(ka.entries, kb.entries);
}
