#include <gtest/gtest.h>

#include <random>

#include "tipline/error.hpp"
#include "tipline/parsers.hpp"

using namespace tipline;
using namespace tipline::parsers;

namespace {

std::vector<std::string> texts(const std::vector<Question>& qs) {
    std::vector<std::string> out;
    for (const auto& q : qs) out.push_back(q.text);
    return out;
}

std::string random_item(std::mt19937_64& rng) {
    static const std::vector<std::string> words{"Acme", "won", "42%", "of", "contracts", "in", "2020,", "(up)",
                                                "vs.", "rivals", "\"quoted\"", "é"};
    std::uniform_int_distribution<std::size_t> len(1, 8), pick(0, words.size() - 1);
    std::string s;
    for (std::size_t i = len(rng); i > 0; --i) s += (s.empty() ? "" : " ") + words[pick(rng)];
    return s;
}

}  // namespace

TEST(NumberedList, Basic) {
    auto qs = parse_numbered_list("1. How many rows?\n2. Which region leads?", 2);
    EXPECT_EQ(texts(qs), (std::vector<std::string>{"How many rows?", "Which region leads?"}));
    EXPECT_EQ(qs[0].id, 1);
    EXPECT_EQ(qs[1].id, 2);
}

TEST(NumberedList, ProseIsMalformed) {
    EXPECT_THROW(parse_numbered_list("I would look at the regions and the totals.", 10), ReplyFormatError);
}

TEST(NumberedList, MarkerFormsAgree) {
    auto dot = parse_numbered_list("1. First?\n2. Second?", 2);
    auto paren = parse_numbered_list("1) First?\n2) Second?", 2);
    auto bold = parse_numbered_list("**1.** First?\n**2.** Second?", 2);
    EXPECT_EQ(dot, paren);
    EXPECT_EQ(dot, bold);
}

TEST(NumberedList, PreambleContinuationAndExtraItems) {
    auto qs = parse_numbered_list("Here are my questions:\n\n1. First\n   part two?\n2. Second?\n3. Third?\n", 2);
    EXPECT_EQ(texts(qs), (std::vector<std::string>{"First part two?", "Second?"}));
}

TEST(NumberedList, FormatParseIdentity) {
    std::mt19937_64 rng(11);
    for (int iter = 0; iter < 300; ++iter) {
        std::vector<std::string> items(static_cast<std::size_t>(rng() % 12 + 1));
        for (auto& s : items) s = random_item(rng);
        auto parsed = parse_numbered_list(format_numbered_list(items), static_cast<int>(items.size()));
        EXPECT_EQ(texts(parsed), items);
    }
}

TEST(Bullets, Basic) { EXPECT_EQ(parse_bullets("- a\n- b").items, (std::vector<std::string>{"a", "b"})); }

TEST(Bullets, Continuation) {
    EXPECT_EQ(parse_bullets("- a\n  continued\n- b").items, (std::vector<std::string>{"a continued", "b"}));
}

TEST(Bullets, NoBulletsIsMalformed) { EXPECT_THROW(parse_bullets("Nothing to report here."), ReplyFormatError); }

TEST(Bullets, MarkerIndependence) {
    std::mt19937_64 rng(5);
    for (int iter = 0; iter < 200; ++iter) {
        BulletList list;
        for (std::size_t i = rng() % 8 + 1; i > 0; --i) list.items.push_back(random_item(rng));
        for (std::string_view marker : {"-", "*", "•"}) EXPECT_EQ(parse_bullets(format_bullets(list, marker)), list);
        std::string mixed;
        for (std::size_t i = 0; i < list.items.size(); ++i)
            mixed += std::string(i % 2 ? "• " : "- ") + list.items[i] + "\n";
        EXPECT_EQ(parse_bullets(mixed), list);
    }
}

TEST(Verdict, OptionTwoWithFeedback) {
    auto v = parse_verdict("Option 2: check per-capita rates");
    EXPECT_EQ(v.option, VerdictOption::needs_more_work);
    EXPECT_EQ(v.feedback, "check per-capita rates");
}

TEST(Verdict, CaseInsensitive) { EXPECT_EQ(parse_verdict("I choose option 1.").option, VerdictOption::publishable); }

TEST(Verdict, NoOption) { EXPECT_THROW(parse_verdict("Interesting analysis."), ReplyFormatError); }

TEST(Verdict, OptionTwoWithoutFeedback) { EXPECT_THROW(parse_verdict("Option 2"), ReplyFormatError); }

TEST(Verdict, AlwaysOneTwoOrThree) {
    std::mt19937_64 rng(9);
    const std::vector<std::string> pieces{"Option", "option", "OPTION", "1", "2", "3", "4", "0", "12",
                                          ":", "#", " ", "\n", "-", "text", "options"};
    int parsed = 0;
    for (int iter = 0; iter < 3000; ++iter) {
        std::string s;
        for (std::size_t i = rng() % 12; i > 0; --i) s += pieces[rng() % pieces.size()];
        try {
            auto v = parse_verdict(s);
            const int o = static_cast<int>(v.option);
            EXPECT_TRUE(o >= 1 && o <= 3) << s;
            ++parsed;
        } catch (const ReplyFormatError&) {
        }
    }
    for (int o = 1; o <= 3; ++o)
        EXPECT_EQ(static_cast<int>(parse_verdict("Option " + std::to_string(o) + ": more please").option), o);
    EXPECT_GT(parsed, 0);
}
