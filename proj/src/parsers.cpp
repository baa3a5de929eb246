#include "tipline/parsers.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <regex>
#include <sstream>

#include "tipline/error.hpp"

namespace tipline::parsers {

namespace {

constexpr std::string_view kBulletDot = "\xE2\x80\xA2";  // •

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string> lines_of(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream in{std::string(text)};
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out.push_back(std::move(line));
    }
    return out;
}

struct NumberedLine {
    int number;
    std::string text;
};

// "  12. text", "3) text", "**4.** text"
std::optional<NumberedLine> match_numbered(std::string_view line) {
    std::string_view s = trim(line);
    bool bold = false;
    if (s.substr(0, 2) == "**") {
        s.remove_prefix(2);
        bold = true;
    }
    std::size_t digits = 0;
    while (digits < s.size() && digits < 4 && std::isdigit(static_cast<unsigned char>(s[digits]))) ++digits;
    if (digits == 0 || digits >= s.size()) return std::nullopt;
    char delim = s[digits];
    if (delim != '.' && delim != ')') return std::nullopt;
    std::string_view rest = s.substr(digits + 1);
    if (bold && rest.substr(0, 2) == "**") rest.remove_prefix(2);
    if (rest.empty() || !std::isspace(static_cast<unsigned char>(rest.front()))) return std::nullopt;
    rest = trim(rest);
    if (rest.empty()) return std::nullopt;
    return NumberedLine{std::stoi(std::string(s.substr(0, digits))), std::string(rest)};
}

std::optional<std::string> match_bullet(std::string_view line) {
    std::string_view s = trim(line);
    std::string_view rest;
    if (!s.empty() && (s.front() == '-' || s.front() == '*')) {
        rest = s.substr(1);
    } else if (s.substr(0, kBulletDot.size()) == kBulletDot) {
        rest = s.substr(kBulletDot.size());
    } else if (auto n = match_numbered(line)) {
        return n->text;
    } else {
        return std::nullopt;
    }
    if (rest.empty() || !std::isspace(static_cast<unsigned char>(rest.front()))) return std::nullopt;
    rest = trim(rest);
    if (rest.empty()) return std::nullopt;
    return std::string(rest);
}

bool starts_indented(std::string_view line) {
    return !line.empty() && (line.front() == ' ' || line.front() == '\t');
}

}  // namespace

std::vector<Question> parse_numbered_list(std::string_view text, int expected_n) {
    std::vector<NumberedLine> items;
    bool open = false;
    for (const auto& line : lines_of(text)) {
        if (auto m = match_numbered(line)) {
            items.push_back(std::move(*m));
            open = true;
        } else if (trim(line).empty()) {
            open = false;
        } else if (open && starts_indented(line)) {
            items.back().text += " ";
            items.back().text += trim(line);
        } else {
            open = false;
        }
    }
    std::stable_sort(items.begin(), items.end(),
                     [](const NumberedLine& a, const NumberedLine& b) { return a.number < b.number; });
    items.erase(std::unique(items.begin(), items.end(),
                            [](const NumberedLine& a, const NumberedLine& b) { return a.number == b.number; }),
                items.end());
    if (static_cast<int>(items.size()) < expected_n)
        throw ReplyFormatError("expected " + std::to_string(expected_n) + " numbered items, found " +
                               std::to_string(items.size()));

    std::vector<Question> out;
    for (int i = 0; i < expected_n; ++i) out.push_back(Question{i + 1, std::move(items[static_cast<std::size_t>(i)].text)});
    return out;
}

std::string format_numbered_list(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += std::to_string(i + 1) + ". " + items[i] + "\n";
    return out;
}

BulletList parse_bullets(std::string_view text) {
    BulletList list;
    bool open = false;
    for (const auto& line : lines_of(text)) {
        if (auto item = match_bullet(line)) {
            list.items.push_back(std::move(*item));
            open = true;
        } else if (trim(line).empty()) {
            open = false;
        } else if (open) {
            list.items.back() += " ";
            list.items.back() += trim(line);
        }
    }
    if (list.items.empty()) throw ReplyFormatError("no bullet points found in reply");
    return list;
}

std::string format_bullets(const BulletList& bullets, std::string_view marker) {
    std::string out;
    for (const auto& item : bullets.items) {
        out += marker;
        out += ' ';
        out += item;
        out += '\n';
    }
    return out;
}

FeedbackVerdict parse_verdict(std::string_view text) {
    static const std::regex token(R"(\boption\s*#?\s*([123])\b)", std::regex::icase);
    const std::string s(text);
    std::smatch m;
    if (!std::regex_search(s, m, token)) throw ReplyFormatError("reply names no option (expected 'Option 1', 'Option 2' or 'Option 3')");

    FeedbackVerdict v;
    v.option = static_cast<VerdictOption>(m[1].str()[0] - '0');
    std::string_view after = std::string_view(s).substr(static_cast<std::size_t>(m.position(0) + m.length(0)));
    after = trim(after);
    while (!after.empty() && (after.front() == ':' || after.front() == '.' || after.front() == '-' ||
                              after.front() == ')' || after.front() == '*'))
        after = trim(after.substr(1));
    v.feedback = std::string(after);
    if (v.option == VerdictOption::needs_more_work && v.feedback.empty())
        throw ReplyFormatError("option 2 requires feedback for the analyst");
    return v;
}

}  // namespace tipline::parsers
