#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tipline/core.hpp"

namespace tipline::parsers {

/// Extracts "N." / "N)" numbered lines in numeric order and keeps the first
/// `expected_n`. Indented lines directly below an item continue it.
/// Throws ReplyFormatError when fewer than `expected_n` items are found.
std::vector<Question> parse_numbered_list(std::string_view text, int expected_n);

std::string format_numbered_list(const std::vector<std::string>& items);

/// Lines starting with "-", "*", "•" or "N." open an item; non-blank lines
/// directly after an item are appended to it. Throws ReplyFormatError if
/// nothing bullet-like is found.
BulletList parse_bullets(std::string_view text);

std::string format_bullets(const BulletList& bullets, std::string_view marker = "-");

/// Finds the first "Option 1|2|3" (any case). The text after the token is
/// the feedback. Throws ReplyFormatError when no token is present, or when
/// option 2 comes without any feedback.
FeedbackVerdict parse_verdict(std::string_view text);

}  // namespace tipline::parsers
