#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tipline::csv {

using Row = std::vector<std::string>;

/// RFC 4180 reader: quoted fields, doubled quotes, embedded newlines, CRLF.
/// Throws MalformedCsvError on an unterminated quote.
std::vector<Row> parse(std::string_view text);

/// Quotes a field only when it contains a separator, quote or newline.
std::string escape(std::string_view field);
std::string format_row(const Row& row);

}  // namespace tipline::csv
