#pragma once
// Minimal RFC 4180 field handling shared by every CSV reader and writer here.
// Records never span lines; quoted fields may contain commas and "" escapes.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace raterfuse::csv {

// Throws ParseError on an unterminated quote.
std::vector<std::string> split_line(std::string_view line, std::size_t line_no);

std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace raterfuse::csv
