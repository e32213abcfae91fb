#pragma once

// Exact text round-tripping of numbers, shared by every file format.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace clb::textio {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);
std::optional<double> parse_double(std::string_view s);
std::optional<std::size_t> parse_size(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

std::string_view trim(std::string_view s);
/// Splits on any run of whitespace.
std::vector<std::string_view> split_ws(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

std::string join_sizes(const std::vector<std::size_t>& v, char sep = ',');
/// Parses "a,b,c" into sizes; nullopt on any malformed entry.
std::optional<std::vector<std::size_t>> parse_sizes(std::string_view s, char sep = ',');

} // namespace clb::textio
