// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace claimcheck::text {

bool is_space(char c);
bool is_word_char(char c);

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
std::string collapse_whitespace(std::string_view s);

// Whitespace-delimited tokens; never returns empty tokens.
std::vector<std::string_view> split_whitespace(std::string_view s);
std::size_t word_count(std::string_view s);

// Splits on '\n'; a trailing '\r' is dropped from each line.
std::vector<std::string_view> split_lines(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);
bool contains_ci(std::string_view haystack, std::string_view needle);

}  // namespace claimcheck::text
