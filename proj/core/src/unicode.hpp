#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace xlt::unicode {

/// Decodes UTF-8 into code points. Invalid sequences become U+FFFD.
std::vector<char32_t> decode(std::string_view text);
void append_utf8(std::string& out, char32_t cp);
std::string encode(const std::vector<char32_t>& cps, std::size_t begin, std::size_t end);

bool is_space(char32_t cp);
// Scripts written without spaces; every such character is its own word.
bool is_cjk(char32_t cp);
bool is_punctuation(char32_t cp);

}  // namespace xlt::unicode
