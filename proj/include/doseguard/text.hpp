#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace doseguard::text {

/// Decodes UTF-8; invalid sequences become U+FFFD.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);
void append_utf8(std::string& out, char32_t cp);

std::size_t codepoint_count(std::string_view s);

/// ASCII-only lowercase; bytes >= 0x80 are left untouched.
std::string ascii_lower(std::string_view s);

bool is_blank(std::string_view s);

/// Word tokens: maximal runs of ASCII alphanumerics and non-ASCII letters
/// (non-ASCII punctuation blocks act as separators), lowercased, keeping
/// tokens with at least `min_length` code points.
std::vector<std::string> word_tokens(std::string_view s, std::size_t min_length);

}  // namespace doseguard::text
