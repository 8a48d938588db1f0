#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mocha::text {

// Lowercases ASCII letters; bytes outside ASCII are left untouched.
std::string lower(std::string_view s);

// Removes punctuation. Covers ASCII punctuation plus the common UTF-8
// typographic marks (curly quotes, dashes, ellipsis, guillemets).
// Math symbols such as the arrow used as a segment joiner survive.
std::string strip_punct(std::string_view s);

// lower + strip_punct + split on whitespace.
std::vector<std::string> tokenize(std::string_view s);

std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ");

}  // namespace mocha::text
