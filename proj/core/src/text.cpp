#include "mocha/text.hpp"

#include <array>
#include <cctype>

namespace mocha::text {

namespace {

const std::array<std::string_view, 12> kUnicodePunct = {
    "‘", "’", "“", "”",  // curly quotes
    "–", "—",                       // en / em dash
    "…",                                 // ellipsis
    "«", "»",                       // guillemets
    "‚", "„", "·",             // low quotes, middle dot
};

}  // namespace

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string strip_punct(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
      if (!std::ispunct(c)) out.push_back(s[i]);
      ++i;
      continue;
    }
    bool matched = false;
    for (auto p : kUnicodePunct) {
      if (s.substr(i, p.size()) == p) {
        i += p.size();
        matched = true;
        break;
      }
    }
    if (!matched) {
      out.push_back(s[i]);
      ++i;
    }
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view s) {
  std::string cleaned = strip_punct(lower(s));
  std::vector<std::string> tokens;
  size_t i = 0;
  while (i < cleaned.size()) {
    while (i < cleaned.size() && std::isspace(static_cast<unsigned char>(cleaned[i]))) ++i;
    size_t start = i;
    while (i < cleaned.size() && !std::isspace(static_cast<unsigned char>(cleaned[i]))) ++i;
    if (i > start) tokens.push_back(cleaned.substr(start, i - start));
  }
  return tokens;
}

std::string join(const std::vector<std::string>& tokens, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.append(sep);
    out.append(tokens[i]);
  }
  return out;
}

}  // namespace mocha::text
