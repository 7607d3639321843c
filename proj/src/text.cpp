#include "empdialog/text.hpp"

#include <cctype>

namespace empdialog::text {

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

// Split clitics off a word containing apostrophes.
void push_word(std::string word, std::vector<std::string>& out) {
  if (word.size() > 3 && word.ends_with("n't")) {
    out.push_back(word.substr(0, word.size() - 3));
    out.emplace_back("n't");
    return;
  }
  auto apos = word.find('\'', 1);
  if (apos != std::string::npos && apos + 1 < word.size()) {
    out.push_back(word.substr(0, apos));
    out.push_back(word.substr(apos));
    return;
  }
  out.push_back(std::move(word));
}

}  // namespace

std::string normalize(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto c = static_cast<unsigned char>(s[i]);
    // U+2018/U+2019 single quotes and U+201C/U+201D double quotes.
    if (c == 0xE2 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x80) {
      auto c3 = static_cast<unsigned char>(s[i + 2]);
      if (c3 == 0x98 || c3 == 0x99) {
        out.push_back('\'');
        i += 2;
        continue;
      }
      if (c3 == 0x9C || c3 == 0x9D) {
        out.push_back('"');
        i += 2;
        continue;
      }
    }
    if (c == '`') {
      out.push_back('\'');
      continue;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = s.size();
  auto at = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  while (i < n) {
    unsigned char c = at(i);
    if (is_space(c)) {
      ++i;
      continue;
    }
    bool leading_apostrophe = c == '\'' && i + 1 < n && std::isalpha(at(i + 1));
    if (is_word_char(c) || leading_apostrophe) {
      std::size_t j = i + 1;
      while (j < n) {
        if (is_word_char(at(j))) {
          ++j;
        } else if (at(j) == '\'' && j + 1 < n && std::isalpha(at(j + 1))) {
          ++j;
        } else {
          break;
        }
      }
      if (j < n && at(j) == '%') ++j;
      std::string word(s.substr(i, j - i));
      if (leading_apostrophe) {
        out.push_back(std::move(word));
      } else {
        push_word(std::move(word), out);
      }
      i = j;
      continue;
    }
    out.emplace_back(1, static_cast<char>(c));
    ++i;
  }
  return out;
}

std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool is_terminal_punct(const std::string& token) { return token == "." || token == "!" || token == "?"; }

}  // namespace empdialog::text
