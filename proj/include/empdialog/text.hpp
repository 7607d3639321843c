#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace empdialog::text {

/// ASCII lowercase plus folding of typographic apostrophes/quotes to '\''.
std::string normalize(std::string_view s);

/// Tokenize normalized text into words and punctuation.
///
/// Words are alphanumeric runs with internal apostrophes; a '%' directly
/// after a word is kept with it ("100%"). Clitics are split off the way
/// treebank tokenizers do: "that's" -> "that" "'s", "can't" -> "ca" "n't".
/// A token that starts with an apostrophe ("'ll") stays whole. Every other
/// non-space character is its own token.
std::vector<std::string> tokenize(std::string_view s);

/// Split on ASCII whitespace.
std::vector<std::string_view> split_whitespace(std::string_view s);

std::string_view trim(std::string_view s);

bool is_terminal_punct(const std::string& token);

}  // namespace empdialog::text
