#include <doctest.h>

#include <string>
#include <vector>

#include "empdialog/text.hpp"

using empdialog::text::normalize;
using empdialog::text::tokenize;
using Tokens = std::vector<std::string>;

TEST_CASE("normalize lowercases and folds typographic quotes") {
  CHECK(normalize("Hello WORLD") == "hello world");
  CHECK(normalize("that\xE2\x80\x99s") == "that's");
  CHECK(normalize("\xE2\x80\x9Cquoted\xE2\x80\x9D") == "\"quoted\"");
  CHECK(normalize("it`s") == "it's");
}

TEST_CASE("tokenize splits clitics the treebank way") {
  CHECK(tokenize("that's scary!") == Tokens{"that", "'s", "scary", "!"});
  CHECK(tokenize("i can't believe it") == Tokens{"i", "ca", "n't", "believe", "it"});
  CHECK(tokenize("you're right") == Tokens{"you", "'re", "right"});
  CHECK(tokenize("'ll") == Tokens{"'ll"});
  CHECK(tokenize("must've") == Tokens{"must", "'ve"});
}

TEST_CASE("tokenize keeps a trailing percent on its number") {
  CHECK(tokenize("i am 100% sure.") == Tokens{"i", "am", "100%", "sure", "."});
  CHECK(tokenize("100 %") == Tokens{"100", "%"});
}

TEST_CASE("tokenize emits punctuation as single tokens") {
  CHECK(tokenize("oh, no!") == Tokens{"oh", ",", "no", "!"});
  CHECK(tokenize("what ... ?") == Tokens{"what", ".", ".", ".", "?"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("   ").empty());
}

TEST_CASE("split_whitespace and trim") {
  auto parts = empdialog::text::split_whitespace("  a  bb\tccc\n");
  REQUIRE(parts.size() == 3);
  CHECK(parts[0] == "a");
  CHECK(parts[2] == "ccc");
  CHECK(empdialog::text::trim("  x y \n") == "x y");
  CHECK(empdialog::text::trim("   ").empty());
}
