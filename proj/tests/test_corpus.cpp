#include <doctest.h>

#include <sstream>
#include <string>
#include <vector>

#include "empdialog/corpus.hpp"
#include "empdialog/error.hpp"
#include "empdialog/random.hpp"
#include "empdialog/synthetic.hpp"
#include "empdialog/text.hpp"
#include "empdialog/taxonomy.hpp"
#include "test_support.hpp"

using namespace empdialog;

namespace {

const char* kHeader = "conv_id,utterance_idx,context,prompt,speaker_idx,utterance,selfeval,tags\n";

ParseResult parse_string(const std::string& text, ParseOptions options = {}) {
  std::istringstream in(text);
  return parse_corpus(in, options);
}

std::vector<std::string> sentence_texts(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& s : split_sentences(text)) out.push_back(s.text);
  return out;
}

std::string random_text(Rng& rng) {
  static const std::vector<std::string> pieces{"hello", "Dr.", "e.g.", "ok", "!", "?", ".", "...", "wow!",
                                               "\"yes.\"", "(sure.)", "i'm", "fine", "_", "me,", "  ", "3.5"};
  std::string out;
  auto words = rng.below(12);
  for (std::uint64_t i = 0; i < words; ++i) {
    if (i) out += rng.below(4) ? " " : "";
    out += pieces[rng.below(pieces.size())];
  }
  return out;
}

}  // namespace

TEST_CASE("three-dialogue fixture parses into the expected tree") {
  std::string text = std::string(kHeader) +
                     "hit:0_conv:1,1,sad,My dog died_comma_ sadly,1,He was old_comma_ but I miss him.,,\n"
                     "hit:0_conv:1,2,sad,My dog died_comma_ sadly,0,Oh no! I'm sorry.,,\n"
                     "hit:1_conv:3,1,joyful,Got a job,2,I got the job!,,\n"
                     "hit:1_conv:3,2,joyful,Got a job,7,Congratulations to you!,,\n"
                     "hit:1_conv:3,3,joyful,Got a job,2,Thanks.,,\n"
                     "hit:2_conv:5,1,proud,Son graduated,4,My son graduated today.,,\n";
  auto labels = default_label_space();
  auto result = parse_string(text, {.labels = &labels});

  REQUIRE(result.dialogues.size() == 3);
  const auto& d0 = result.dialogues[0];
  CHECK(d0.id == "hit:0_conv:1");
  CHECK(d0.situation == "My dog died, sadly");
  CHECK(d0.emotion_word == "sad");
  CHECK(d0.emotion_index == labels.find_emotion("sad"));
  REQUIRE(d0.utterances.size() == 2);
  CHECK(d0.utterances[0].raw_text == "He was old, but I miss him.");
  CHECK(d0.utterances[0].role == Role::Speaker);
  CHECK(d0.utterances[0].token_count == 7);
  CHECK(d0.utterances[0].sentences.size() == 1);
  CHECK(d0.utterances[1].role == Role::Listener);
  CHECK(d0.utterances[1].speaker_id == "0");
  CHECK(sentence_texts(d0.utterances[1].raw_text) == std::vector<std::string>{"Oh no!", "I'm sorry."});

  const auto& d1 = result.dialogues[1];
  REQUIRE(d1.utterances.size() == 3);
  CHECK(d1.utterances[2].turn_index == 3);
  CHECK(d1.utterances[2].role == Role::Speaker);

  CHECK(result.dialogues[2].utterances.size() == 1);
  REQUIRE(result.warnings.size() == 1);
  CHECK(result.warnings[0].kind == ParseWarning::Kind::SingleTurn);
  CHECK(result.warnings[0].dialogue_id == "hit:2_conv:5");
}

TEST_CASE("header-only input gives an empty corpus and no warnings") {
  auto result = parse_string(kHeader);
  CHECK(result.dialogues.empty());
  CHECK(result.warnings.empty());
  CHECK(parse_string("").dialogues.empty());
}

TEST_CASE("a malformed header is an input error") {
  CHECK_THROWS_AS(parse_string("id,turn,text\nx,1,y\n"), InputError);
  CHECK_THROWS_AS(parse_string("conv_id,utterance_idx,context,prompt,speaker,utterance\n"), InputError);
}

TEST_CASE("malformed rows are skipped with a warning") {
  auto result = parse_string(std::string(kHeader) + "a,1,sad,p,1,hi,,\na,x,sad,p,0,bad index,,\nshort,row\n");
  CHECK(result.dialogues.size() == 1);
  std::size_t malformed = 0;
  for (const auto& w : result.warnings) malformed += w.kind == ParseWarning::Kind::MalformedRow;
  CHECK(malformed == 2);
}

TEST_CASE("unknown emotions are kept with a warning") {
  auto labels = default_label_space();
  auto result = parse_string(std::string(kHeader) + "a,1,melancholic,p,1,hi,,\na,2,melancholic,p,0,oh,,\n",
                             {.labels = &labels});
  REQUIRE(result.dialogues.size() == 1);
  CHECK_FALSE(result.dialogues[0].emotion_index.has_value());
  REQUIRE(result.warnings.size() == 1);
  CHECK(result.warnings[0].kind == ParseWarning::Kind::UnknownEmotion);
}

TEST_CASE("strict mode drops dialogues with broken turn structure") {
  std::string text = std::string(kHeader) +
                     "gap,1,sad,p,1,a,,\ngap,3,sad,p,0,b,,\n"
                     "same,1,sad,p,1,a,,\nsame,2,sad,p,1,b,,\n"
                     "ok,1,sad,p,1,a,,\nok,2,sad,p,0,b,,\n";
  auto lenient = parse_string(text);
  CHECK(lenient.dialogues.size() == 3);
  CHECK(lenient.warnings.size() == 2);
  auto strict = parse_string(text, {.strict = true});
  REQUIRE(strict.dialogues.size() == 1);
  CHECK(strict.dialogues[0].id == "ok");
}

TEST_CASE("empty utterances are kept without sentences") {
  auto result = parse_string(std::string(kHeader) + "a,1,sad,p,1,hi,,\na,2,sad,p,0,  ,,\n");
  REQUIRE(result.dialogues.size() == 1);
  CHECK(result.dialogues[0].utterances[1].sentences.empty());
  REQUIRE(result.warnings.size() == 1);
  CHECK(result.warnings[0].kind == ParseWarning::Kind::EmptyUtterance);
}

TEST_CASE("comma escape round trip") {
  CHECK(unescape_field("a_comma_ b_comma_c") == "a, b,c");
  CHECK(escape_field("a, b,c") == "a_comma_ b_comma_c");
  CHECK(unescape_field(escape_field("x,,y")) == "x,,y");
}

TEST_CASE("sentence splitting examples") {
  CHECK(sentence_texts("oh no! That's scary! What do you think it is?") ==
        std::vector<std::string>{"oh no!", "That's scary!", "What do you think it is?"});
  CHECK(sentence_texts("Hello") == std::vector<std::string>{"Hello"});
  CHECK(sentence_texts("I saw Dr. Smith. He helped.") == std::vector<std::string>{"I saw Dr. Smith.", "He helped."});
  CHECK(sentence_texts("Fruit, e.g. apples, is good. Yes") ==
        std::vector<std::string>{"Fruit, e.g. apples, is good.", "Yes"});
  CHECK(sentence_texts("Really?! Wow...") == std::vector<std::string>{"Really?!", "Wow..."});
  CHECK(sentence_texts("He said \"stop.\" Then left.") ==
        std::vector<std::string>{"He said \"stop.\"", "Then left."});
  CHECK(sentence_texts("Pi is 3.14 today.") == std::vector<std::string>{"Pi is 3.14 today."});
  CHECK(sentence_texts("   ").empty());
  auto indexed = split_sentences("A. B. C.");
  REQUIRE(indexed.size() == 3);
  for (std::size_t i = 0; i < indexed.size(); ++i) CHECK(indexed[i].index == i);
}

TEST_CASE("sentences concatenate back to the whitespace-normalized input") {
  auto squash = [](std::string_view s) {
    std::string out;
    for (auto w : text::split_whitespace(s)) {
      if (!out.empty()) out += ' ';
      out += w;
    }
    return out;
  };
  Rng rng(42);
  for (int trial = 0; trial < 500; ++trial) {
    auto s = random_text(rng);
    std::string joined;
    for (const auto& piece : split_sentences(s)) {
      if (!joined.empty()) joined += ' ';
      joined += piece.text;
    }
    CHECK_MESSAGE(squash(joined) == squash(s), s);
  }
}

TEST_CASE("fixture statistics match the independent count") {
  auto result = parse_corpus_file(test_support::fixture("fixture25.csv"));
  auto stats = corpus_stats(result.dialogues);
  CHECK(stats.dialogue_count == 25);
  CHECK(stats.turn_count == 92);
  CHECK(stats.avg_turns_per_dialogue == doctest::Approx(3.68).epsilon(1e-12));
  CHECK(stats.max_turns == 8);
  CHECK(stats.max_turns_dialogues == 1);
  CHECK(stats.min_turns == 1);
  CHECK(stats.min_turns_dialogues == 2);
  CHECK(stats.speaker_turns == 50);
  CHECK(stats.listener_turns == 42);
  CHECK(stats.avg_speaker_tokens == doctest::Approx(396.0 / 50.0).epsilon(1e-12));
  CHECK(stats.avg_listener_tokens == doctest::Approx(287.0 / 42.0).epsilon(1e-12));
  CHECK(stats.turn_histogram == std::map<std::size_t, std::size_t>{{1, 2}, {2, 4}, {3, 5}, {4, 9}, {5, 1}, {6, 3}, {8, 1}});
  CHECK(stats.fraction_up_to_4_turns == doctest::Approx(0.8).epsilon(1e-12));

  const auto& afraid = result.dialogues[0];
  CHECK(afraid.emotion_word == "afraid");
  CHECK(afraid.utterances[2].raw_text == "I don't know, that's what's making me anxious.");
}

TEST_CASE("single four-turn dialogue statistics") {
  std::vector<Dialogue> corpus{test_support::make_dialogue("a", "sad", {"one two three", "four", "five six", "seven"})};
  auto stats = corpus_stats(corpus);
  CHECK(stats.dialogue_count == 1);
  CHECK(stats.turn_count == 4);
  CHECK(stats.speaker_turns == 2);
  CHECK(stats.listener_turns == 2);
  CHECK(stats.avg_speaker_tokens == doctest::Approx(2.5));
  CHECK(stats.avg_listener_tokens == doctest::Approx(1.0));
  CHECK(stats.min_turns == 4);
  CHECK(stats.max_turns == 4);
}

TEST_CASE("statistics of an empty corpus are an input error") {
  std::vector<Dialogue> none;
  CHECK_THROWS_AS(corpus_stats(none), InputError);
}

TEST_CASE("statistics invariants hold on synthetic corpora for any worker count") {
  auto labels = default_label_space();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto corpus = synthetic::make_corpus(labels, {.dialogues = 150, .seed = seed});
    auto base = corpus_stats(corpus, 1);
    std::size_t hist_total = 0;
    for (const auto& [turns, count] : base.turn_histogram) hist_total += count;
    CHECK(hist_total == base.dialogue_count);
    CHECK(base.speaker_turns + base.listener_turns == base.turn_count);
    CHECK(base.avg_turns_per_dialogue >= static_cast<double>(base.min_turns));
    CHECK(base.avg_turns_per_dialogue <= static_cast<double>(base.max_turns));
    for (int workers : {2, 3, 8}) {
      auto other = corpus_stats(corpus, workers);
      CHECK(to_json(other) == to_json(base));
    }
  }
}

TEST_CASE("stats JSON round trip") {
  auto result = parse_corpus_file(test_support::fixture("fixture25.csv"));
  auto stats = corpus_stats(result.dialogues);
  auto doc = to_json(stats);
  CHECK(doc["dialogues"] == 25);
  CHECK(doc["turn_histogram"]["8"] == 1);
  CHECK(to_json(stats_from_json(doc)) == doc);
}

TEST_CASE("write then parse reproduces the corpus") {
  auto labels = default_label_space();
  auto fixture = parse_corpus_file(test_support::fixture("fixture25.csv"), {.labels = &labels}).dialogues;
  auto synthetic_corpus = synthetic::make_corpus(labels, {.dialogues = 60, .seed = 9});
  for (const auto* corpus : {&fixture, &synthetic_corpus}) {
    std::ostringstream out;
    write_corpus(out, *corpus);
    std::istringstream in(out.str());
    auto reparsed = parse_corpus(in, {.labels = &labels});
    CHECK(reparsed.dialogues == *corpus);
  }
}

TEST_CASE("multiple files concatenate in order") {
  std::vector<std::string> paths{test_support::fixture("fixture25.csv"), test_support::fixture("fixture25.csv")};
  auto both = parse_corpus_files(paths);
  REQUIRE(both.dialogues.size() == 50);
  CHECK(both.dialogues[25] == both.dialogues[0]);
  CHECK_THROWS_AS(parse_corpus_file(test_support::fixture("nope.csv")), InputError);
}
