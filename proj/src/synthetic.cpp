#include "empdialog/synthetic.hpp"

#include <array>
#include <string>

#include "empdialog/error.hpp"
#include "empdialog/random.hpp"

namespace empdialog::synthetic {

namespace {

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& items, Rng& rng) {
  return items[rng.below(N)];
}

constexpr std::array<std::string_view, 8> kEvents{
    "my sister called about the house",   "I got the results from work",
    "the neighbors had a party",          "my dog ran off in the park",
    "we drove to see my grandparents",    "I finished the project at the office",
    "the car broke down on the highway",  "my friend told me the news"};

constexpr std::array<std::string_view, 4> kQuestioning{"What happened after that?", "Why do you think that is?",
                                                      "How did you handle it?", "Did you tell anyone about it?"};
constexpr std::array<std::string_view, 3> kAcknowledging{"That sounds really intense.", "I see what you mean.",
                                                        "That would be hard for anyone."};
constexpr std::array<std::string_view, 3> kAgreeing{"I completely understand.", "Me too, honestly.",
                                                    "You're right about that."};
constexpr std::array<std::string_view, 3> kConsoling{"Cheer up, it will get easier.", "Hopefully it will pass soon.",
                                                     "I hope things will improve."};
constexpr std::array<std::string_view, 3> kEncouraging{"I bet you will do great.", "Hopefully it will go well.",
                                                       "I hope it works out for you."};
constexpr std::array<std::string_view, 2> kSympathizing{"I'm sorry to hear that.", "Oh no, that is awful."};
constexpr std::array<std::string_view, 2> kWishing{"Congratulations on that!", "Good luck with everything."};
constexpr std::array<std::string_view, 2> kSuggesting{"Maybe you should talk to someone.",
                                                      "Perhaps a break would help."};
// Composed into situations so that dedup keeps many distinct rows per emotion.
constexpr std::array<std::string_view, 6> kWhen{"last week", "yesterday", "over the weekend",
                                                "this morning", "a few days ago", "on my birthday"};
// Appended before the final punctuation; none of these appear in any pattern.
constexpr std::array<std::string_view, 10> kVocatives{"Sam",  "Alex", "Jo",    "Pat",   "Kim",
                                                      "Lee",  "Max",  "Ray",   "buddy", "mate"};

std::string with_vocative(std::string_view sentence, Rng& rng) {
  std::string s(sentence);
  if (rng.below(2) == 0) return s;
  auto last = s.find_last_not_of(".!?");
  s.insert(last + 1, ", " + std::string(pick(kVocatives, rng)));
  return s;
}

constexpr std::array<std::string_view, 3> kFiller{"That is quite the story", "Well that is something",
                                                  "Life can be like that"};

std::string listener_turn(Valence valence, Rng& rng) {
  std::string out;
  auto add = [&](std::string_view s) {
    if (!out.empty()) out.push_back(' ');
    out.append(with_vocative(s, rng));
  };
  // Mix of one- and two-sentence responses.
  const auto sentences = 1 + rng.below(2);
  for (std::size_t s = 0; s < sentences; ++s) {
    switch (rng.below(7)) {
      case 0:
      case 1:
        add(pick(kQuestioning, rng));
        break;
      case 2:
        add(pick(kAcknowledging, rng));
        break;
      case 3:
        add(pick(kAgreeing, rng));
        break;
      case 4:
        add(valence == Valence::Negative ? pick(kConsoling, rng) : pick(kEncouraging, rng));
        break;
      case 5:
        add(valence == Valence::Negative ? pick(kSympathizing, rng) : pick(kWishing, rng));
        break;
      default:
        add(rng.below(3) == 0 ? pick(kFiller, rng) : pick(kSuggesting, rng));
        break;
    }
  }
  return out;
}

}  // namespace

std::vector<Dialogue> make_corpus(const LabelSpace& labels, const CorpusOptions& options) {
  if (labels.emotion_count() == 0) throw InputError("synthetic corpus needs at least one emotion");
  if (options.min_turns < 1 || options.max_turns < options.min_turns) throw InputError("bad synthetic turn range");
  Rng rng(options.seed);
  std::vector<Dialogue> out;
  out.reserve(options.dialogues);
  for (std::size_t i = 0; i < options.dialogues; ++i) {
    Dialogue d;
    d.id = "hit:" + std::to_string(i) + "_conv:" + std::to_string(2 * i);
    const auto e = static_cast<std::size_t>(rng.below(labels.emotion_count()));
    const auto& emotion = labels.emotions()[e];
    d.emotion_index = e;
    d.emotion_word = emotion.name;
    d.situation = "I felt " + emotion.name + " when " + std::string(pick(kEvents, rng)) + " " + std::string(pick(kWhen, rng)) +
                  ", it was a lot";
    const auto span = options.max_turns - options.min_turns + 1;
    const auto turns = options.min_turns + static_cast<std::size_t>(rng.below(span));
    for (std::size_t t = 1; t <= turns; ++t) {
      Utterance u;
      u.turn_index = static_cast<int>(t);
      u.role = role_for_turn(u.turn_index);
      u.speaker_id = u.role == Role::Speaker ? "1" : "0";
      if (u.role == Role::Speaker) {
        u.raw_text = t == 1 ? "Honestly I was so " + emotion.name + " when " + std::string(pick(kEvents, rng)) + "."
                            : "Yes, I still feel " + emotion.name + " about it. It has been a long week.";
      } else {
        u.raw_text = listener_turn(emotion.valence, rng);
      }
      u.sentences = split_sentences(u.raw_text);
      u.token_count = whitespace_token_count(u.raw_text);
      d.utterances.push_back(std::move(u));
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace empdialog::synthetic
