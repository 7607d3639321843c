#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace empdialog {

class LabelSpace;

enum class Role { Speaker, Listener };

inline Role role_for_turn(int turn_index) { return turn_index % 2 == 1 ? Role::Speaker : Role::Listener; }

struct Sentence {
  std::string text;
  std::size_t index = 0;

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct Utterance {
  Role role = Role::Speaker;
  int turn_index = 1;
  std::string speaker_id;
  std::string raw_text;
  std::vector<Sentence> sentences;
  std::size_t token_count = 0;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Dialogue {
  std::string id;
  std::string situation;
  std::string emotion_word;                  // raw context column
  std::optional<std::size_t> emotion_index;  // into LabelSpace, unset if unknown
  std::vector<Utterance> utterances;

  friend bool operator==(const Dialogue&, const Dialogue&) = default;
};

struct ParseWarning {
  enum class Kind { MalformedRow, UnknownEmotion, NonContiguousTurns, RoleAlternation, SingleTurn, EmptyUtterance };
  Kind kind;
  std::string dialogue_id;
  std::size_t line = 0;
  std::string message;
};

struct ParseOptions {
  /// Drop dialogues that fail turn contiguity or alternation checks.
  bool strict = false;
  /// Validate the context column against this label space when set.
  const LabelSpace* labels = nullptr;
};

struct ParseResult {
  std::vector<Dialogue> dialogues;
  std::vector<ParseWarning> warnings;
};

inline constexpr std::string_view kCommaEscape = "_comma_";

std::string unescape_field(std::string_view field);
std::string escape_field(std::string_view field);

/// Parse the delimited dataset layout:
/// conv_id,utterance_idx,context,prompt,speaker_idx,utterance[,metadata...]
/// Throws InputError on a malformed header.
ParseResult parse_corpus(std::istream& in, const ParseOptions& options = {});
ParseResult parse_corpus_file(const std::string& path, const ParseOptions& options = {});
/// Concatenate several files, preserving file order.
ParseResult parse_corpus_files(std::span<const std::string> paths, const ParseOptions& options = {});

/// Inverse of parse_corpus (metadata columns are written empty).
void write_corpus(std::ostream& out, std::span<const Dialogue> dialogues);

/// Rule-based splitter: breaks after runs of '.', '!' or '?' followed by
/// whitespace or end of text. Abbreviations in a guard list do not break.
std::vector<Sentence> split_sentences(std::string_view text);

std::size_t whitespace_token_count(std::string_view text);

struct StatsReport {
  std::size_t dialogue_count = 0;
  std::size_t turn_count = 0;
  double avg_turns_per_dialogue = 0.0;
  std::size_t max_turns = 0;
  std::size_t max_turns_dialogues = 0;
  std::size_t min_turns = 0;
  std::size_t min_turns_dialogues = 0;
  std::size_t speaker_turns = 0;
  std::size_t listener_turns = 0;
  double avg_speaker_tokens = 0.0;
  double avg_listener_tokens = 0.0;
  std::map<std::size_t, std::size_t> turn_histogram;  // turns -> dialogues
  double fraction_up_to_4_turns = 0.0;
};

/// Throws InputError("empty corpus") on an empty list.
StatsReport corpus_stats(std::span<const Dialogue> dialogues, int workers = 1);

nlohmann::json to_json(const StatsReport& report);
StatsReport stats_from_json(const nlohmann::json& doc);

}  // namespace empdialog
