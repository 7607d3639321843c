#include "empdialog/corpus.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include <omp.h>

#include "empdialog/error.hpp"
#include "empdialog/taxonomy.hpp"
#include "empdialog/text.hpp"

namespace empdialog {

namespace {

constexpr std::array<std::string_view, 6> kColumns{"conv_id", "utterance_idx", "context",
                                                   "prompt",  "speaker_idx",   "utterance"};

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

void strip_line_end(std::string& line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
}

struct Row {
  int turn = 0;
  std::string speaker_id;
  std::string text;
  std::size_t line = 0;
};

struct PendingDialogue {
  std::string id;
  std::string context;
  std::string prompt;
  std::size_t first_line = 0;
  std::vector<Row> rows;
};

const std::array<std::string_view, 6> kAbbreviations{"mr.", "mrs.", "ms.", "dr.", "e.g.", "i.e."};
const std::array<std::string_view, 5> kMoreAbbreviations{"prof.", "st.", "jr.", "sr.", "vs."};

bool is_sentence_punct(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool guarded_abbreviation(std::string_view text, std::size_t run_begin, std::size_t run_end) {
  if (run_end - run_begin != 1 || text[run_begin] != '.') return false;
  std::size_t word_begin = run_begin;
  while (word_begin > 0 && !is_space(text[word_begin - 1])) --word_begin;
  auto word = text::normalize(text.substr(word_begin, run_end - word_begin));
  auto hit = [&](auto const& list) { return std::find(list.begin(), list.end(), word) != list.end(); };
  return hit(kAbbreviations) || hit(kMoreAbbreviations);
}

Dialogue build_dialogue(PendingDialogue&& pending, const ParseOptions& options, std::vector<ParseWarning>& warnings,
                        bool& keep) {
  Dialogue d;
  d.id = std::move(pending.id);
  d.situation = unescape_field(pending.prompt);
  d.emotion_word = pending.context;
  keep = true;
  auto warn = [&](ParseWarning::Kind kind, std::size_t line, std::string msg) {
    warnings.push_back({kind, d.id, line, std::move(msg)});
  };

  if (options.labels != nullptr) {
    d.emotion_index = options.labels->find_emotion(d.emotion_word);
    if (!d.emotion_index) warn(ParseWarning::Kind::UnknownEmotion, pending.first_line, "unknown emotion '" + d.emotion_word + "'");
  }

  bool contiguous = true;
  for (std::size_t i = 0; i < pending.rows.size(); ++i) {
    if (pending.rows[i].turn != static_cast<int>(i) + 1) contiguous = false;
  }
  if (!contiguous) {
    warn(ParseWarning::Kind::NonContiguousTurns, pending.first_line, "utterance_idx values are not 1..n in order");
    if (options.strict) keep = false;
  }

  // Odd turns come from one worker, even turns from another.
  bool alternates = true;
  for (std::size_t i = 2; i < pending.rows.size(); ++i) {
    if (pending.rows[i].speaker_id != pending.rows[i - 2].speaker_id) alternates = false;
  }
  if (pending.rows.size() >= 2 && pending.rows[0].speaker_id == pending.rows[1].speaker_id) alternates = false;
  if (!alternates) {
    warn(ParseWarning::Kind::RoleAlternation, pending.first_line, "speaker ids do not alternate");
    if (options.strict) keep = false;
  }
  if (pending.rows.size() == 1) {
    warn(ParseWarning::Kind::SingleTurn, pending.first_line, "dialogue has a single turn and no listener");
    if (options.strict) keep = false;
  }

  for (auto& row : pending.rows) {
    Utterance u;
    u.turn_index = row.turn;
    u.role = role_for_turn(row.turn);
    u.speaker_id = std::move(row.speaker_id);
    u.raw_text = unescape_field(row.text);
    u.token_count = whitespace_token_count(u.raw_text);
    if (text::trim(u.raw_text).empty()) {
      warn(ParseWarning::Kind::EmptyUtterance, row.line, "empty utterance");
    } else {
      u.sentences = split_sentences(u.raw_text);
    }
    d.utterances.push_back(std::move(u));
  }
  return d;
}

}  // namespace

std::string unescape_field(std::string_view field) {
  std::string out;
  out.reserve(field.size());
  std::size_t i = 0;
  while (i < field.size()) {
    if (field.compare(i, kCommaEscape.size(), kCommaEscape) == 0) {
      out.push_back(',');
      i += kCommaEscape.size();
    } else {
      out.push_back(field[i++]);
    }
  }
  return out;
}

std::string escape_field(std::string_view field) {
  std::string out;
  out.reserve(field.size());
  for (char c : field) {
    if (c == ',') {
      out.append(kCommaEscape);
    } else {
      out.push_back(c);
    }
  }
  return out;
}

ParseResult parse_corpus(std::istream& in, const ParseOptions& options) {
  ParseResult result;
  std::string line;
  if (!std::getline(in, line)) return result;
  strip_line_end(line);
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  auto header = split_commas(line);
  if (header.size() < kColumns.size()) throw InputError("malformed header: expected " + std::string(kColumns[0]) + ",...");
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    if (text::trim(header[i]) != kColumns[i]) {
      throw InputError("malformed header: column " + std::to_string(i + 1) + " is '" + std::string(header[i]) +
                       "', expected '" + std::string(kColumns[i]) + "'");
    }
  }

  std::vector<PendingDialogue> pending;
  std::unordered_map<std::string, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_line_end(line);
    if (text::trim(line).empty()) continue;
    auto fields = split_commas(line);
    int turn = 0;
    bool ok = fields.size() >= kColumns.size();
    if (ok) {
      auto idx = text::trim(fields[1]);
      auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), turn);
      ok = ec == std::errc() && ptr == idx.data() + idx.size() && turn >= 1;
    }
    if (!ok) {
      result.warnings.push_back({ParseWarning::Kind::MalformedRow, fields.empty() ? "" : std::string(fields[0]),
                                 line_no, "malformed row skipped"});
      continue;
    }
    std::string id(fields[0]);
    auto [it, inserted] = index.emplace(id, pending.size());
    if (inserted) {
      PendingDialogue p;
      p.id = id;
      p.context = std::string(fields[2]);
      p.prompt = std::string(fields[3]);
      p.first_line = line_no;
      pending.push_back(std::move(p));
    }
    pending[it->second].rows.push_back({turn, std::string(fields[4]), std::string(fields[5]), line_no});
  }

  for (auto& p : pending) {
    bool keep = true;
    auto d = build_dialogue(std::move(p), options, result.warnings, keep);
    if (keep) result.dialogues.push_back(std::move(d));
  }
  return result;
}

ParseResult parse_corpus_file(const std::string& path, const ParseOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open corpus file: " + path);
  return parse_corpus(in, options);
}

ParseResult parse_corpus_files(std::span<const std::string> paths, const ParseOptions& options) {
  ParseResult all;
  for (const auto& path : paths) {
    auto part = parse_corpus_file(path, options);
    std::move(part.dialogues.begin(), part.dialogues.end(), std::back_inserter(all.dialogues));
    std::move(part.warnings.begin(), part.warnings.end(), std::back_inserter(all.warnings));
  }
  return all;
}

void write_corpus(std::ostream& out, std::span<const Dialogue> dialogues) {
  out << "conv_id,utterance_idx,context,prompt,speaker_idx,utterance,selfeval,tags\n";
  for (const auto& d : dialogues) {
    for (const auto& u : d.utterances) {
      out << d.id << ',' << u.turn_index << ',' << d.emotion_word << ',' << escape_field(d.situation) << ','
          << u.speaker_id << ',' << escape_field(u.raw_text) << ",,\n";
    }
  }
}

std::vector<Sentence> split_sentences(std::string_view text) {
  std::vector<Sentence> out;
  auto emit = [&](std::string_view piece) {
    auto t = text::trim(piece);
    if (!t.empty()) out.push_back({std::string(t), out.size()});
  };
  std::size_t start = 0;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (!is_sentence_punct(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && is_sentence_punct(text[j])) ++j;
    std::size_t run_end = j;
    while (j < n && (text[j] == '"' || text[j] == '\'' || text[j] == ')')) ++j;
    if ((j == n || is_space(text[j])) && !guarded_abbreviation(text, i, run_end)) {
      emit(text.substr(start, j - start));
      start = j;
    }
    i = j;
  }
  emit(text.substr(start));
  return out;
}

std::size_t whitespace_token_count(std::string_view s) { return text::split_whitespace(s).size(); }

StatsReport corpus_stats(std::span<const Dialogue> dialogues, int workers) {
  if (dialogues.empty()) throw InputError("empty corpus");
  const auto n = static_cast<std::int64_t>(dialogues.size());
  std::size_t turns = 0, speaker_turns = 0, listener_turns = 0;
  std::size_t speaker_tokens = 0, listener_tokens = 0;

#pragma omp parallel for num_threads(workers) schedule(static) \
    reduction(+ : turns, speaker_turns, listener_turns, speaker_tokens, listener_tokens)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& d = dialogues[static_cast<std::size_t>(i)];
    turns += d.utterances.size();
    for (const auto& u : d.utterances) {
      if (u.role == Role::Speaker) {
        ++speaker_turns;
        speaker_tokens += u.token_count;
      } else {
        ++listener_turns;
        listener_tokens += u.token_count;
      }
    }
  }

  StatsReport r;
  r.dialogue_count = dialogues.size();
  r.turn_count = turns;
  r.speaker_turns = speaker_turns;
  r.listener_turns = listener_turns;
  r.avg_turns_per_dialogue = static_cast<double>(turns) / static_cast<double>(r.dialogue_count);
  r.avg_speaker_tokens = speaker_turns ? static_cast<double>(speaker_tokens) / static_cast<double>(speaker_turns) : 0.0;
  r.avg_listener_tokens =
      listener_turns ? static_cast<double>(listener_tokens) / static_cast<double>(listener_turns) : 0.0;
  std::size_t up_to_4 = 0;
  for (const auto& d : dialogues) {
    ++r.turn_histogram[d.utterances.size()];
    if (d.utterances.size() <= 4) ++up_to_4;
  }
  r.min_turns = r.turn_histogram.begin()->first;
  r.min_turns_dialogues = r.turn_histogram.begin()->second;
  r.max_turns = r.turn_histogram.rbegin()->first;
  r.max_turns_dialogues = r.turn_histogram.rbegin()->second;
  r.fraction_up_to_4_turns = static_cast<double>(up_to_4) / static_cast<double>(r.dialogue_count);
  return r;
}

nlohmann::json to_json(const StatsReport& r) {
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [turns, count] : r.turn_histogram) hist[std::to_string(turns)] = count;
  return {
      {"dialogues", r.dialogue_count},
      {"turns", r.turn_count},
      {"avg_turns_per_dialogue", r.avg_turns_per_dialogue},
      {"max_turns", r.max_turns},
      {"max_turns_dialogues", r.max_turns_dialogues},
      {"min_turns", r.min_turns},
      {"min_turns_dialogues", r.min_turns_dialogues},
      {"speaker_turns", r.speaker_turns},
      {"listener_turns", r.listener_turns},
      {"avg_speaker_tokens_per_turn", r.avg_speaker_tokens},
      {"avg_listener_tokens_per_turn", r.avg_listener_tokens},
      {"turn_histogram", hist},
      {"fraction_dialogues_up_to_4_turns", r.fraction_up_to_4_turns},
  };
}

StatsReport stats_from_json(const nlohmann::json& doc) {
  StatsReport r;
  try {
    r.dialogue_count = doc.at("dialogues").get<std::size_t>();
    r.turn_count = doc.at("turns").get<std::size_t>();
    r.avg_turns_per_dialogue = doc.at("avg_turns_per_dialogue").get<double>();
    r.max_turns = doc.at("max_turns").get<std::size_t>();
    r.max_turns_dialogues = doc.at("max_turns_dialogues").get<std::size_t>();
    r.min_turns = doc.at("min_turns").get<std::size_t>();
    r.min_turns_dialogues = doc.at("min_turns_dialogues").get<std::size_t>();
    r.speaker_turns = doc.at("speaker_turns").get<std::size_t>();
    r.listener_turns = doc.at("listener_turns").get<std::size_t>();
    r.avg_speaker_tokens = doc.at("avg_speaker_tokens_per_turn").get<double>();
    r.avg_listener_tokens = doc.at("avg_listener_tokens_per_turn").get<double>();
    for (const auto& [k, v] : doc.at("turn_histogram").items()) r.turn_histogram[std::stoul(k)] = v.get<std::size_t>();
    r.fraction_up_to_4_turns = doc.at("fraction_dialogues_up_to_4_turns").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("stats document: ") + e.what());
  }
  return r;
}

}  // namespace empdialog
