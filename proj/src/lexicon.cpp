#include "empdialog/lexicon.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "empdialog/error.hpp"
#include "empdialog/random.hpp"
#include "empdialog/text.hpp"

namespace empdialog {

namespace {

using Kind = PatternElement::Kind;

bool is_end_marker(Kind k) { return k == Kind::QuestionEnd || k == Kind::ExclaimEnd; }

std::string strip_comment_prefix(std::string_view line) {
  auto t = text::trim(line);
  while (!t.empty() && t.front() == '#') t.remove_prefix(1);
  return std::string(text::trim(t));
}

GapPattern compile_line(std::string_view line, Intent intent, std::size_t line_no) {
  GapPattern p;
  p.intent = intent;
  p.source = std::string(text::trim(line));
  auto fail = [&](const std::string& why) {
    throw InputError("pattern line " + std::to_string(line_no) + " ('" + p.source + "'): " + why);
  };
  auto words = text::split_whitespace(line);
  if (words.empty()) fail("empty pattern");
  std::vector<PatternElement> elements;
  for (std::size_t w = 0; w < words.size(); ++w) {
    auto word = words[w];
    bool last = w + 1 == words.size();
    if (word == "...") {
      if (!elements.empty() && elements.back().kind == Kind::Gap) fail("consecutive gaps");
      elements.push_back({Kind::Gap, {}});
    } else if (last && (word == "?" || word == "!")) {
      elements.push_back({word == "?" ? Kind::QuestionEnd : Kind::ExclaimEnd, {}});
    } else {
      for (auto& tok : text::tokenize(text::normalize(word))) {
        if (tok == "\"") continue;
        elements.push_back({Kind::Literal, std::move(tok)});
      }
    }
  }
  std::size_t literals = 0;
  for (const auto& e : elements) literals += e.kind == Kind::Literal ? 1 : 0;
  if (literals == 0) fail("pattern needs at least one literal token");
  if (elements.front().kind == Kind::Gap) fail("pattern cannot start with a gap");
  if (elements.back().kind == Kind::Gap) fail("pattern cannot end with a gap unless followed by ? or !");
  if (intent == Intent::Questioning && elements.back().kind == Kind::QuestionEnd) {
    elements.insert(elements.begin(), PatternElement{Kind::SentenceStart, {}});
  }
  p.elements = std::move(elements);
  p.specificity = literals;
  return p;
}

struct SentenceView {
  std::span<const std::string> tokens;
  std::size_t end_run = 0;  // first index of the trailing . ! ? run
  std::size_t first_word = 0;
  bool question = false;
  bool exclaim = false;
};

SentenceView view_of(std::span<const std::string> tokens) {
  SentenceView v;
  v.tokens = tokens;
  v.end_run = tokens.size();
  while (v.end_run > 0 && text::is_terminal_punct(tokens[v.end_run - 1])) {
    --v.end_run;
    if (tokens[v.end_run] == "?") v.question = true;
    if (tokens[v.end_run] == "!") v.exclaim = true;
  }
  while (v.first_word < tokens.size() && tokens[v.first_word].size() == 1 &&
         std::ispunct(static_cast<unsigned char>(tokens[v.first_word][0]))) {
    ++v.first_word;
  }
  return v;
}

// Returns the end position of a match of elements[e..] starting at pos.
std::optional<std::size_t> match_from(const std::vector<PatternElement>& elements, std::size_t e, std::size_t pos,
                                      const SentenceView& s, std::size_t max_gap) {
  if (e == elements.size()) return pos;
  const auto& el = elements[e];
  switch (el.kind) {
    case Kind::Literal:
      if (pos < s.tokens.size() && s.tokens[pos] == el.token) return match_from(elements, e + 1, pos + 1, s, max_gap);
      return std::nullopt;
    case Kind::Gap: {
      if (e + 1 < elements.size() && is_end_marker(elements[e + 1].kind)) {
        // A gap before the final marker runs to the end of the sentence.
        if (s.end_run > pos) return match_from(elements, e + 1, s.end_run, s, max_gap);
        return std::nullopt;
      }
      for (std::size_t g = 1; g <= max_gap && pos + g <= s.tokens.size(); ++g) {
        if (auto end = match_from(elements, e + 1, pos + g, s, max_gap)) return end;
      }
      return std::nullopt;
    }
    case Kind::QuestionEnd:
      if (pos == s.end_run && s.question) return s.tokens.size();
      return std::nullopt;
    case Kind::ExclaimEnd:
      if (pos == s.end_run && s.exclaim) return s.tokens.size();
      return std::nullopt;
    case Kind::SentenceStart:
      return match_from(elements, e + 1, pos, s, max_gap);
  }
  return std::nullopt;
}

std::optional<std::pair<std::size_t, std::size_t>> find_match(const GapPattern& p, const SentenceView& s,
                                                              std::size_t max_gap) {
  bool anchored = !p.elements.empty() && p.elements.front().kind == Kind::SentenceStart;
  for (std::size_t start = 0; start < s.tokens.size(); ++start) {
    // The start anchor is waived when the sentence is a question.
    if (anchored && start != s.first_word && !s.question) continue;
    if (auto end = match_from(p.elements, 0, start, s, max_gap)) return std::make_pair(start, *end);
  }
  return std::nullopt;
}

Intent resolve_shared(Valence context) { return context == Valence::Negative ? Intent::Consoling : Intent::Encouraging; }

std::string format_confidence(double c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", c);
  return buf;
}

}  // namespace

PatternSet::PatternSet(std::vector<GapPattern> patterns, MatchOptions options)
    : patterns_(std::move(patterns)), options_(options) {
  if (options_.max_gap == 0) throw InputError("max gap must be at least 1");
  for (std::size_t i = 0; i < patterns_.size(); ++i) patterns_[i].order = i;
  // Identical element sequences under encouraging and consoling share a
  // valence-resolved identity.
  std::map<std::vector<PatternElement>, std::set<Intent>> owners;
  for (const auto& p : patterns_) owners[p.elements].insert(p.intent);
  for (auto& p : patterns_) {
    const auto& o = owners[p.elements];
    p.valence_shared = o.contains(Intent::Encouraging) && o.contains(Intent::Consoling);
  }
}

PatternSet compile_patterns(std::string_view source, MatchOptions options) {
  std::vector<GapPattern> patterns;
  std::optional<Intent> current;
  std::istringstream in{std::string(source)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    if (trimmed.front() == '#') {
      auto body = strip_comment_prefix(trimmed);
      if (body.starts_with("intent:")) {
        auto name = std::string(text::trim(std::string_view(body).substr(7)));
        current = intent_from_name(name);
        if (!current) throw InputError("pattern line " + std::to_string(line_no) + ": unknown intent '" + name + "'");
      }
      continue;
    }
    if (!current) throw InputError("pattern line " + std::to_string(line_no) + ": pattern before any intent header");
    patterns.push_back(compile_line(trimmed, *current, line_no));
  }
  return PatternSet(std::move(patterns), options);
}

PatternSet compile_patterns_file(const std::string& path, MatchOptions options) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open pattern file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return compile_patterns(ss.str(), options);
}

std::vector<MatchResult> match_tokens(const PatternSet& patterns, std::span<const std::string> tokens) {
  std::vector<MatchResult> out;
  auto view = view_of(tokens);
  for (const auto& p : patterns.patterns()) {
    if (auto span = find_match(p, view, patterns.options().max_gap)) {
      out.push_back({p.intent, &p, span->first, span->second, false});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const MatchResult& a, const MatchResult& b) {
    if (a.pattern->specificity != b.pattern->specificity) return a.pattern->specificity > b.pattern->specificity;
    return a.pattern->order < b.pattern->order;
  });
  return out;
}

std::vector<MatchResult> match_sentence(const PatternSet& patterns, std::string_view sentence) {
  auto tokens = text::tokenize(text::normalize(sentence));
  return match_tokens(patterns, tokens);
}

std::optional<TagDecision> decide_intent(const std::vector<MatchResult>& matches, Valence context) {
  if (matches.empty()) return std::nullopt;
  const auto top = matches.front().pattern->specificity;
  std::optional<TagDecision> decision;
  std::set<Intent> intents;
  for (const auto& m : matches) {
    if (m.pattern->specificity != top) break;
    MatchResult resolved = m;
    if (m.pattern->valence_shared) {
      resolved.intent = resolve_shared(context);
      resolved.via_valence = context != Valence::None;
    }
    intents.insert(resolved.intent);
    if (!decision) decision = TagDecision{resolved, false};
  }
  decision->ambiguous = intents.size() > 1;
  return decision;
}

std::optional<Annotation> tag_listener_sentence(const PatternSet& patterns, std::string_view sentence,
                                                Valence context) {
  auto decision = decide_intent(match_sentence(patterns, sentence), context);
  if (!decision) return std::nullopt;
  Annotation a;
  a.label = Label::intent(decision->match.intent);
  a.confidence = 1.0;
  a.source = AnnotationSource::Lexicon;
  return a;
}

std::string_view source_name(AnnotationSource s) {
  switch (s) {
    case AnnotationSource::Lexicon:
      return "lexicon";
    case AnnotationSource::Model:
      return "model";
    case AnnotationSource::Manual:
      break;
  }
  return "manual";
}

std::optional<AnnotationSource> source_from_name(std::string_view name) {
  if (name == "lexicon") return AnnotationSource::Lexicon;
  if (name == "model") return AnnotationSource::Model;
  if (name == "manual") return AnnotationSource::Manual;
  return std::nullopt;
}

void write_annotations(std::ostream& out, std::span<const Annotation> rows, const LabelSpace& labels) {
  out << "dialogue_id,turn,sentence,label,confidence,source\n";
  for (const auto& a : rows) {
    // Dialogue ids never contain commas in the dataset layout.
    out << a.dialogue_id << ',' << a.turn_index << ',' << a.sentence_index << ',' << labels.name(a.label) << ','
        << format_confidence(a.confidence) << ',' << source_name(a.source) << '\n';
  }
}

std::vector<Annotation> read_annotations(std::istream& in, const LabelSpace& labels) {
  std::vector<Annotation> rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "dialogue_id,turn,sentence,label,confidence,source") throw InputError("annotation file: bad header");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    auto bad = [&](const std::string& why) {
      throw InputError("annotation file line " + std::to_string(line_no) + ": " + why);
    };
    if (f.size() != 6) bad("expected 6 columns");
    Annotation a;
    a.dialogue_id = f[0];
    try {
      a.turn_index = std::stoi(f[1]);
      a.sentence_index = std::stoul(f[2]);
      a.confidence = std::stod(f[4]);
    } catch (const std::exception&) {
      bad("bad number");
    }
    auto label = labels.parse(f[3]);
    if (!label) bad("unknown label '" + f[3] + "'");
    a.label = *label;
    auto source = source_from_name(f[5]);
    if (!source) bad("unknown source '" + f[5] + "'");
    a.source = *source;
    rows.push_back(std::move(a));
  }
  return rows;
}

std::vector<LabeledText> bootstrap_training_set(std::span<const Dialogue> corpus, const PatternSet& patterns,
                                                const LabelSpace& labels, const BootstrapOptions& options) {
  std::vector<std::vector<LabeledText>> per_class(labels.class_count());
  std::set<std::pair<std::size_t, std::string>> seen;
  auto add = [&](std::string text, Label label) {
    auto id = labels.class_id(label);
    if (seen.emplace(id, text::normalize(text)).second) per_class[id].push_back({std::move(text), label});
  };
  for (const auto& d : corpus) {
    if (d.emotion_index && !text::trim(d.situation).empty()) {
      add(std::string(text::trim(d.situation)), Label::emotion(*d.emotion_index));
    }
    Valence context = d.emotion_index ? labels.emotions()[*d.emotion_index].valence : Valence::None;
    for (const auto& u : d.utterances) {
      if (u.role != Role::Listener) continue;
      for (const auto& s : u.sentences) {
        auto decision = decide_intent(match_sentence(patterns, s.text), context);
        if (!decision || decision->ambiguous) continue;
        add(s.text, Label::intent(decision->match.intent));
      }
    }
  }

  std::vector<std::string> starved;
  for (std::size_t id = 0; id + 1 < labels.class_count(); ++id) {
    if (per_class[id].empty()) starved.push_back(labels.class_name(id));
  }
  if (!starved.empty()) {
    std::string msg = "bootstrap produced no examples for:";
    for (const auto& s : starved) msg += " " + s;
    throw InputError(msg);
  }

  Rng rng(options.seed);
  std::vector<LabeledText> out;
  for (auto& rows : per_class) {
    shuffle(rows, rng);
    if (options.per_label_cap > 0 && rows.size() > options.per_label_cap) rows.resize(options.per_label_cap);
    std::move(rows.begin(), rows.end(), std::back_inserter(out));
  }
  shuffle(out, rng);
  return out;
}

DataSplits split_examples(std::span<const LabeledText> examples, const LabelSpace& labels, SplitFractions fractions,
                          std::uint64_t seed) {
  double total = fractions.train + fractions.validation + fractions.test;
  if (fractions.train <= 0 || fractions.validation < 0 || fractions.test < 0 || total <= 0) {
    throw InputError("split fractions must be non-negative with a positive training share");
  }
  std::vector<std::vector<LabeledText>> per_class(labels.class_count());
  for (const auto& e : examples) per_class[labels.class_id(e.label)].push_back(e);
  Rng rng(seed);
  DataSplits s;
  for (auto& rows : per_class) {
    shuffle(rows, rng);
    const auto n = rows.size();
    auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fractions.validation / total));
    auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fractions.test / total));
    if (n_val + n_test > n) n_test = n - std::min(n, n_val);
    std::size_t i = 0;
    for (; i < n_val; ++i) s.validation.push_back(std::move(rows[i]));
    for (; i < n_val + n_test; ++i) s.test.push_back(std::move(rows[i]));
    for (; i < n; ++i) s.train.push_back(std::move(rows[i]));
  }
  shuffle(s.train, rng);
  shuffle(s.validation, rng);
  shuffle(s.test, rng);
  return s;
}

void write_labeled(std::ostream& out, std::span<const LabeledText> rows, const LabelSpace& labels) {
  for (const auto& r : rows) {
    std::string t = r.text;
    std::replace_if(t.begin(), t.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
    out << labels.name(r.label) << '\t' << t << '\n';
  }
}

std::vector<LabeledText> read_labeled(std::istream& in, const LabelSpace& labels) {
  std::vector<LabeledText> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw InputError("labeled file line " + std::to_string(line_no) + ": missing tab");
    auto label = labels.parse(std::string_view(line).substr(0, tab));
    if (!label) throw InputError("labeled file line " + std::to_string(line_no) + ": unknown label");
    rows.push_back({line.substr(tab + 1), *label});
  }
  return rows;
}

}  // namespace empdialog
