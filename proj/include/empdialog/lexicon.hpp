#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "empdialog/corpus.hpp"
#include "empdialog/taxonomy.hpp"

namespace empdialog {

struct PatternElement {
  enum class Kind { Literal, Gap, QuestionEnd, ExclaimEnd, SentenceStart };
  Kind kind = Kind::Literal;
  std::string token;  // Literal only

  friend auto operator<=>(const PatternElement&, const PatternElement&) = default;
};

struct GapPattern {
  std::vector<PatternElement> elements;
  Intent intent = Intent::Questioning;
  std::size_t specificity = 0;  // number of literal tokens
  std::string source;           // the DSL line it came from
  std::size_t order = 0;        // position in the compiled set
  /// Listed under both Encouraging and Consoling; resolved by context valence.
  bool valence_shared = false;
};

struct MatchOptions {
  /// Upper bound on tokens covered by an interior "..." gap.
  std::size_t max_gap = 5;
};

class PatternSet {
 public:
  PatternSet() = default;
  explicit PatternSet(std::vector<GapPattern> patterns, MatchOptions options = {});

  const std::vector<GapPattern>& patterns() const { return patterns_; }
  const MatchOptions& options() const { return options_; }
  std::size_t size() const { return patterns_.size(); }

 private:
  std::vector<GapPattern> patterns_;
  MatchOptions options_;
};

/// Compile the pattern DSL: "# intent: <name>" headers, one pattern per
/// line, "..." for a gap, trailing "?"/"!" for a sentence-final marker.
/// Questioning patterns ending in "?" get a sentence-start anchor.
PatternSet compile_patterns(std::string_view source, MatchOptions options = {});
PatternSet compile_patterns_file(const std::string& path, MatchOptions options = {});

/// Built-in copy of data/patterns.txt.
std::string_view default_pattern_source();

struct MatchResult {
  Intent intent;
  const GapPattern* pattern = nullptr;
  std::size_t span_begin = 0;
  std::size_t span_end = 0;  // exclusive, in tokens
  bool via_valence = false;
};

/// Every matching pattern, ordered by specificity (desc) then pattern order.
std::vector<MatchResult> match_tokens(const PatternSet& patterns, std::span<const std::string> tokens);
std::vector<MatchResult> match_sentence(const PatternSet& patterns, std::string_view sentence);

enum class AnnotationSource { Lexicon, Model, Manual };
std::string_view source_name(AnnotationSource s);
std::optional<AnnotationSource> source_from_name(std::string_view name);

struct Annotation {
  std::string dialogue_id;
  int turn_index = 0;
  std::size_t sentence_index = 0;
  Label label = Label::neutral();
  double confidence = 1.0;
  AnnotationSource source = AnnotationSource::Lexicon;
};

/// Resolve a winning intent for one sentence. When the best-ranked
/// matches disagree after valence resolution, the earliest pattern wins;
/// `ambiguous` is set so callers that need clean labels can skip it.
struct TagDecision {
  MatchResult match;
  bool ambiguous = false;
};
std::optional<TagDecision> decide_intent(const std::vector<MatchResult>& matches, Valence context);

std::optional<Annotation> tag_listener_sentence(const PatternSet& patterns, std::string_view sentence,
                                                Valence context);

/// Annotation rows: dialogue_id,turn,sentence,label,confidence,source
void write_annotations(std::ostream& out, std::span<const Annotation> rows, const LabelSpace& labels);
std::vector<Annotation> read_annotations(std::istream& in, const LabelSpace& labels);

struct LabeledText {
  std::string text;
  Label label;
};

struct BootstrapOptions {
  std::uint64_t seed = 13;
  /// Keep at most this many examples per classifier class (0 = no cap).
  std::size_t per_label_cap = 800;
};

/// Harvest (situation -> emotion) and (uniquely tagged listener sentence ->
/// intent) examples, dedupe, cap per class and shuffle under the seed.
/// Throws InputError naming every emotion or core intent with no examples.
std::vector<LabeledText> bootstrap_training_set(std::span<const Dialogue> corpus, const PatternSet& patterns,
                                                const LabelSpace& labels, const BootstrapOptions& options = {});

struct SplitFractions {
  double train = 25023.0 / 31792.0;
  double validation = 3544.0 / 31792.0;
  double test = 3225.0 / 31792.0;
};

struct DataSplits {
  std::vector<LabeledText> train, validation, test;
};

/// Stratified per class so every split spans all classes.
DataSplits split_examples(std::span<const LabeledText> examples, const LabelSpace& labels,
                          SplitFractions fractions = {}, std::uint64_t seed = 13);

/// Tab-separated "label<TAB>text" lines.
void write_labeled(std::ostream& out, std::span<const LabeledText> rows, const LabelSpace& labels);
std::vector<LabeledText> read_labeled(std::istream& in, const LabelSpace& labels);

}  // namespace empdialog
