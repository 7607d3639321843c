#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "empdialog/classifier.hpp"
#include "empdialog/corpus.hpp"
#include "empdialog/lexicon.hpp"
#include "empdialog/taxonomy.hpp"

namespace empdialog {

struct AnnotatedUtterance {
  int turn_index = 1;
  std::vector<Annotation> sentences;
  Label label = Label::neutral();  // aggregate
  double confidence = 0.0;
};

struct AnnotatedDialogue {
  std::string id;
  std::vector<AnnotatedUtterance> utterances;
};

enum class AnnotationPolicy { LexiconFirst, ModelOnly };

/// Gold labels keyed by (dialogue id, turn, sentence); applied before any
/// other source with confidence 1.
struct ManualLabels {
  std::map<std::tuple<std::string, int, std::size_t>, Label> labels;
};

struct AnnotateOptions {
  AnnotationPolicy policy = AnnotationPolicy::LexiconFirst;
  const ManualLabels* manual = nullptr;
  int workers = 1;
};

/// Label every sentence of every utterance. `model` may be null only if
/// every sentence is covered by manual labels (or lexicon matches under
/// LexiconFirst); otherwise an InvariantError is thrown.
std::vector<AnnotatedDialogue> annotate_corpus(std::span<const Dialogue> corpus, const ClassifierModel* model,
                                               const PatternSet& patterns, const LabelSpace& labels,
                                               const AnnotateOptions& options = {});

/// Highest confidence wins; ties go to the earliest sentence.
std::pair<Label, double> aggregate_utterance_label(std::span<const Annotation> sentences);

/// Rebuild the dialogue/utterance tree from flat annotation rows (file order).
std::vector<AnnotatedDialogue> group_annotations(std::span<const Annotation> rows);
std::vector<Annotation> flatten_annotations(std::span<const AnnotatedDialogue> corpus);

/// Per-dialogue aggregate class ids in turn order; the common input of the
/// counting kernels.
using LabelSequences = std::vector<std::vector<std::size_t>>;
LabelSequences label_sequences(std::span<const AnnotatedDialogue> corpus, const LabelSpace& labels);

struct ExchangeMatrix {
  std::size_t size = 0;
  std::vector<std::uint64_t> counts;  // row-major [from][to]
  std::uint64_t total_pairs = 0;

  std::uint64_t at(std::size_t from, std::size_t to) const { return counts[from * size + to]; }
  friend bool operator==(const ExchangeMatrix&, const ExchangeMatrix&) = default;
};

struct FlowPattern {
  std::vector<std::size_t> labels;  // class ids for turns 1..k
  std::uint64_t frequency = 0;
  friend bool operator==(const FlowPattern&, const FlowPattern&) = default;
};

struct FlowOptions {
  std::size_t max_turns = 4;
  std::uint64_t min_freq = 5;
};

inline constexpr std::size_t kMaxFlowTurns = 10;

namespace kernels {
// Serial reference implementations; the parallel kernels must agree with
// them exactly for every worker count.
namespace serial {
ExchangeMatrix exchange_counts(const LabelSequences& sequences, std::size_t class_count);
std::vector<FlowPattern> prefix_counts(const LabelSequences& sequences, std::size_t max_turns);
}  // namespace serial

namespace parallel {
ExchangeMatrix exchange_counts(const LabelSequences& sequences, std::size_t class_count, int workers);
std::vector<FlowPattern> prefix_counts(const LabelSequences& sequences, std::size_t max_turns, int workers);
}  // namespace parallel
}  // namespace kernels

ExchangeMatrix exchange_matrix(std::span<const AnnotatedDialogue> corpus, const LabelSpace& labels,
                               int workers = 1);

/// Label-sequence prefixes of length 1..max_turns with frequency >= min_freq,
/// sorted by (length, frequency desc, label names).
std::vector<FlowPattern> mine_flows(std::span<const AnnotatedDialogue> corpus, const LabelSpace& labels,
                                    const FlowOptions& options = {}, int workers = 1);
std::vector<FlowPattern> select_flows(std::vector<FlowPattern> counts, const LabelSpace& labels,
                                      const FlowOptions& options);

/// Class id -> fraction of dialogues whose turn `position` carries it.
std::map<std::size_t, double> turn_position_distribution(std::span<const AnnotatedDialogue> corpus,
                                                         const LabelSpace& labels, std::size_t position);

}  // namespace empdialog
