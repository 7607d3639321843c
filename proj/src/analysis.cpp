#include "empdialog/analysis.hpp"

#include <algorithm>
#include <unordered_map>

#include <omp.h>

#include "empdialog/error.hpp"

namespace empdialog {

namespace {

struct SequenceHash {
  std::size_t operator()(const std::vector<std::size_t>& v) const noexcept {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (auto x : v) {
      h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }
};

using PrefixMap = std::unordered_map<std::vector<std::size_t>, std::uint64_t, SequenceHash>;

Annotation annotate_sentence(const Dialogue& d, const Utterance& u, std::size_t sentence_index,
                             std::string_view text, Valence context, const ClassifierModel* model,
                             const PatternSet& patterns, const LabelSpace& labels, const AnnotateOptions& options) {
  Annotation a;
  a.dialogue_id = d.id;
  a.turn_index = u.turn_index;
  a.sentence_index = sentence_index;
  if (options.manual != nullptr) {
    auto it = options.manual->labels.find({d.id, u.turn_index, sentence_index});
    if (it != options.manual->labels.end()) {
      a.label = it->second;
      a.confidence = 1.0;
      a.source = AnnotationSource::Manual;
      return a;
    }
  }
  if (options.policy == AnnotationPolicy::LexiconFirst && u.role == Role::Listener) {
    if (auto tagged = tag_listener_sentence(patterns, text, context)) {
      a.label = tagged->label;
      a.confidence = 1.0;
      a.source = AnnotationSource::Lexicon;
      return a;
    }
  }
  if (model == nullptr) {
    throw InvariantError("sentence " + d.id + "/" + std::to_string(u.turn_index) + "/" +
                         std::to_string(sentence_index) + " left unlabeled: no classifier model");
  }
  auto p = predict_label(*model, text);
  a.label = labels.class_label(p.class_id);
  a.confidence = p.confidence;
  a.source = AnnotationSource::Model;
  return a;
}

AnnotatedDialogue annotate_dialogue(const Dialogue& d, const ClassifierModel* model, const PatternSet& patterns,
                                    const LabelSpace& labels, const AnnotateOptions& options) {
  AnnotatedDialogue out;
  out.id = d.id;
  const Valence context = d.emotion_index ? labels.emotions()[*d.emotion_index].valence : Valence::None;
  for (const auto& u : d.utterances) {
    AnnotatedUtterance au;
    au.turn_index = u.turn_index;
    if (u.sentences.empty()) {
      au.sentences.push_back(annotate_sentence(d, u, 0, u.raw_text, context, model, patterns, labels, options));
    } else {
      for (const auto& s : u.sentences) {
        au.sentences.push_back(annotate_sentence(d, u, s.index, s.text, context, model, patterns, labels, options));
      }
    }
    std::tie(au.label, au.confidence) = aggregate_utterance_label(au.sentences);
    out.utterances.push_back(std::move(au));
  }
  return out;
}

bool names_less(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b, const LabelSpace& labels) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), [&](std::size_t x, std::size_t y) {
    return labels.class_name(x) < labels.class_name(y);
  });
}

void check_flow_options(std::size_t max_turns) {
  if (max_turns < 1) throw InputError("max_turns must be >= 1");
  if (max_turns > kMaxFlowTurns) throw InputError("max_turns must be <= " + std::to_string(kMaxFlowTurns));
}

}  // namespace

std::vector<AnnotatedDialogue> annotate_corpus(std::span<const Dialogue> corpus, const ClassifierModel* model,
                                               const PatternSet& patterns, const LabelSpace& labels,
                                               const AnnotateOptions& options) {
  if (model != nullptr && model->class_count() != labels.class_count()) {
    throw InputError("model label count does not match the label space");
  }
  std::vector<AnnotatedDialogue> out(corpus.size());
  const auto n = static_cast<std::int64_t>(corpus.size());
  // Exceptions cannot cross the parallel region; keep the first and rethrow.
  std::exception_ptr failure;
#pragma omp parallel for num_threads(options.workers) schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] =
          annotate_dialogue(corpus[static_cast<std::size_t>(i)], model, patterns, labels, options);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::pair<Label, double> aggregate_utterance_label(std::span<const Annotation> sentences) {
  if (sentences.empty()) throw InvariantError("utterance without sentence annotations");
  const Annotation* best = &sentences.front();
  for (const auto& a : sentences) {
    if (a.confidence > best->confidence) best = &a;
  }
  return {best->label, best->confidence};
}

std::vector<AnnotatedDialogue> group_annotations(std::span<const Annotation> rows) {
  std::vector<AnnotatedDialogue> out;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& a : rows) {
    auto [it, inserted] = index.emplace(a.dialogue_id, out.size());
    if (inserted) out.push_back({a.dialogue_id, {}});
    auto& d = out[it->second];
    auto u = std::find_if(d.utterances.begin(), d.utterances.end(),
                          [&](const AnnotatedUtterance& x) { return x.turn_index == a.turn_index; });
    if (u == d.utterances.end()) {
      d.utterances.push_back({a.turn_index, {}, Label::neutral(), 0.0});
      u = std::prev(d.utterances.end());
    }
    u->sentences.push_back(a);
  }
  for (auto& d : out) {
    std::stable_sort(d.utterances.begin(), d.utterances.end(),
                     [](const AnnotatedUtterance& a, const AnnotatedUtterance& b) { return a.turn_index < b.turn_index; });
    for (auto& u : d.utterances) std::tie(u.label, u.confidence) = aggregate_utterance_label(u.sentences);
  }
  return out;
}

std::vector<Annotation> flatten_annotations(std::span<const AnnotatedDialogue> corpus) {
  std::vector<Annotation> rows;
  for (const auto& d : corpus) {
    for (const auto& u : d.utterances) rows.insert(rows.end(), u.sentences.begin(), u.sentences.end());
  }
  return rows;
}

LabelSequences label_sequences(std::span<const AnnotatedDialogue> corpus, const LabelSpace& labels) {
  LabelSequences out;
  out.reserve(corpus.size());
  for (const auto& d : corpus) {
    std::vector<std::size_t> seq;
    seq.reserve(d.utterances.size());
    for (const auto& u : d.utterances) seq.push_back(labels.class_id(u.label));
    out.push_back(std::move(seq));
  }
  return out;
}

namespace kernels {

namespace serial {

ExchangeMatrix exchange_counts(const LabelSequences& sequences, std::size_t class_count) {
  ExchangeMatrix m;
  m.size = class_count;
  m.counts.assign(class_count * class_count, 0);
  for (const auto& seq : sequences) {
    for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
      ++m.counts[seq[t] * class_count + seq[t + 1]];
      ++m.total_pairs;
    }
  }
  return m;
}

std::vector<FlowPattern> prefix_counts(const LabelSequences& sequences, std::size_t max_turns) {
  check_flow_options(max_turns);
  std::map<std::vector<std::size_t>, std::uint64_t> counts;
  for (const auto& seq : sequences) {
    const auto k_max = std::min(max_turns, seq.size());
    for (std::size_t k = 1; k <= k_max; ++k) ++counts[std::vector<std::size_t>(seq.begin(), seq.begin() + k)];
  }
  std::vector<FlowPattern> out;
  out.reserve(counts.size());
  for (auto& [labels, freq] : counts) out.push_back({labels, freq});
  return out;
}

}  // namespace serial

namespace parallel {

ExchangeMatrix exchange_counts(const LabelSequences& sequences, std::size_t class_count, int workers) {
  ExchangeMatrix m;
  m.size = class_count;
  m.counts.assign(class_count * class_count, 0);
  const auto n = static_cast<std::int64_t>(sequences.size());
  std::uint64_t total = 0;
#pragma omp parallel num_threads(workers) reduction(+ : total)
  {
    std::vector<std::uint64_t> local(class_count * class_count, 0);
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) {
      const auto& seq = sequences[static_cast<std::size_t>(i)];
      for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
        ++local[seq[t] * class_count + seq[t + 1]];
        ++total;
      }
    }
#pragma omp critical
    for (std::size_t c = 0; c < local.size(); ++c) m.counts[c] += local[c];
  }
  m.total_pairs = total;
  return m;
}

std::vector<FlowPattern> prefix_counts(const LabelSequences& sequences, std::size_t max_turns, int workers) {
  check_flow_options(max_turns);
  const auto n = static_cast<std::int64_t>(sequences.size());
  std::map<std::vector<std::size_t>, std::uint64_t> merged;
#pragma omp parallel num_threads(workers)
  {
    PrefixMap local;
    std::vector<std::size_t> key;
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) {
      const auto& seq = sequences[static_cast<std::size_t>(i)];
      const auto k_max = std::min(max_turns, seq.size());
      key.clear();
      for (std::size_t k = 0; k < k_max; ++k) {
        key.push_back(seq[k]);
        ++local[key];
      }
    }
    // Integer sums commute, so the merge order does not affect the result.
#pragma omp critical
    for (auto& [k, v] : local) merged[k] += v;
  }
  std::vector<FlowPattern> out;
  out.reserve(merged.size());
  for (auto& [labels, freq] : merged) out.push_back({labels, freq});
  return out;
}

}  // namespace parallel

}  // namespace kernels

ExchangeMatrix exchange_matrix(std::span<const AnnotatedDialogue> corpus, const LabelSpace& labels, int workers) {
  auto seqs = label_sequences(corpus, labels);
  if (workers <= 1) return kernels::serial::exchange_counts(seqs, labels.class_count());
  return kernels::parallel::exchange_counts(seqs, labels.class_count(), workers);
}

std::vector<FlowPattern> select_flows(std::vector<FlowPattern> counts, const LabelSpace& labels,
                                      const FlowOptions& options) {
  std::erase_if(counts, [&](const FlowPattern& p) {
    return p.frequency < options.min_freq || p.labels.size() > options.max_turns;
  });
  std::sort(counts.begin(), counts.end(), [&](const FlowPattern& a, const FlowPattern& b) {
    if (a.labels.size() != b.labels.size()) return a.labels.size() < b.labels.size();
    if (a.frequency != b.frequency) return a.frequency > b.frequency;
    return names_less(a.labels, b.labels, labels);
  });
  return counts;
}

std::vector<FlowPattern> mine_flows(std::span<const AnnotatedDialogue> corpus, const LabelSpace& labels,
                                    const FlowOptions& options, int workers) {
  check_flow_options(options.max_turns);
  auto seqs = label_sequences(corpus, labels);
  auto counts = workers <= 1 ? kernels::serial::prefix_counts(seqs, options.max_turns)
                             : kernels::parallel::prefix_counts(seqs, options.max_turns, workers);
  return select_flows(std::move(counts), labels, options);
}

std::map<std::size_t, double> turn_position_distribution(std::span<const AnnotatedDialogue> corpus,
                                                         const LabelSpace& labels, std::size_t position) {
  if (position < 1) throw InputError("turn position must be >= 1");
  std::map<std::size_t, std::uint64_t> counts;
  std::uint64_t reached = 0;
  for (const auto& d : corpus) {
    if (d.utterances.size() < position) continue;
    ++counts[labels.class_id(d.utterances[position - 1].label)];
    ++reached;
  }
  std::map<std::size_t, double> out;
  for (const auto& [id, c] : counts) out[id] = static_cast<double>(c) / static_cast<double>(reached);
  return out;
}

}  // namespace empdialog
