#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "empdialog/corpus.hpp"
#include "empdialog/taxonomy.hpp"

namespace empdialog::synthetic {

struct CorpusOptions {
  std::size_t dialogues = 100;
  std::uint64_t seed = 1;
  std::size_t min_turns = 1;
  std::size_t max_turns = 8;
};

/// Seeded generator of dataset-shaped dialogues for tests and benchmarks.
/// Speaker turns carry emotion-specific cue words; listener turns are drawn
/// from templates containing indicative phrases for the core intents,
/// chosen to agree with the situation's valence.
std::vector<Dialogue> make_corpus(const LabelSpace& labels, const CorpusOptions& options);

}  // namespace empdialog::synthetic
