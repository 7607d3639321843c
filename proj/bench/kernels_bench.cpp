// Serial reference kernels against their OpenMP counterparts on a
// synthetic corpus of dataset size.
#include <benchmark/benchmark.h>

#include "empdialog/analysis.hpp"
#include "empdialog/corpus.hpp"
#include "empdialog/random.hpp"
#include "empdialog/synthetic.hpp"

using namespace empdialog;

namespace {

const LabelSpace& space() {
  static const LabelSpace labels = default_label_space();
  return labels;
}

// Roughly the shape of the full corpus: ~25k dialogues of 1..8 turns.
const LabelSequences& sequences() {
  static const LabelSequences seqs = [] {
    Rng rng(1);
    LabelSequences out(24856);
    for (auto& s : out) {
      s.resize(1 + rng.below(8));
      for (auto& c : s) c = rng.below(space().class_count());
    }
    return out;
  }();
  return seqs;
}

const std::vector<Dialogue>& corpus() {
  static const std::vector<Dialogue> c = synthetic::make_corpus(space(), {.dialogues = 5000, .seed = 2});
  return c;
}

const PatternSet& patterns() {
  static const PatternSet set = compile_patterns(default_pattern_source());
  return set;
}

void BM_ExchangeSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::exchange_counts(sequences(), space().class_count()));
}

void BM_ExchangeParallel(benchmark::State& state) {
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::parallel::exchange_counts(sequences(), space().class_count(), workers));
  }
}

void BM_PrefixSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::prefix_counts(sequences(), 4));
}

void BM_PrefixParallel(benchmark::State& state) {
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::parallel::prefix_counts(sequences(), 4, workers));
}

void BM_StatsWorkers(benchmark::State& state) {
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(corpus_stats(corpus(), workers));
}

void BM_LexiconAnnotateWorkers(benchmark::State& state) {
  // Zero model: every sentence the lexicon misses costs one forward pass.
  FeatureConfig f;
  f.dim = 16;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < space().class_count(); ++c) names.push_back(space().class_name(c));
  static const ClassifierModel model(f, names);
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(annotate_corpus(corpus(), &model, patterns(), space(), {.workers = workers}));
  }
}

}  // namespace

BENCHMARK(BM_ExchangeSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExchangeParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PrefixSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PrefixParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StatsWorkers)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LexiconAnnotateWorkers)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
