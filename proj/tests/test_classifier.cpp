#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "empdialog/classifier.hpp"
#include "empdialog/error.hpp"
#include "empdialog/random.hpp"
#include "empdialog/taxonomy.hpp"

using namespace empdialog;

namespace {

std::vector<std::string> class_names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("c" + std::to_string(i));
  return out;
}

ClassifierModel random_model(std::size_t classes, const FeatureConfig& f, Rng& rng, std::size_t rows) {
  ClassifierModel m(f, class_names(classes));
  for (auto& w : m.weights()) w = rng.uniform(-1.0, 1.0);
  for (auto& b : m.bias()) b = rng.uniform(-1.0, 1.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = m.embeddings().ensure(static_cast<FeatureId>(rng.below(f.bucket_count)));
    for (std::size_t k = 0; k < f.dim; ++k) row[k] = rng.uniform(-1.0, 1.0);
  }
  return m;
}

double loss_of(const ClassifierModel& m, std::span<const FeatureId> ids, std::size_t target) {
  return -std::log(forward(m, ids)[target]);
}

double rel_error(double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); }

// Four classes with disjoint vocabularies.
std::vector<std::pair<std::string, std::size_t>> separable_rows(std::size_t per_class, std::uint64_t seed) {
  const std::vector<std::vector<std::string>> vocab{
      {"apple", "pear", "plum", "grape", "melon", "kiwi", "fig", "lime"},
      {"train", "bus", "tram", "ferry", "bike", "truck", "plane", "car"},
      {"red", "blue", "green", "amber", "violet", "teal", "navy", "pink"},
      {"piano", "drum", "flute", "harp", "cello", "oboe", "tuba", "horn"}};
  Rng rng(seed);
  std::vector<std::pair<std::string, std::size_t>> rows;
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      std::string text;
      auto len = 3 + rng.below(4);
      for (std::uint64_t w = 0; w < len; ++w) text += vocab[c][rng.below(vocab[c].size())] + " ";
      rows.emplace_back(text, c);
    }
  }
  return rows;
}

double accuracy_on(const ClassifierModel& m, std::span<const Example> set) { return evaluate(m, set).accuracy; }

}  // namespace

TEST_CASE("featurize emits unigrams then bigrams") {
  FeatureConfig f;
  CHECK(featurize("", f).empty());
  auto ids = featurize("me too", f);
  const auto mask = f.bucket_count - 1;
  REQUIRE(ids.size() == 3);
  CHECK(ids[0] == (feature_hash("me", f.hash_seed) & mask));
  CHECK(ids[1] == (feature_hash("too", f.hash_seed) & mask));
  CHECK(ids[2] == (feature_hash("me too", f.hash_seed) & mask));
  CHECK(featurize("ME  Too", f) == ids);
  CHECK(featurize("that's it", f).size() == 3 + 2);

  FeatureConfig unigrams;
  unigrams.max_order = 1;
  CHECK(featurize("a b c", unigrams).size() == 3);
  CHECK(feature_hash("me", 1) != feature_hash("me", 2));
}

TEST_CASE("feature config validation") {
  FeatureConfig f;
  f.bucket_count = 1000;
  CHECK_THROWS_AS(f.validate(), InputError);
  f.bucket_count = 1024;
  f.min_order = 3;
  CHECK_THROWS_AS(f.validate(), InputError);
  f.min_order = 1;
  f.dim = 0;
  CHECK_THROWS_AS(f.validate(), InputError);
}

TEST_CASE("untrained model is uniform over 41 classes") {
  ClassifierModel m(FeatureConfig{}, class_names(41));
  auto p = forward(m, featurize("I got the job", m.features()));
  REQUIRE(p.size() == 41);
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 41.0).epsilon(1e-12));
  CHECK(argmax(p).class_id == 0);
  CHECK(predict_label(m, "anything").class_id == 0);
}

TEST_CASE("empty input gives the softmax of the bias") {
  FeatureConfig f;
  f.bucket_count = 16;
  f.dim = 4;
  ClassifierModel m(f, class_names(3));
  m.bias() = {0.3, -0.2, 0.0};
  for (auto& w : m.weights()) w = 0.7;
  auto p = forward(m, std::vector<FeatureId>{});
  CHECK(p[0] == doctest::Approx(0.4260125149492058).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.2583896517379799).epsilon(1e-12));
  CHECK(p[2] == doctest::Approx(0.3155978333128144).epsilon(1e-12));
}

TEST_CASE("hand-computed two-class model") {
  FeatureConfig f;
  f.bucket_count = 2;
  f.dim = 1;
  ClassifierModel m(f, {"a", "b"});
  m.embeddings().ensure(0)[0] = 1.0;
  m.embeddings().ensure(1)[0] = -2.0;
  m.weights() = {0.5, -1.0};
  m.bias() = {0.1, 0.0};
  // h = -0.5, z = (-0.15, 0.5)
  auto p = forward(m, std::vector<FeatureId>{0, 1});
  CHECK(p[0] == doctest::Approx(0.3429895373265012).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.6570104626734987).epsilon(1e-12));
}

TEST_CASE("analytic gradient matches central differences") {
  FeatureConfig f;
  f.bucket_count = 16;
  f.dim = 4;
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = random_model(5, f, rng, 0);
    std::vector<FeatureId> ids;
    for (int i = 0; i < 6; ++i) ids.push_back(static_cast<FeatureId>(rng.below(16)));
    for (auto id : ids) {
      double* row = m.embeddings().ensure(id);
      for (std::size_t k = 0; k < f.dim; ++k) row[k] = rng.uniform(-1.0, 1.0);
    }
    const auto target = static_cast<std::size_t>(rng.below(5));
    auto g = loss_gradient(m, ids, target);
    CHECK(g.loss == doctest::Approx(loss_of(m, ids, target)).epsilon(1e-12));

    const double h = 1e-5;
    auto check = [&](double& param, double analytic) {
      const double saved = param;
      param = saved + h;
      const double up = loss_of(m, ids, target);
      param = saved - h;
      const double down = loss_of(m, ids, target);
      param = saved;
      const double numeric = (up - down) / (2 * h);
      if (std::abs(numeric) < 1e-7 && std::abs(analytic) < 1e-7) return;
      CHECK(rel_error(numeric, analytic) < 1e-4);
    };
    for (std::size_t k = 0; k < m.weights().size(); ++k) check(m.weights()[k], g.weights[k]);
    for (std::size_t c = 0; c < m.bias().size(); ++c) check(m.bias()[c], g.bias[c]);
    for (auto id : m.embeddings().sorted_ids()) {
      REQUIRE(g.embeddings.contains(id));
      double* row = m.embeddings().find(id);
      for (std::size_t k = 0; k < f.dim; ++k) check(row[k], g.embeddings.at(id)[k]);
    }
  }
  ClassifierModel m(f, class_names(2));
  CHECK_THROWS_AS(loss_gradient(m, std::vector<FeatureId>{}, 2), InputError);
}

TEST_CASE("outputs lie on the probability simplex") {
  FeatureConfig f;
  f.bucket_count = 64;
  f.dim = 8;
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    auto m = random_model(41, f, rng, 20);
    for (auto& w : m.weights()) w *= 30.0;  // large logits exercise the stabilised softmax
    std::vector<FeatureId> ids;
    auto n = rng.below(12);
    for (std::uint64_t i = 0; i < n; ++i) ids.push_back(static_cast<FeatureId>(rng.below(64)));
    auto p = forward(m, ids);
    double sum = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("forward is invariant to feature order") {
  FeatureConfig f;
  f.bucket_count = 64;
  f.dim = 8;
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto m = random_model(7, f, rng, 40);
    std::vector<FeatureId> ids;
    for (int i = 0; i < 15; ++i) ids.push_back(static_cast<FeatureId>(rng.below(64)));
    auto base = forward(m, ids);
    shuffle(ids, rng);
    CHECK(forward(m, ids) == base);
  }
}

TEST_CASE("argmax breaks ties toward the smallest id") {
  CHECK(argmax(std::vector<double>{0.2, 0.4, 0.4}).class_id == 1);
  CHECK(argmax(std::vector<double>{0.5, 0.5}).class_id == 0);
  auto p = argmax(std::vector<double>{0.1, 0.7, 0.2});
  CHECK(p.class_id == 1);
  CHECK(p.confidence == 0.7);
}

TEST_CASE("training separates a four-class synthetic set with the default schedule") {
  FeatureConfig f;
  auto rows = separable_rows(200, 17);
  auto examples = make_examples(rows, f);
  auto start = std::chrono::steady_clock::now();
  auto result = train(examples, class_names(4), TrainConfig{}, f);
  auto seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(seconds < 60.0);
  CHECK(accuracy_on(result.model, examples) >= 0.99);
  CHECK(result.model.all_finite());
  REQUIRE(result.history.size() == 10);
  for (std::size_t i = 1; i < result.history.size(); ++i) {
    CHECK(result.history[i].best_validation_loss <= result.history[i - 1].best_validation_loss);
  }
  auto min_val = std::min_element(result.history.begin(), result.history.end(), [](auto& a, auto& b) {
    return a.validation_loss < b.validation_loss;
  });
  CHECK(result.model.metadata().best_epoch == min_val->epoch);

  auto held_out = make_examples(separable_rows(50, 99), f);
  CHECK(accuracy_on(result.model, held_out) >= 0.95);
}

TEST_CASE("a single example can be memorised") {
  FeatureConfig f;
  f.dim = 16;
  std::vector<std::pair<std::string, std::size_t>> rows{{"my dog ran away", 2}};
  auto examples = make_examples(rows, f);
  TrainConfig config;
  config.epochs = 300;
  config.learning_rate = 0.5;
  config.batch_size = 1;
  auto result = train(examples, examples, class_names(5), config, f);
  auto p = forward(result.model, examples[0].features);
  CHECK(p[2] > 0.9);
}

TEST_CASE("training is deterministic under a fixed seed") {
  FeatureConfig f;
  f.dim = 16;
  auto examples = make_examples(separable_rows(40, 3), f);
  TrainConfig config;
  config.epochs = 4;
  auto a = train(examples, class_names(4), config, f);
  auto b = train(examples, class_names(4), config, f);
  CHECK(a.model == b.model);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].validation_loss == b.history[i].validation_loss);
  }
  config.seed = 14;
  auto c = train(examples, class_names(4), config, f);
  CHECK_FALSE(c.model == a.model);
}

TEST_CASE("training input validation") {
  FeatureConfig f;
  std::vector<Example> none;
  CHECK_THROWS_AS(train(none, class_names(3), TrainConfig{}, f), InputError);
  std::vector<Example> bad{{{1, 2}, 3}};
  CHECK_THROWS_AS(train(bad, bad, class_names(3), TrainConfig{}, f), InputError);
  TrainConfig zero_lr;
  zero_lr.learning_rate = 0.0;
  std::vector<Example> ok{{{1, 2}, 0}};
  CHECK_THROWS_AS(train(ok, ok, class_names(3), zero_lr, f), InputError);
}

TEST_CASE("evaluation metrics") {
  FeatureConfig f;
  f.dim = 16;
  auto examples = make_examples(separable_rows(30, 8), f);
  TrainConfig config;
  config.epochs = 3;
  auto model = train(examples, class_names(4), config, f).model;

  // Gold set to the model's own predictions.
  auto agreed = examples;
  for (auto& e : agreed) e.label = argmax(forward(model, e.features)).class_id;
  auto perfect = evaluate(model, agreed);
  CHECK(perfect.accuracy == 1.0);

  auto m = evaluate(model, examples, 3);
  CHECK(m.total == examples.size());
  for (std::size_t g = 0; g < 4; ++g) {
    auto row = std::accumulate(m.confusion[g].begin(), m.confusion[g].end(), std::size_t{0});
    CHECK(row == m.support[g]);
    CHECK(row == 30);
  }
  auto serial = evaluate(model, examples, 1);
  CHECK(serial.confusion == m.confusion);

  auto doc = to_json(m, class_names(4));
  CHECK(doc["total"] == examples.size());
  CHECK(doc["labels"].size() == 4);
  std::ostringstream csv;
  write_confusion_csv(csv, m, class_names(4));
  CHECK(csv.str().starts_with("gold\\predicted,c0,c1,c2,c3\n"));

  std::vector<Example> none;
  CHECK_THROWS_AS(evaluate(model, none), InputError);
}

TEST_CASE("a constant predictor scores chance on a balanced set") {
  FeatureConfig f;
  f.bucket_count = 1024;
  f.dim = 4;
  ClassifierModel m(f, class_names(41));
  Rng rng(31);
  for (auto& b : m.bias()) b = rng.uniform(-1.0, 1.0);
  std::vector<Example> balanced;
  for (std::size_t c = 0; c < 41; ++c) {
    for (int i = 0; i < 50; ++i) balanced.push_back({{static_cast<FeatureId>(rng.below(1024))}, c});
  }
  auto metrics = evaluate(m, balanced);
  CHECK(std::abs(metrics.accuracy - 1.0 / 41.0) <= 0.02);
}

TEST_CASE("models survive a save/load round trip bit for bit") {
  FeatureConfig f;
  f.dim = 8;
  auto examples = make_examples(separable_rows(20, 4), f);
  TrainConfig config;
  config.epochs = 2;
  auto model = train(examples, class_names(4), config, f).model;
  std::stringstream buf;
  save_model(buf, model);
  auto bytes = buf.str();
  auto loaded = load_model(buf);
  CHECK(loaded == model);
  for (const auto& e : examples) CHECK(forward(loaded, e.features) == forward(model, e.features));

  std::stringstream again;
  save_model(again, loaded);
  CHECK(again.str() == bytes);

  std::string corrupt = bytes;
  corrupt[0] = 'X';
  std::istringstream bad_magic(corrupt);
  CHECK_THROWS_AS(load_model(bad_magic), InputError);
  std::istringstream truncated(bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(load_model(truncated), InputError);
  CHECK_THROWS_AS(load_model_file("/nonexistent/model.bin"), InputError);
}

TEST_CASE("top_k orders by probability") {
  FeatureConfig f;
  f.bucket_count = 16;
  f.dim = 2;
  ClassifierModel m(f, class_names(4));
  m.bias() = {0.1, 0.9, 0.5, 0.9};
  CHECK(top_k(m, "", 3) == std::vector<std::size_t>{1, 3, 2});
  CHECK(top_k(m, "", 10).size() == 4);
}
