#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

namespace empdialog {

using FeatureId = std::uint32_t;

struct FeatureConfig {
  std::size_t min_order = 1;
  std::size_t max_order = 2;
  std::uint64_t bucket_count = 1ULL << 20;
  std::size_t dim = 64;
  std::uint64_t hash_seed = 0x9e3779b97f4a7c15ULL;

  void validate() const;
  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

/// Hashed word n-grams of the configured orders, in emission order.
std::vector<FeatureId> featurize(std::string_view text, const FeatureConfig& config);

/// Seeded 64-bit FNV-1a; n-grams hash their tokens joined by single spaces.
std::uint64_t feature_hash(std::string_view key, std::uint64_t seed);

/// Logically a bucket_count x dim table. Rows never written are zero and
/// not stored.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::uint64_t buckets, std::size_t dim) : buckets_(buckets), dim_(dim) {}

  std::uint64_t bucket_count() const { return buckets_; }
  std::size_t dim() const { return dim_; }
  std::size_t stored_rows() const { return ids_.size(); }

  /// nullptr for an unstored (all-zero) row.
  const double* find(FeatureId id) const;
  double* find(FeatureId id);
  /// Store a zero row for `id` if absent and return it.
  double* ensure(FeatureId id);

  /// Stored ids in ascending order.
  std::vector<FeatureId> sorted_ids() const;

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&);

 private:
  std::uint64_t buckets_ = 0;
  std::size_t dim_ = 0;
  std::unordered_map<FeatureId, std::size_t> slot_;
  std::vector<FeatureId> ids_;
  std::vector<double> values_;
};

struct TrainMetadata {
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  double learning_rate = 0.0;
  std::size_t batch_size = 0;
  std::size_t best_epoch = 0;
  friend bool operator==(const TrainMetadata&, const TrainMetadata&) = default;
};

class ClassifierModel {
 public:
  ClassifierModel() = default;
  ClassifierModel(FeatureConfig features, std::vector<std::string> class_names);

  const FeatureConfig& features() const { return features_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  std::size_t class_count() const { return class_names_.size(); }
  std::size_t dim() const { return features_.dim; }

  EmbeddingTable& embeddings() { return embeddings_; }
  const EmbeddingTable& embeddings() const { return embeddings_; }
  /// Row-major class_count x dim.
  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& bias() { return bias_; }
  const std::vector<double>& bias() const { return bias_; }
  TrainMetadata& metadata() { return metadata_; }
  const TrainMetadata& metadata() const { return metadata_; }

  bool all_finite() const;

  friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;

 private:
  FeatureConfig features_;
  std::vector<std::string> class_names_;
  EmbeddingTable embeddings_;
  std::vector<double> weights_;
  std::vector<double> bias_;
  TrainMetadata metadata_;
};

/// Mean-pooled embedding -> linear layer -> softmax.
std::vector<double> forward(const ClassifierModel& model, std::span<const FeatureId> ids);

/// Gradient of -log p(target) for a single example. Embedding gradient
/// rows are keyed by feature id.
struct Gradient {
  std::vector<double> weights;
  std::vector<double> bias;
  std::unordered_map<FeatureId, std::vector<double>> embeddings;
  double loss = 0.0;
};
Gradient loss_gradient(const ClassifierModel& model, std::span<const FeatureId> ids, std::size_t target);

struct Example {
  std::vector<FeatureId> features;
  std::size_t label = 0;
};

std::vector<Example> make_examples(std::span<const std::pair<std::string, std::size_t>> rows,
                                   const FeatureConfig& config);

struct TrainConfig {
  std::size_t epochs = 10;
  double learning_rate = 0.5;  // per-example peak, decays linearly to 0; batch gradients are summed
  std::size_t batch_size = 32;
  std::uint64_t seed = 13;
  /// Held out from the training rows when no explicit validation set is given.
  double validation_fraction = 0.1;

  void validate() const;
};

struct EpochLoss {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double best_validation_loss = 0.0;
};

struct TrainResult {
  ClassifierModel model;
  std::vector<EpochLoss> history;
};

TrainResult train(std::span<const Example> train_set, std::span<const Example> validation_set,
                  std::vector<std::string> class_names, const TrainConfig& config,
                  const FeatureConfig& features);
/// Splits `validation_fraction` of the rows off as the validation set.
TrainResult train(std::span<const Example> examples, std::vector<std::string> class_names,
                  const TrainConfig& config, const FeatureConfig& features);

double mean_loss(const ClassifierModel& model, std::span<const Example> examples);

struct Metrics {
  double accuracy = 0.0;
  std::size_t total = 0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<std::size_t> support;
  std::vector<std::vector<std::size_t>> confusion;  // [gold][predicted]
};

Metrics evaluate(const ClassifierModel& model, std::span<const Example> test_set, int workers = 1);
nlohmann::json to_json(const Metrics& metrics, const std::vector<std::string>& class_names);
void write_confusion_csv(std::ostream& out, const Metrics& metrics, const std::vector<std::string>& class_names);

struct Prediction {
  std::size_t class_id = 0;
  double confidence = 0.0;
};

/// Argmax with ties going to the smallest class id.
Prediction argmax(std::span<const double> probabilities);
Prediction predict_label(const ClassifierModel& model, std::string_view text);
/// Class ids sorted by descending probability (stable on ties).
std::vector<std::size_t> top_k(const ClassifierModel& model, std::string_view text, std::size_t k);

void save_model(std::ostream& out, const ClassifierModel& model);
ClassifierModel load_model(std::istream& in);
void save_model_file(const std::string& path, const ClassifierModel& model);
ClassifierModel load_model_file(const std::string& path);

}  // namespace empdialog
