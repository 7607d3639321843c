#include "empdialog/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include <omp.h>

#include "empdialog/error.hpp"
#include "empdialog/random.hpp"
#include "empdialog/text.hpp"

namespace empdialog {

static_assert(std::endian::native == std::endian::little, "model files are little-endian");

void FeatureConfig::validate() const {
  if (min_order < 1 || max_order < min_order) throw InputError("feature config: bad n-gram orders");
  if (bucket_count == 0 || !std::has_single_bit(bucket_count)) {
    throw InputError("feature config: bucket count must be a power of two");
  }
  if (bucket_count > (1ULL << 32)) throw InputError("feature config: bucket count exceeds 2^32");
  if (dim < 1) throw InputError("feature config: dim must be >= 1");
}

std::uint64_t feature_hash(std::string_view key, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(seed >> (8 * i)));
  for (char c : key) mix(static_cast<unsigned char>(c));
  // Finalizer so the low bits used for bucketing are well mixed.
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ULL;
  h ^= h >> 33;
  return h;
}

std::vector<FeatureId> featurize(std::string_view raw, const FeatureConfig& config) {
  auto tokens = text::tokenize(text::normalize(raw));
  std::vector<FeatureId> ids;
  const auto mask = config.bucket_count - 1;
  std::string key;
  for (std::size_t n = config.min_order; n <= config.max_order; ++n) {
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      key.clear();
      for (std::size_t k = 0; k < n; ++k) {
        if (k) key.push_back(' ');
        key += tokens[i + k];
      }
      ids.push_back(static_cast<FeatureId>(feature_hash(key, config.hash_seed) & mask));
    }
  }
  return ids;
}

const double* EmbeddingTable::find(FeatureId id) const {
  auto it = slot_.find(id);
  return it == slot_.end() ? nullptr : values_.data() + it->second * dim_;
}

double* EmbeddingTable::find(FeatureId id) {
  auto it = slot_.find(id);
  return it == slot_.end() ? nullptr : values_.data() + it->second * dim_;
}

double* EmbeddingTable::ensure(FeatureId id) {
  if (id >= buckets_) throw InvariantError("feature id outside bucket range");
  auto [it, inserted] = slot_.emplace(id, ids_.size());
  if (inserted) {
    ids_.push_back(id);
    values_.resize(values_.size() + dim_, 0.0);
  }
  return values_.data() + it->second * dim_;
}

std::vector<FeatureId> EmbeddingTable::sorted_ids() const {
  auto ids = ids_;
  std::sort(ids.begin(), ids.end());
  return ids;
}

bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
  if (a.buckets_ != b.buckets_ || a.dim_ != b.dim_ || a.ids_.size() != b.ids_.size()) return false;
  for (auto id : a.ids_) {
    const double* rb = b.find(id);
    if (rb == nullptr || std::memcmp(a.find(id), rb, a.dim_ * sizeof(double)) != 0) return false;
  }
  return true;
}

ClassifierModel::ClassifierModel(FeatureConfig features, std::vector<std::string> class_names)
    : features_(features),
      class_names_(std::move(class_names)),
      embeddings_(features.bucket_count, features.dim),
      weights_(class_names_.size() * features.dim, 0.0),
      bias_(class_names_.size(), 0.0) {
  features_.validate();
  if (class_names_.empty()) throw InputError("classifier needs at least one class");
}

bool ClassifierModel::all_finite() const {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (!finite(weights_) || !finite(bias_)) return false;
  for (auto id : embeddings_.sorted_ids()) {
    const double* row = embeddings_.find(id);
    for (std::size_t k = 0; k < dim(); ++k) {
      if (!std::isfinite(row[k])) return false;
    }
  }
  return true;
}

namespace {

// Mean of embedding rows, summed in ascending id order so the result does
// not depend on the order of `ids`.
std::vector<double> pooled(const ClassifierModel& model, std::span<const FeatureId> ids) {
  std::vector<double> hidden(model.dim(), 0.0);
  if (ids.empty()) return hidden;
  std::vector<FeatureId> sorted(ids.begin(), ids.end());
  std::sort(sorted.begin(), sorted.end());
  for (auto id : sorted) {
    if (const double* row = model.embeddings().find(id)) {
      for (std::size_t k = 0; k < hidden.size(); ++k) hidden[k] += row[k];
    }
  }
  const double inv = 1.0 / static_cast<double>(ids.size());
  for (auto& h : hidden) h *= inv;
  return hidden;
}

std::vector<double> softmax_logits(const ClassifierModel& model, const std::vector<double>& hidden) {
  const auto classes = model.class_count();
  const auto d = model.dim();
  std::vector<double> z(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    double acc = model.bias()[c];
    const double* w = model.weights().data() + c * d;
    for (std::size_t k = 0; k < d; ++k) acc += w[k] * hidden[k];
    z[c] = acc;
  }
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (auto& v : z) v /= sum;
  return z;
}

// Accumulates scale * gradient of -log p(target) into `grad`.
double accumulate_gradient(const ClassifierModel& model, std::span<const FeatureId> ids, std::size_t target,
                           double scale, std::vector<double>& dw, std::vector<double>& db,
                           std::vector<std::pair<FeatureId, std::vector<double>>>& de,
                           std::unordered_map<FeatureId, std::size_t>& de_slot) {
  const auto d = model.dim();
  auto hidden = pooled(model, ids);
  auto p = softmax_logits(model, hidden);
  const double loss = -std::log(std::max(p[target], std::numeric_limits<double>::min()));
  p[target] -= 1.0;  // dz
  std::vector<double> dh(d, 0.0);
  for (std::size_t c = 0; c < p.size(); ++c) {
    const double g = p[c] * scale;
    db[c] += g;
    const double* w = model.weights().data() + c * d;
    double* gw = dw.data() + c * d;
    for (std::size_t k = 0; k < d; ++k) {
      gw[k] += g * hidden[k];
      dh[k] += p[c] * w[k];
    }
  }
  if (!ids.empty()) {
    const double per = scale / static_cast<double>(ids.size());
    for (auto id : ids) {
      auto [it, inserted] = de_slot.emplace(id, de.size());
      if (inserted) de.emplace_back(id, std::vector<double>(d, 0.0));
      auto& row = de[it->second].second;
      for (std::size_t k = 0; k < d; ++k) row[k] += per * dh[k];
    }
  }
  return loss;
}

}  // namespace

std::vector<double> forward(const ClassifierModel& model, std::span<const FeatureId> ids) {
  return softmax_logits(model, pooled(model, ids));
}

Gradient loss_gradient(const ClassifierModel& model, std::span<const FeatureId> ids, std::size_t target) {
  if (target >= model.class_count()) throw InputError("label id out of range");
  Gradient g;
  g.weights.assign(model.weights().size(), 0.0);
  g.bias.assign(model.class_count(), 0.0);
  std::vector<std::pair<FeatureId, std::vector<double>>> de;
  std::unordered_map<FeatureId, std::size_t> slot;
  g.loss = accumulate_gradient(model, ids, target, 1.0, g.weights, g.bias, de, slot);
  for (auto& [id, row] : de) g.embeddings.emplace(id, std::move(row));
  return g;
}

std::vector<Example> make_examples(std::span<const std::pair<std::string, std::size_t>> rows,
                                   const FeatureConfig& config) {
  std::vector<Example> out;
  out.reserve(rows.size());
  for (const auto& [text, label] : rows) out.push_back({featurize(text, config), label});
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw InputError("train config: epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw InputError("train config: learning rate must be > 0");
  if (batch_size < 1) throw InputError("train config: batch size must be >= 1");
  if (validation_fraction < 0.0 || validation_fraction >= 1.0) {
    throw InputError("train config: validation fraction must be in [0, 1)");
  }
}

double mean_loss(const ClassifierModel& model, std::span<const Example> examples) {
  if (examples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& e : examples) {
    auto p = forward(model, e.features);
    total -= std::log(std::max(p[e.label], std::numeric_limits<double>::min()));
  }
  return total / static_cast<double>(examples.size());
}

TrainResult train(std::span<const Example> train_set, std::span<const Example> validation_set,
                  std::vector<std::string> class_names, const TrainConfig& config, const FeatureConfig& features) {
  config.validate();
  features.validate();
  if (train_set.empty()) throw InputError("empty training set");
  const auto classes = class_names.size();
  for (const auto* set : {&train_set, &validation_set}) {
    for (const auto& e : *set) {
      if (e.label >= classes) throw InputError("label id out of range: " + std::to_string(e.label));
      for (auto id : e.features) {
        if (id >= features.bucket_count) throw InputError("feature id outside bucket range");
      }
    }
  }

  ClassifierModel model(features, std::move(class_names));
  Rng rng(config.seed);
  // Rows for n-grams present in the training set start uniform(+-1/sqrt(dim)) in
  // order of first occurrence; all other rows stay zero and unstored. The
  // output layer starts at zero.
  const double range = 1.0 / std::sqrt(static_cast<double>(features.dim));
  for (const auto& e : train_set) {
    for (auto id : e.features) {
      if (model.embeddings().find(id) != nullptr) continue;
      double* row = model.embeddings().ensure(id);
      for (std::size_t k = 0; k < features.dim; ++k) row[k] = rng.uniform(-range, range);
    }
  }
  model.metadata() = {config.seed, config.epochs, config.learning_rate, config.batch_size, 0};

  const auto n = train_set.size();
  const auto batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const double total_steps = static_cast<double>(batches_per_epoch * config.epochs);
  std::size_t step = 0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> dw(model.weights().size());
  std::vector<double> db(classes);
  std::vector<std::pair<FeatureId, std::vector<double>>> de;
  std::unordered_map<FeatureId, std::size_t> de_slot;

  TrainResult result;
  ClassifierModel best = model;
  double best_loss = std::numeric_limits<double>::infinity();
  const bool has_validation = !validation_set.empty();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const auto end = std::min(n, begin + config.batch_size);
      // Per-example step size: the batch gradient is summed, not averaged, so
      // the learning rate keeps its meaning across batch sizes.
      const double scale = 1.0;
      std::fill(dw.begin(), dw.end(), 0.0);
      std::fill(db.begin(), db.end(), 0.0);
      de.clear();
      de_slot.clear();
      for (std::size_t i = begin; i < end; ++i) {
        const auto& ex = train_set[order[i]];
        epoch_loss += accumulate_gradient(model, ex.features, ex.label, scale, dw, db, de, de_slot);
      }
      const double lr = config.learning_rate * (1.0 - static_cast<double>(step) / total_steps);
      ++step;
      auto& w = model.weights();
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * dw[k];
      auto& b = model.bias();
      for (std::size_t c = 0; c < classes; ++c) b[c] -= lr * db[c];
      for (const auto& [id, grad] : de) {
        double* row = model.embeddings().find(id);
        for (std::size_t k = 0; k < grad.size(); ++k) row[k] -= lr * grad[k];
      }
    }
    EpochLoss record;
    record.epoch = epoch;
    record.train_loss = epoch_loss / static_cast<double>(n);
    record.validation_loss = has_validation ? mean_loss(model, validation_set) : mean_loss(model, train_set);
    if (!std::isfinite(record.validation_loss)) throw InvariantError("training diverged (non-finite loss)");
    if (record.validation_loss < best_loss) {
      best_loss = record.validation_loss;
      model.metadata().best_epoch = epoch;
      best = model;
    }
    record.best_validation_loss = best_loss;
    result.history.push_back(record);
  }
  if (!best.all_finite()) throw InvariantError("trained model has non-finite weights");
  result.model = std::move(best);
  return result;
}

TrainResult train(std::span<const Example> examples, std::vector<std::string> class_names, const TrainConfig& config,
                  const FeatureConfig& features) {
  config.validate();
  if (examples.empty()) throw InputError("empty training set");
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.seed ^ 0x5bd1e995ULL);
  shuffle(order, rng);
  auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(examples.size())));
  if (n_val >= examples.size()) n_val = examples.size() - 1;
  std::vector<Example> val, tr;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_val ? val : tr).push_back(examples[order[i]]);
  return train(tr, val, std::move(class_names), config, features);
}

Prediction argmax(std::span<const double> probabilities) {
  Prediction p;
  for (std::size_t c = 0; c < probabilities.size(); ++c) {
    if (c == 0 || probabilities[c] > p.confidence) {
      p.class_id = c;
      p.confidence = probabilities[c];
    }
  }
  return p;
}

Prediction predict_label(const ClassifierModel& model, std::string_view text) {
  auto ids = featurize(text, model.features());
  return argmax(forward(model, ids));
}

std::vector<std::size_t> top_k(const ClassifierModel& model, std::string_view text, std::size_t k) {
  auto p = forward(model, featurize(text, model.features()));
  std::vector<std::size_t> idx(p.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

Metrics evaluate(const ClassifierModel& model, std::span<const Example> test_set, int workers) {
  if (test_set.empty()) throw InputError("empty test set");
  const auto classes = model.class_count();
  std::vector<std::size_t> predicted(test_set.size());
  const auto n = static_cast<std::int64_t>(test_set.size());
#pragma omp parallel for num_threads(workers) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& e = test_set[static_cast<std::size_t>(i)];
    predicted[static_cast<std::size_t>(i)] = argmax(forward(model, e.features)).class_id;
  }
  Metrics m;
  m.total = test_set.size();
  m.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const auto gold = test_set[i].label;
    if (gold >= classes) throw InputError("label id out of range: " + std::to_string(gold));
    ++m.confusion[gold][predicted[i]];
    if (gold == predicted[i]) ++correct;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.total);
  m.precision.assign(classes, 0.0);
  m.recall.assign(classes, 0.0);
  m.support.assign(classes, 0);
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t col = 0;
    for (std::size_t g = 0; g < classes; ++g) col += m.confusion[g][c];
    m.support[c] = std::accumulate(m.confusion[c].begin(), m.confusion[c].end(), std::size_t{0});
    if (col) m.precision[c] = static_cast<double>(m.confusion[c][c]) / static_cast<double>(col);
    if (m.support[c]) m.recall[c] = static_cast<double>(m.confusion[c][c]) / static_cast<double>(m.support[c]);
  }
  return m;
}

nlohmann::json to_json(const Metrics& m, const std::vector<std::string>& class_names) {
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    per.push_back({{"label", class_names[c]},
                   {"precision", m.precision[c]},
                   {"recall", m.recall[c]},
                   {"support", m.support[c]}});
  }
  return {{"accuracy", m.accuracy}, {"total", m.total}, {"labels", per}};
}

void write_confusion_csv(std::ostream& out, const Metrics& m, const std::vector<std::string>& class_names) {
  out << "gold\\predicted";
  for (const auto& name : class_names) out << ',' << name;
  out << '\n';
  for (std::size_t g = 0; g < class_names.size(); ++g) {
    out << class_names[g];
    for (std::size_t p = 0; p < class_names.size(); ++p) out << ',' << m.confusion[g][p];
    out << '\n';
  }
}

namespace {

constexpr char kMagic[8] = {'E', 'D', 'C', 'L', 'S', 'F', 'M', 'D'};
constexpr std::uint32_t kModelVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_doubles(std::ostream& out, const double* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw InputError("model file truncated");
  return v;
}

void get_doubles(std::istream& in, double* data, std::size_t count) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw InputError("model file truncated");
}

}  // namespace

void save_model(std::ostream& out, const ClassifierModel& model) {
  out.write(kMagic, sizeof kMagic);
  put(out, kModelVersion);
  const auto& f = model.features();
  put<std::uint64_t>(out, f.min_order);
  put<std::uint64_t>(out, f.max_order);
  put<std::uint64_t>(out, f.bucket_count);
  put<std::uint64_t>(out, f.dim);
  put<std::uint64_t>(out, f.hash_seed);
  put<std::uint64_t>(out, model.class_count());
  for (const auto& name : model.class_names()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
  }
  const auto& meta = model.metadata();
  put<std::uint64_t>(out, meta.seed);
  put<std::uint64_t>(out, meta.epochs);
  put<double>(out, meta.learning_rate);
  put<std::uint64_t>(out, meta.batch_size);
  put<std::uint64_t>(out, meta.best_epoch);
  put_doubles(out, model.weights().data(), model.weights().size());
  put_doubles(out, model.bias().data(), model.bias().size());
  auto ids = model.embeddings().sorted_ids();
  put<std::uint64_t>(out, ids.size());
  for (auto id : ids) {
    put<std::uint32_t>(out, id);
    put_doubles(out, model.embeddings().find(id), model.dim());
  }
  if (!out) throw InputError("failed writing model");
}

ClassifierModel load_model(std::istream& in) {
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw InputError("not a classifier model file");
  if (get<std::uint32_t>(in) != kModelVersion) throw InputError("unsupported model file version");
  FeatureConfig f;
  f.min_order = get<std::uint64_t>(in);
  f.max_order = get<std::uint64_t>(in);
  f.bucket_count = get<std::uint64_t>(in);
  f.dim = get<std::uint64_t>(in);
  f.hash_seed = get<std::uint64_t>(in);
  f.validate();
  const auto classes = get<std::uint64_t>(in);
  if (classes == 0 || classes > 100000) throw InputError("model file: bad class count");
  std::vector<std::string> names;
  for (std::uint64_t c = 0; c < classes; ++c) {
    auto len = get<std::uint32_t>(in);
    if (len > 4096) throw InputError("model file: bad label name");
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (!in) throw InputError("model file truncated");
    names.push_back(std::move(name));
  }
  ClassifierModel model(f, std::move(names));
  auto& meta = model.metadata();
  meta.seed = get<std::uint64_t>(in);
  meta.epochs = get<std::uint64_t>(in);
  meta.learning_rate = get<double>(in);
  meta.batch_size = get<std::uint64_t>(in);
  meta.best_epoch = get<std::uint64_t>(in);
  get_doubles(in, model.weights().data(), model.weights().size());
  get_doubles(in, model.bias().data(), model.bias().size());
  const auto rows = get<std::uint64_t>(in);
  if (rows > f.bucket_count) throw InputError("model file: too many embedding rows");
  for (std::uint64_t r = 0; r < rows; ++r) {
    auto id = get<std::uint32_t>(in);
    if (id >= f.bucket_count) throw InputError("model file: embedding row outside bucket range");
    get_doubles(in, model.embeddings().ensure(id), f.dim);
  }
  return model;
}

void save_model_file(const std::string& path, const ClassifierModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write model file: " + path);
  save_model(out, model);
}

ClassifierModel load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open model file: " + path);
  return load_model(in);
}

}  // namespace empdialog
