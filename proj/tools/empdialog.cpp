// Command-line driver for the corpus annotation and analysis pipeline.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "empdialog/analysis.hpp"
#include "empdialog/classifier.hpp"
#include "empdialog/corpus.hpp"
#include "empdialog/error.hpp"
#include "empdialog/export.hpp"
#include "empdialog/lexicon.hpp"
#include "empdialog/taxonomy.hpp"

namespace fs = std::filesystem;
using namespace empdialog;

namespace {

struct RunConfig {
  std::vector<std::string> corpus;
  std::string labels;
  std::string patterns;
  std::string model;
  std::uint64_t seed = 13;
  std::string policy = "lexicon-first";
  std::uint64_t min_freq = 5;
  std::size_t max_turns = 4;
  std::string out;
  std::string out_dir;
  int workers = 1;
  bool strict = false;
  std::size_t max_gap = 5;
};

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? std::string(v) : fallback;
}

void require_file(const std::string& path, std::string_view what) {
  if (path.empty()) throw InputError(std::string(what) + " path not given");
  if (!fs::is_regular_file(path)) throw InputError("missing " + std::string(what) + ": " + path);
}

LabelSpace load_labels(const RunConfig& cfg) {
  if (cfg.labels.empty()) return default_label_space();
  require_file(cfg.labels, "label config");
  return load_label_config_file(cfg.labels);
}

PatternSet load_patterns(const RunConfig& cfg) {
  MatchOptions opts{cfg.max_gap};
  if (cfg.patterns.empty()) return compile_patterns(default_pattern_source(), opts);
  require_file(cfg.patterns, "pattern file");
  return compile_patterns_file(cfg.patterns, opts);
}

std::vector<Dialogue> load_corpus(const RunConfig& cfg, const LabelSpace& labels) {
  if (cfg.corpus.empty()) throw InputError("no --corpus given");
  for (const auto& path : cfg.corpus) require_file(path, "corpus file");
  ParseOptions options;
  options.strict = cfg.strict;
  options.labels = &labels;
  auto parsed = parse_corpus_files(cfg.corpus, options);
  if (!parsed.warnings.empty()) {
    std::map<ParseWarning::Kind, std::size_t> counts;
    for (const auto& w : parsed.warnings) ++counts[w.kind];
    std::cerr << "parse warnings: " << parsed.warnings.size() << " (first: " << parsed.warnings.front().dialogue_id
              << ": " << parsed.warnings.front().message << ")\n";
  }
  return std::move(parsed.dialogues);
}

void write_or_print(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    write_text_file(path, content);
  }
}

fs::path ensure_dir(const std::string& dir) {
  if (dir.empty()) throw InputError("--out-dir not given");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw InputError("cannot create directory " + dir);
  return dir;
}

std::vector<AnnotatedDialogue> load_annotated(const std::string& path, const LabelSpace& labels) {
  require_file(path, "annotations file");
  std::ifstream in(path);
  auto rows = read_annotations(in, labels);
  return group_annotations(rows);
}

std::vector<Example> load_examples(const std::string& path, const LabelSpace& labels, const FeatureConfig& features) {
  require_file(path, "labeled split");
  std::ifstream in(path);
  auto rows = read_labeled(in, labels);
  std::vector<Example> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({featurize(r.text, features), labels.class_id(r.label)});
  return out;
}

std::vector<std::string> class_names(const LabelSpace& labels) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < labels.class_count(); ++c) names.push_back(labels.class_name(c));
  return names;
}

int cmd_stats(const RunConfig& cfg) {
  auto labels = load_labels(cfg);
  auto corpus = load_corpus(cfg, labels);
  auto report = corpus_stats(corpus, cfg.workers);
  write_or_print(cfg.out, dump_json(to_json(report)));
  return 0;
}

int cmd_tag(const RunConfig& cfg) {
  auto labels = load_labels(cfg);
  auto patterns = load_patterns(cfg);
  auto corpus = load_corpus(cfg, labels);
  std::vector<Annotation> rows;
  std::map<std::string, std::size_t> histogram;
  for (const auto& d : corpus) {
    Valence context = d.emotion_index ? labels.emotions()[*d.emotion_index].valence : Valence::None;
    for (const auto& u : d.utterances) {
      if (u.role != Role::Listener) continue;
      for (const auto& s : u.sentences) {
        auto a = tag_listener_sentence(patterns, s.text, context);
        if (!a) continue;
        a->dialogue_id = d.id;
        a->turn_index = u.turn_index;
        a->sentence_index = s.index;
        ++histogram[labels.name(a->label)];
        rows.push_back(std::move(*a));
      }
    }
  }
  std::ostringstream ss;
  write_annotations(ss, rows, labels);
  if (cfg.out.empty()) throw InputError("--out not given");
  write_text_file(cfg.out, ss.str());
  for (const auto& [name, count] : histogram) std::cout << name << '\t' << count << '\n';
  return 0;
}

struct BootstrapArgs {
  std::size_t per_label_cap = 800;
  double train = 25023.0, valid = 3544.0, test = 3225.0;
};

int cmd_bootstrap(const RunConfig& cfg, const BootstrapArgs& args) {
  auto labels = load_labels(cfg);
  auto patterns = load_patterns(cfg);
  auto corpus = load_corpus(cfg, labels);
  auto dir = ensure_dir(cfg.out_dir);
  BootstrapOptions options{cfg.seed, args.per_label_cap};
  auto examples = bootstrap_training_set(corpus, patterns, labels, options);
  auto splits = split_examples(examples, labels, {args.train, args.valid, args.test}, cfg.seed);
  auto write = [&](const char* name, const std::vector<LabeledText>& rows) {
    std::ostringstream ss;
    write_labeled(ss, rows, labels);
    write_text_file(dir / name, ss.str());
  };
  write("train.tsv", splits.train);
  write("valid.tsv", splits.validation);
  write("test.tsv", splits.test);
  nlohmann::json info = {{"seed", cfg.seed},
                         {"per_label_cap", args.per_label_cap},
                         {"examples", examples.size()},
                         {"requested_fractions", {args.train, args.valid, args.test}},
                         {"sizes", {{"train", splits.train.size()}, {"valid", splits.validation.size()}, {"test", splits.test.size()}}}};
  write_text_file(dir / "bootstrap.json", dump_json(info));
  std::cout << "train " << splits.train.size() << "\nvalid " << splits.validation.size() << "\ntest "
            << splits.test.size() << '\n';
  return 0;
}

struct TrainArgs {
  std::string train, valid, history;
  TrainConfig config;
  FeatureConfig features;
};

int cmd_train(const RunConfig& cfg, TrainArgs args) {
  auto labels = load_labels(cfg);
  if (cfg.model.empty()) throw InputError("--model output path not given");
  args.config.seed = cfg.seed;
  args.features.validate();
  auto train_set = load_examples(args.train, labels, args.features);
  TrainResult result;
  if (!args.valid.empty()) {
    auto valid_set = load_examples(args.valid, labels, args.features);
    result = train(train_set, valid_set, class_names(labels), args.config, args.features);
  } else {
    result = train(train_set, class_names(labels), args.config, args.features);
  }
  save_model_file(cfg.model, result.model);
  std::ostringstream hist;
  hist << "epoch,train_loss,validation_loss,best_validation_loss\n";
  hist.precision(17);
  for (const auto& e : result.history) {
    hist << e.epoch << ',' << e.train_loss << ',' << e.validation_loss << ',' << e.best_validation_loss << '\n';
  }
  write_text_file(args.history.empty() ? cfg.model + ".history.csv" : args.history, hist.str());
  std::cout << "best_epoch " << result.model.metadata().best_epoch << "\nmodel_sha256 " << sha256_file(cfg.model)
            << '\n';
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& test_path, const std::string& confusion) {
  auto labels = load_labels(cfg);
  require_file(cfg.model, "model");
  auto model = load_model_file(cfg.model);
  if (model.class_count() != labels.class_count()) throw InputError("model does not match the label config");
  auto test_set = load_examples(test_path, labels, model.features());
  auto metrics = evaluate(model, test_set, cfg.workers);
  write_or_print(cfg.out, dump_json(to_json(metrics, model.class_names())));
  if (!confusion.empty()) {
    std::ostringstream ss;
    write_confusion_csv(ss, metrics, model.class_names());
    write_text_file(confusion, ss.str());
  }
  return 0;
}

int cmd_annotate(const RunConfig& cfg, const std::string& manual_path) {
  auto labels = load_labels(cfg);
  auto patterns = load_patterns(cfg);
  AnnotateOptions options;
  options.workers = cfg.workers;
  if (cfg.policy == "lexicon-first") {
    options.policy = AnnotationPolicy::LexiconFirst;
  } else if (cfg.policy == "model-only") {
    options.policy = AnnotationPolicy::ModelOnly;
  } else {
    throw InputError("unknown policy: " + cfg.policy);
  }
  ManualLabels manual;
  if (!manual_path.empty()) {
    require_file(manual_path, "manual labels");
    std::ifstream in(manual_path);
    for (const auto& a : read_annotations(in, labels)) manual.labels[{a.dialogue_id, a.turn_index, a.sentence_index}] = a.label;
    options.manual = &manual;
  }
  std::optional<ClassifierModel> model;
  if (!cfg.model.empty()) {
    require_file(cfg.model, "model");
    model = load_model_file(cfg.model);
  }
  auto corpus = load_corpus(cfg, labels);
  auto annotated = annotate_corpus(corpus, model ? &*model : nullptr, patterns, labels, options);
  auto rows = flatten_annotations(annotated);
  std::ostringstream ss;
  write_annotations(ss, rows, labels);
  if (cfg.out.empty()) throw InputError("--out not given");
  write_text_file(cfg.out, ss.str());
  return 0;
}

int cmd_analyze(const RunConfig& cfg, const std::string& annotations) {
  auto labels = load_labels(cfg);
  auto corpus = load_annotated(annotations, labels);
  auto dir = ensure_dir(cfg.out_dir);
  FlowOptions flow{cfg.max_turns, cfg.min_freq};
  auto matrix = exchange_matrix(corpus, labels, cfg.workers);
  auto flows = mine_flows(corpus, labels, flow, cfg.workers);
  std::ostringstream m, f;
  write_exchange_csv(m, matrix, labels);
  write_flows_csv(f, flows, labels);
  write_text_file(dir / "exchange_matrix.csv", m.str());
  write_text_file(dir / "flows.csv", f.str());
  nlohmann::json dist = nlohmann::json::object();
  for (std::size_t pos = 1; pos <= 8; ++pos) {
    nlohmann::json at = nlohmann::json::object();
    for (const auto& [id, frac] : turn_position_distribution(corpus, labels, pos)) at[labels.class_name(id)] = frac;
    dist[std::to_string(pos)] = at;
  }
  write_text_file(dir / "turn_distribution.json", dump_json(dist));
  write_text_file(dir / "analysis.json", dump_json({{"seed", cfg.seed},
                                                    {"min_freq", flow.min_freq},
                                                    {"max_turns", flow.max_turns},
                                                    {"dialogues", corpus.size()},
                                                    {"total_pairs", matrix.total_pairs},
                                                    {"flows", flows.size()}}));
  std::cout << "pairs " << matrix.total_pairs << "\nflows " << flows.size() << '\n';
  return 0;
}

nlohmann::json read_json(const std::string& path, std::string_view what) {
  require_file(path, what);
  std::ifstream in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string(what) + " " + path + ": " + e.what());
  }
}

int cmd_export(const RunConfig& cfg, const std::string& stats, const std::string& metrics,
               const std::string& annotations) {
  auto labels = load_labels(cfg);
  ExportInputs inputs;
  inputs.stats = read_json(stats, "stats file");
  inputs.metrics = read_json(metrics, "metrics file");
  auto corpus = load_annotated(annotations, labels);
  FlowOptions flow{cfg.max_turns, cfg.min_freq};
  auto matrix = exchange_matrix(corpus, labels, cfg.workers);
  auto flows = mine_flows(corpus, labels, flow, cfg.workers);
  inputs.matrix = &matrix;
  inputs.flows = flows;
  inputs.labels = &labels;
  inputs.flow_options = flow;
  inputs.seed = cfg.seed;
  auto manifest = export_tables(inputs, ensure_dir(cfg.out_dir));
  for (const auto& e : manifest) std::cout << e.sha256 << "  " << e.path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Annotate empathetic dialogues with emotions and response intents, then mine exchange patterns."};
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig cfg;
  cfg.labels = env_or("EMPDIALOG_LABELS", "");
  cfg.patterns = env_or("EMPDIALOG_PATTERNS", "");
  app.add_option("--labels", cfg.labels, "Label config JSON (default: $EMPDIALOG_LABELS or built-in)");
  app.add_option("--patterns", cfg.patterns, "Pattern DSL file (default: $EMPDIALOG_PATTERNS or built-in)");
  app.add_option("--seed", cfg.seed, "Seed for all randomness")->capture_default_str();
  app.add_option("--workers", cfg.workers, "Worker threads; outputs do not depend on it")
      ->check(CLI::Range(1, 1024))
      ->capture_default_str();
  app.add_option("--max-gap", cfg.max_gap, "Maximum tokens covered by an interior pattern gap")
      ->check(CLI::Range(1, 64))
      ->capture_default_str();

  auto* stats = app.add_subcommand("stats", "Corpus statistics as JSON");
  stats->add_option("--corpus", cfg.corpus, "Corpus file(s)")->required();
  stats->add_option("--out", cfg.out, "Output file (default stdout)");
  stats->add_flag("--strict", cfg.strict, "Drop dialogues failing turn checks");

  auto* tag = app.add_subcommand("tag", "Lexicon-only tagging of listener sentences");
  tag->add_option("--corpus", cfg.corpus, "Corpus file(s)")->required();
  tag->add_option("--out", cfg.out, "Annotations CSV")->required();

  BootstrapArgs boot;
  auto* bootstrap = app.add_subcommand("bootstrap", "Build train/valid/test splits from lexicon matches");
  bootstrap->add_option("--corpus", cfg.corpus, "Corpus file(s)")->required();
  bootstrap->add_option("--out-dir", cfg.out_dir, "Directory for split files")->required();
  bootstrap->add_option("--per-label-cap", boot.per_label_cap, "Max examples per class (0 = none)")->capture_default_str();
  bootstrap->add_option("--train-frac", boot.train, "Relative training share")->capture_default_str();
  bootstrap->add_option("--valid-frac", boot.valid, "Relative validation share")->capture_default_str();
  bootstrap->add_option("--test-frac", boot.test, "Relative test share")->capture_default_str();

  TrainArgs targs;
  auto* trn = app.add_subcommand("train", "Train the hashed n-gram classifier");
  trn->add_option("--train", targs.train, "Training split (label<TAB>text)")->required();
  trn->add_option("--valid", targs.valid, "Validation split; otherwise held out from --train");
  trn->add_option("--model", cfg.model, "Output model file")->required();
  trn->add_option("--history", targs.history, "Loss history CSV (default <model>.history.csv)");
  trn->add_option("--epochs", targs.config.epochs, "Epochs")->capture_default_str();
  trn->add_option("--lr", targs.config.learning_rate, "Peak learning rate")->capture_default_str();
  trn->add_option("--batch", targs.config.batch_size, "Batch size")->capture_default_str();
  trn->add_option("--valid-frac", targs.config.validation_fraction, "Held-out fraction without --valid")
      ->capture_default_str();
  trn->add_option("--dim", targs.features.dim, "Embedding dimension")->capture_default_str();
  trn->add_option("--buckets", targs.features.bucket_count, "Hash buckets (power of two)")->capture_default_str();
  trn->add_option("--min-n", targs.features.min_order, "Smallest n-gram order")->capture_default_str();
  trn->add_option("--max-n", targs.features.max_order, "Largest n-gram order")->capture_default_str();

  std::string test_path, confusion;
  auto* ev = app.add_subcommand("eval", "Evaluate a model on a labeled split");
  ev->add_option("--model", cfg.model, "Model file")->required();
  ev->add_option("--test", test_path, "Test split")->required();
  ev->add_option("--out", cfg.out, "Metrics JSON (default stdout)");
  ev->add_option("--confusion", confusion, "Confusion matrix CSV");

  std::string manual;
  auto* ann = app.add_subcommand("annotate", "Label every sentence of the corpus");
  ann->add_option("--corpus", cfg.corpus, "Corpus file(s)")->required();
  ann->add_option("--model", cfg.model, "Model file");
  ann->add_option("--policy", cfg.policy, "lexicon-first or model-only")
      ->check(CLI::IsMember({"lexicon-first", "model-only"}))
      ->capture_default_str();
  ann->add_option("--manual", manual, "Gold labels in annotation-row format");
  ann->add_option("--out", cfg.out, "Annotated corpus CSV")->required();

  std::string annotations;
  auto* an = app.add_subcommand("analyze", "Exchange matrix, flow patterns and turn distributions");
  an->add_option("--annotations", annotations, "Annotated corpus CSV")->required();
  an->add_option("--min-freq", cfg.min_freq, "Minimum flow frequency")->capture_default_str();
  an->add_option("--max-turns", cfg.max_turns, "Maximum flow length")->capture_default_str();
  an->add_option("--out-dir", cfg.out_dir, "Output directory")->required();

  std::string stats_path, metrics_path;
  auto* ex = app.add_subcommand("export", "Chord/Sankey documents, tables and manifest");
  ex->add_option("--stats", stats_path, "stats JSON")->required();
  ex->add_option("--metrics", metrics_path, "metrics JSON")->required();
  ex->add_option("--annotations", annotations, "Annotated corpus CSV")->required();
  ex->add_option("--min-freq", cfg.min_freq, "Minimum flow frequency")->capture_default_str();
  ex->add_option("--max-turns", cfg.max_turns, "Maximum flow length")->capture_default_str();
  ex->add_option("--out-dir", cfg.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*stats) return cmd_stats(cfg);
    if (*tag) return cmd_tag(cfg);
    if (*bootstrap) return cmd_bootstrap(cfg, boot);
    if (*trn) return cmd_train(cfg, targs);
    if (*ev) return cmd_eval(cfg, test_path, confusion);
    if (*ann) return cmd_annotate(cfg, manual);
    if (*an) return cmd_analyze(cfg, annotations);
    if (*ex) return cmd_export(cfg, stats_path, metrics_path, annotations);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
