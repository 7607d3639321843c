// Writes a seeded synthetic corpus in the dataset layout.
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "empdialog/corpus.hpp"
#include "empdialog/error.hpp"
#include "empdialog/export.hpp"
#include "empdialog/synthetic.hpp"
#include "empdialog/taxonomy.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic dialogue corpus."};
  empdialog::synthetic::CorpusOptions options;
  std::string out;
  app.add_option("--dialogues", options.dialogues, "Number of dialogues")->capture_default_str();
  app.add_option("--seed", options.seed, "Generator seed")->capture_default_str();
  app.add_option("--min-turns", options.min_turns, "Fewest turns per dialogue")->capture_default_str();
  app.add_option("--max-turns", options.max_turns, "Most turns per dialogue")->capture_default_str();
  app.add_option("--out", out, "Output CSV (default stdout)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  try {
    auto corpus = empdialog::synthetic::make_corpus(empdialog::default_label_space(), options);
    std::ostringstream ss;
    empdialog::write_corpus(ss, corpus);
    if (out.empty()) {
      std::cout << ss.str();
    } else {
      empdialog::write_text_file(out, ss.str());
    }
  } catch (const empdialog::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
