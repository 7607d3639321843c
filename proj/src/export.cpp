#include "empdialog/export.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <openssl/evp.h>

#include "empdialog/error.hpp"

namespace empdialog {

namespace {

ArcKind kind_of(const Label& label) {
  if (label.is_emotion()) return ArcKind::Emotion;
  if (label.is_intent()) return ArcKind::Intent;
  return ArcKind::Neutral;
}

// Emotions, then intents, then neutral; alphabetical within each group.
std::vector<std::size_t> arc_order(const LabelSpace& labels) {
  std::vector<std::size_t> ids(labels.class_count());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  std::sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    auto ka = kind_of(labels.class_label(a));
    auto kb = kind_of(labels.class_label(b));
    if (ka != kb) return ka < kb;
    return labels.class_name(a) < labels.class_name(b);
  });
  return ids;
}

std::string join_labels(const std::vector<std::size_t>& ids, const LabelSpace& labels) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out.push_back('>');
    out += labels.class_name(ids[i]);
  }
  return out;
}

}  // namespace

std::string_view arc_kind_name(ArcKind kind) {
  switch (kind) {
    case ArcKind::Emotion:
      return "emotion";
    case ArcKind::Intent:
      return "intent";
    case ArcKind::Neutral:
      break;
  }
  return "neutral";
}

ChordDocument chord_document(const ExchangeMatrix& matrix, const LabelSpace& labels, ChordOptions options) {
  if (matrix.size != labels.class_count()) throw InputError("exchange matrix size does not match label space");
  if (matrix.total_pairs == 0) throw InputError("exchange matrix is all zero");
  const auto n = matrix.size;
  std::vector<std::uint64_t> out_mass(n, 0), in_mass(n, 0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      out_mass[a] += matrix.at(a, b);
      in_mass[b] += matrix.at(a, b);
    }
  }
  ChordDocument doc;
  doc.total_pairs = matrix.total_pairs;
  auto order = arc_order(labels);
  for (auto id : order) {
    if (!options.keep_empty && out_mass[id] == 0 && in_mass[id] == 0) continue;
    doc.arcs.push_back({labels.class_name(id), kind_of(labels.class_label(id)), out_mass[id], in_mass[id]});
  }
  for (auto a : order) {
    for (auto b : order) {
      if (auto w = matrix.at(a, b)) doc.links.push_back({labels.class_name(a), labels.class_name(b), w});
    }
  }
  return doc;
}

SankeyDocument sankey_document(std::span<const FlowPattern> flows, const LabelSpace& labels, std::size_t max_turns,
                               std::uint64_t min_freq) {
  SankeyDocument doc;
  doc.min_freq = min_freq;
  doc.max_turns = max_turns;
  // (turn, label name) -> node id, assigned in sorted order.
  std::map<std::pair<std::size_t, std::string>, std::size_t> nodes;
  for (const auto& p : flows) {
    for (std::size_t k = 0; k < p.labels.size(); ++k) nodes.emplace(std::make_pair(k + 1, labels.class_name(p.labels[k])), 0);
  }
  std::size_t next = 0;
  for (auto& [key, id] : nodes) {
    id = next++;
    doc.nodes.push_back({id, key.first, key.second});
  }
  std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> links;
  for (const auto& p : flows) {
    if (p.labels.size() < 2) continue;
    const auto k = p.labels.size() - 1;  // link from turn k to k+1
    auto src = nodes.at({k, labels.class_name(p.labels[k - 1])});
    auto dst = nodes.at({k + 1, labels.class_name(p.labels[k])});
    links[{src, dst}] += p.frequency;
  }
  for (const auto& [key, w] : links) doc.links.push_back({key.first, key.second, w});
  return doc;
}

nlohmann::json to_json(const ChordDocument& doc) {
  nlohmann::json arcs = nlohmann::json::array();
  for (const auto& a : doc.arcs) {
    arcs.push_back({{"label", a.label}, {"kind", arc_kind_name(a.kind)}, {"out_mass", a.out_mass}, {"in_mass", a.in_mass}});
  }
  nlohmann::json links = nlohmann::json::array();
  for (const auto& l : doc.links) links.push_back({{"source", l.source}, {"target", l.target}, {"weight", l.weight}});
  return {{"version", kDocumentVersion}, {"kind", "chord"}, {"total_pairs", doc.total_pairs}, {"arcs", arcs}, {"links", links}};
}

nlohmann::json to_json(const SankeyDocument& doc) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : doc.nodes) nodes.push_back({{"id", n.id}, {"turn", n.turn}, {"label", n.label}});
  nlohmann::json links = nlohmann::json::array();
  for (const auto& l : doc.links) links.push_back({{"source", l.source}, {"target", l.target}, {"weight", l.weight}});
  return {{"version", kDocumentVersion}, {"kind", "sankey"}, {"min_freq", doc.min_freq},
          {"max_turns", doc.max_turns},  {"nodes", nodes},   {"links", links}};
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_exchange_csv(std::ostream& out, const ExchangeMatrix& matrix, const LabelSpace& labels) {
  out << "from,to,count\n";
  for (std::size_t a = 0; a < matrix.size; ++a) {
    for (std::size_t b = 0; b < matrix.size; ++b) {
      if (auto c = matrix.at(a, b)) {
        out << csv_field(labels.class_name(a)) << ',' << csv_field(labels.class_name(b)) << ',' << c << '\n';
      }
    }
  }
}

void write_flows_csv(std::ostream& out, std::span<const FlowPattern> flows, const LabelSpace& labels) {
  out << "length,frequency,sequence\n";
  for (const auto& p : flows) {
    out << p.labels.size() << ',' << p.frequency << ',' << csv_field(join_labels(p.labels, labels)) << '\n';
  }
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw InvariantError("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw InputError("failed writing " + path.string());
}

std::string dump_json(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

std::vector<ManifestEntry> export_tables(const ExportInputs& inputs, const std::filesystem::path& directory) {
  if (inputs.matrix == nullptr || inputs.labels == nullptr) throw InvariantError("export needs a matrix and labels");
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec || !std::filesystem::is_directory(directory)) throw InputError("cannot create output directory " + directory.string());

  const auto& labels = *inputs.labels;
  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back("stats.json", dump_json(inputs.stats));
  files.emplace_back("metrics.json", dump_json(inputs.metrics));
  {
    std::ostringstream ss;
    write_exchange_csv(ss, *inputs.matrix, labels);
    files.emplace_back("exchange_matrix.csv", ss.str());
  }
  {
    std::ostringstream ss;
    write_flows_csv(ss, inputs.flows, labels);
    files.emplace_back("flows.csv", ss.str());
  }
  files.emplace_back("chord.json", dump_json(to_json(chord_document(*inputs.matrix, labels))));
  files.emplace_back("sankey.json", dump_json(to_json(
                                        sankey_document(inputs.flows, labels, inputs.flow_options.max_turns,
                                                        inputs.flow_options.min_freq))));

  std::vector<ManifestEntry> manifest;
  nlohmann::json listed = nlohmann::json::array();
  for (const auto& [name, content] : files) {
    write_text_file(directory / name, content);
    ManifestEntry e{name, sha256_hex(content), content.size()};
    listed.push_back({{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}});
    manifest.push_back(std::move(e));
  }
  nlohmann::json doc = {{"version", kDocumentVersion},
                        {"seed", inputs.seed},
                        {"min_freq", inputs.flow_options.min_freq},
                        {"max_turns", inputs.flow_options.max_turns},
                        {"files", listed}};
  write_text_file(directory / "manifest.json", dump_json(doc));
  return manifest;
}

}  // namespace empdialog
