#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "empdialog/analysis.hpp"
#include "empdialog/taxonomy.hpp"

namespace empdialog {

enum class ArcKind { Emotion, Intent, Neutral };
std::string_view arc_kind_name(ArcKind kind);

struct ChordArc {
  std::string label;
  ArcKind kind = ArcKind::Emotion;
  std::uint64_t out_mass = 0;
  std::uint64_t in_mass = 0;
};

struct ChordLink {
  std::string source;
  std::string target;
  std::uint64_t weight = 0;
};

struct ChordDocument {
  std::vector<ChordArc> arcs;
  std::vector<ChordLink> links;
  std::uint64_t total_pairs = 0;
};

struct ChordOptions {
  bool keep_empty = false;
};

/// Throws InputError on an all-zero matrix.
ChordDocument chord_document(const ExchangeMatrix& matrix, const LabelSpace& labels, ChordOptions options = {});

struct SankeyNode {
  std::size_t id = 0;
  std::size_t turn = 0;
  std::string label;
};

struct SankeyLink {
  std::size_t source = 0;
  std::size_t target = 0;
  std::uint64_t weight = 0;
};

struct SankeyDocument {
  std::vector<SankeyNode> nodes;
  std::vector<SankeyLink> links;
  std::uint64_t min_freq = 0;
  std::size_t max_turns = 0;
};

SankeyDocument sankey_document(std::span<const FlowPattern> flows, const LabelSpace& labels, std::size_t max_turns,
                               std::uint64_t min_freq);

inline constexpr int kDocumentVersion = 1;

nlohmann::json to_json(const ChordDocument& doc);
nlohmann::json to_json(const SankeyDocument& doc);

/// Minimal RFC 4180 field quoting.
std::string csv_field(std::string_view value);

void write_exchange_csv(std::ostream& out, const ExchangeMatrix& matrix, const LabelSpace& labels);
void write_flows_csv(std::ostream& out, std::span<const FlowPattern> flows, const LabelSpace& labels);

/// Hex SHA-256 of a byte string / file.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

struct ManifestEntry {
  std::string path;
  std::string sha256;
  std::uint64_t bytes = 0;
};

struct ExportInputs {
  nlohmann::json stats;
  nlohmann::json metrics;
  const ExchangeMatrix* matrix = nullptr;
  std::span<const FlowPattern> flows;
  const LabelSpace* labels = nullptr;
  FlowOptions flow_options;
  std::uint64_t seed = 0;
};

/// Write stats.json, metrics.json, exchange_matrix.csv, flows.csv,
/// chord.json and sankey.json plus manifest.json. Throws InputError when
/// the directory cannot be written.
std::vector<ManifestEntry> export_tables(const ExportInputs& inputs, const std::filesystem::path& directory);

/// Write text to a file, throwing InputError on failure.
void write_text_file(const std::filesystem::path& path, std::string_view content);
/// Serialize JSON with fixed formatting and a trailing newline.
std::string dump_json(const nlohmann::json& doc);

}  // namespace empdialog
