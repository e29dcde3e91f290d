// Passage files, corpora, external vectors, tree files and importers.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ucca/conversion.hpp"
#include "ucca/encoder.hpp"
#include "ucca/graph.hpp"

namespace ucca {

using Json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kFormatVersion = 1;

Json passage_to_json(const Passage& p);
/// Throws ucca::Error on a schema violation or an unknown category code.
/// Does not validate the graph.
Passage passage_from_json(const Json& j);

/// Two-space indented JSON with sorted keys and a trailing newline.
std::string dump_json(const Json& j);

void save_passage(const Passage& p, const fs::path& path);
Passage load_passage(const fs::path& path);

struct LoadOptions {
  /// Skip bad passages with a warning instead of failing.
  bool lenient = false;
  std::optional<std::string> language;
  /// Passages without a graph are accepted (parser input).
  bool allow_unannotated = false;
};

struct Corpus {
  std::vector<Passage> passages;
  std::vector<std::string> warnings;
  int skipped = 0;
};

/// `path` is a directory of *.json passage files (read in name order,
/// subdirectories included), a bundle {"format": 1, "passages": [...]} or
/// one passage file. Graphs are validated; in strict mode the first invalid
/// passage raises ucca::Error naming every violation.
Corpus load_corpus(const fs::path& path, const LoadOptions& options = {});

/// A path ending in ".json" becomes one bundle file, anything else a
/// directory with one <id>.json per passage.
void save_corpus(const std::vector<Passage>& passages, const fs::path& path);

struct SplitStats {
  int passages = 0;
  long tokens = 0;
  long nodes = 0;
  long primary_edges = 0;
  long remote_edges = 0;
  int with_remotes = 0;
  int discontinuous = 0;
  std::map<std::string, int> languages;
};

struct CorpusStats {
  /// Keyed by split ("train", "validation", "test"), or "all" for a corpus
  /// without split subdirectories.
  std::map<std::string, SplitStats> splits;
};

/// Split directories are named train, validation (or dev) and test.
CorpusStats corpus_stats(const fs::path& path, const LoadOptions& options = {});
std::string format_stats_table(const CorpusStats& stats);
Json stats_to_json(const CorpusStats& stats);

/// Text file: a "dim <k>" header, then "<passage id> <position> <k values>"
/// per token. Every passage needs rows for positions 1..n.
ExternalVectors load_external_vectors(const fs::path& path);
void save_external_vectors(const ExternalVectors& vectors, const fs::path& path);

struct ImportReport {
  int passages = 0;
  int implicit_units = 0;
  int linkage_nodes = 0;
  std::vector<std::string> warnings;
};

/// UCCA XML passage files (a file or a directory of *.xml).
std::vector<Passage> import_ucca_xml(const fs::path& path, const std::string& language,
                                     ImportReport* report = nullptr);
/// MRP JSON lines with framework "ucca".
std::vector<Passage> import_mrp(const fs::path& path, const std::string& language,
                                ImportReport* report = nullptr);

/// Fills POS, dependency, entity and IOB features from CoNLL-U. Sentences
/// are matched by "# sent_id" when present, otherwise by order. Named
/// entities come from MISC "NER=B-PER" style values.
void apply_conllu(std::vector<Passage>& passages, const fs::path& path);

/// One converted passage of a tree file.
struct TreeEntry {
  std::string id;
  std::string language;
  std::vector<Terminal> terminals;
  TreeConversion conversion;
};

Json tree_entry_to_json(const TreeEntry& e);
TreeEntry tree_entry_from_json(const Json& j);
void save_tree_file(const std::vector<TreeEntry>& entries, const fs::path& path);
std::vector<TreeEntry> load_tree_file(const fs::path& path);

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, const std::string& content);

}  // namespace ucca
