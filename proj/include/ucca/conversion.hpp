// Reversible UCCA graph <-> constituency tree conversion.
//
// Remote edges are stripped into RemoteRecords. Discontinuous units are
// repaired bottom-up by lifting children to the parent of the broken unit;
// a lifted child keeps its category and its label step is tagged with the
// categories of the unit it left ("A↑E"), so decoded trees can be
// deprojectivized without any side records. For gold conversions the
// DiscontinuityRecords replay the lifts exactly.

#pragma once

#include <string>
#include <vector>

#include "ucca/graph.hpp"
#include "ucca/tree.hpp"

namespace ucca {

/// A remote edge in tree coordinates. Units sharing a yield form a unary
/// chain; depth 0 is the topmost one.
struct RemoteRecord {
  std::vector<int> parent_yield;
  std::vector<int> child_yield;
  Category category = Category::A;
  int parent_depth = 0;
  int child_depth = 0;

  bool operator==(const RemoteRecord&) const = default;
};

/// One lift. `original_parent_yield` is the parent's yield just before this
/// lift; `augmentation_tag` is the "↑..." suffix carried by the child's step.
struct DiscontinuityRecord {
  std::vector<int> moved_child_yield;
  std::vector<int> original_parent_yield;
  std::string augmentation_tag;

  bool operator==(const DiscontinuityRecord&) const = default;
};

struct TreeConversion {
  ConstituencyTree tree;
  std::vector<RemoteRecord> remotes;
  std::vector<DiscontinuityRecord> discontinuities;
};

struct ConversionOptions {
  /// Drop unmatchable records and invalid remotes instead of throwing.
  bool lenient = false;
};

struct ConversionDiagnostics {
  int dropped_remotes = 0;
  int dropped_spans = 0;
  int unresolved_lifts = 0;
  int fallback_terminals = 0;
  std::vector<std::string> warnings;
};

/// Category given to a terminal that no decoded span labels.
inline constexpr Category kFallbackCategory = Category::F;

/// Throws ucca::Error when `g` fails validation.
TreeConversion graph_to_tree(const UccaGraph& g);

UccaGraph tree_to_graph(const ConstituencyTree& t, const std::vector<RemoteRecord>& remotes,
                        const std::vector<DiscontinuityRecord>& discontinuities,
                        const ConversionOptions& options = {},
                        ConversionDiagnostics* diagnostics = nullptr);

/// Id-free description of a graph: one sorted line per edge, naming each
/// endpoint by its yield and depth within its unary chain.
std::vector<std::string> canonical_edges(const UccaGraph& g);

/// Equal up to renaming of internal nodes.
bool structurally_equal(const UccaGraph& a, const UccaGraph& b);

}  // namespace ucca
