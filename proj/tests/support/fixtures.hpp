// Shared test fixtures: hand-built graphs and random generators.

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ucca/graph.hpp"
#include "ucca/tree.hpp"

namespace ucca::testing {

/// "He has tied a sheet around a beam and hanged himself ." with the
/// second Scene reaching "He" through one remote A edge.
Passage figure1_passage();

/// Id of the second Scene ("hanged himself") in figure1_passage().
inline const std::string kFigure1SecondScene = "s2";

UccaGraph make_graph(std::string root, std::vector<std::string> nodes, std::vector<Edge> edges);

struct GraphGenOptions {
  int min_tokens = 1;
  int max_tokens = 15;
  /// Probability that a graph is allowed to scatter a unit's terminals.
  double discontinuity_rate = 0.5;
  int max_remotes = 2;
  double unary_rate = 0.1;
  double multi_category_rate = 0.05;
};

/// A valid random graph over `n` tokens.
UccaGraph random_graph(std::mt19937_64& rng, int n, const GraphGenOptions& options = {});

/// A random valid passage with features and a graph.
Passage random_passage(std::mt19937_64& rng, const GraphGenOptions& options = {}, const std::string& id = "p");

/// True when some node of `g` has a non-contiguous yield.
bool has_discontinuity(const UccaGraph& g);

/// Random properly nested tree over n tokens; some tokens may stay
/// uncovered by width-one spans.
ConstituencyTree random_tree(std::mt19937_64& rng, int n, const std::vector<std::string>& labels);

/// Path under the source tree, e.g. source_path("data/toy").
std::filesystem::path source_path(const std::string& relative);

/// Fresh empty directory under the system temp dir, unique per process.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace ucca::testing
