// UCCA foundational-layer passages and graphs.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ucca {

/// Base error type for everything the toolkit signals.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Foundational-layer categories. U (punctuation) is accepted on input;
/// whether it is predicted is a model option.
enum class Category : std::uint8_t { P, S, A, D, C, E, N, R, F, L, H, G, U };

inline constexpr std::size_t kNumCategories = 13;

inline constexpr std::array<Category, kNumCategories> kAllCategories = {
    Category::P, Category::S, Category::A, Category::D, Category::C,
    Category::E, Category::N, Category::R, Category::F, Category::L,
    Category::H, Category::G, Category::U};

std::string_view to_string(Category c);
std::optional<Category> try_parse_category(std::string_view code);
/// Throws ucca::Error on an unknown code.
Category parse_category(std::string_view code);

struct Terminal {
  int position = 0;  // 1-based
  std::string surface;
  std::string pos_tag;
  std::string dep_label;
  std::string entity_type;
  std::string entity_iob = "O";  // B, I or O

  bool operator==(const Terminal&) const = default;
};

struct Edge {
  std::string parent;
  std::string child;
  Category category = Category::A;
  bool remote = false;

  bool operator==(const Edge&) const = default;
};

struct UccaGraph {
  std::vector<std::string> nodes;
  std::vector<Edge> edges;
  std::string root;

  bool operator==(const UccaGraph&) const = default;
};

struct Passage {
  std::string id;
  std::string language;
  std::vector<Terminal> terminals;
  std::optional<UccaGraph> graph;

  int size() const { return static_cast<int>(terminals.size()); }
  bool operator==(const Passage&) const = default;
};

/// Reserved id of the terminal anchored at `position`, e.g. "t3".
std::string terminal_id(int position);
/// Position encoded by a terminal id, or nullopt for internal node ids.
std::optional<int> terminal_position(std::string_view id);

enum class ViolationKind {
  UnknownNode,
  DuplicateNode,
  MissingRoot,
  RootHasParent,
  MultiplePrimaryParents,
  Unreachable,
  Cycle,
  Anchoring,
  TerminalHasChildren,
  EmptyYield,
  RemoteToRoot,
  RemoteDuplicatesPrimary,
  DuplicateEdge,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(ViolationKind kind) const;
  std::string summary() const;
};

/// Checks every structural invariant; never throws on a bad graph.
ValidationReport validate_graph(const UccaGraph& g, int n_tokens);

/// Sorted terminal positions reachable from `node` through primary edges.
/// Throws ucca::Error for an unknown node.
std::vector<int> terminal_yield(const UccaGraph& g, std::string_view node);

/// Yields of every node at once. Assumes the primary edges form a forest;
/// nodes on a primary cycle get whatever was collected before the cycle closed.
std::map<std::string, std::vector<int>> all_yields(const UccaGraph& g);

/// True when the sorted positions form one run without gaps.
bool is_contiguous(const std::vector<int>& positions);

}  // namespace ucca
