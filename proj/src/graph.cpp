#include "ucca/graph.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace ucca {

namespace {

constexpr std::array<std::string_view, kNumCategories> kCategoryCodes = {
    "P", "S", "A", "D", "C", "E", "N", "R", "F", "L", "H", "G", "U"};

}  // namespace

std::string_view to_string(Category c) {
  return kCategoryCodes[static_cast<std::size_t>(c)];
}

std::optional<Category> try_parse_category(std::string_view code) {
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    if (kCategoryCodes[i] == code) return kAllCategories[i];
  }
  return std::nullopt;
}

Category parse_category(std::string_view code) {
  if (auto c = try_parse_category(code)) return *c;
  throw Error("unknown UCCA category '" + std::string(code) + "'");
}

std::string terminal_id(int position) { return "t" + std::to_string(position); }

std::optional<int> terminal_position(std::string_view id) {
  if (id.size() < 2 || id.front() != 't') return std::nullopt;
  if (id[1] == '0') return std::nullopt;
  int value = 0;
  auto [ptr, ec] = std::from_chars(id.data() + 1, id.data() + id.size(), value);
  if (ec != std::errc() || ptr != id.data() + id.size()) return std::nullopt;
  return value;
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::UnknownNode: return "unknown-node";
    case ViolationKind::DuplicateNode: return "duplicate-node";
    case ViolationKind::MissingRoot: return "missing-root";
    case ViolationKind::RootHasParent: return "root-has-parent";
    case ViolationKind::MultiplePrimaryParents: return "multiple-primary-parents";
    case ViolationKind::Unreachable: return "unreachable";
    case ViolationKind::Cycle: return "cycle";
    case ViolationKind::Anchoring: return "anchoring";
    case ViolationKind::TerminalHasChildren: return "terminal-has-children";
    case ViolationKind::EmptyYield: return "empty-yield";
    case ViolationKind::RemoteToRoot: return "remote-to-root";
    case ViolationKind::RemoteDuplicatesPrimary: return "remote-duplicates-primary";
    case ViolationKind::DuplicateEdge: return "duplicate-edge";
  }
  return "?";
}

bool ValidationReport::has(ViolationKind kind) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.kind == kind; });
}

std::string ValidationReport::summary() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) out << "; ";
    out << to_string(violations[i].kind) << ": " << violations[i].message;
  }
  return out.str();
}

ValidationReport validate_graph(const UccaGraph& g, int n_tokens) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, std::string message) {
    report.violations.push_back({kind, std::move(message)});
  };

  std::unordered_set<std::string> nodes;
  for (const auto& id : g.nodes) {
    if (!nodes.insert(id).second) add(ViolationKind::DuplicateNode, "node '" + id + "' listed twice");
  }

  const bool root_known = nodes.count(g.root) > 0;
  if (!root_known) add(ViolationKind::MissingRoot, "root '" + g.root + "' is not a node");
  if (terminal_position(g.root)) add(ViolationKind::Anchoring, "root '" + g.root + "' is a terminal");

  // Anchoring: terminal ids are exactly t1..tn.
  std::vector<int> seen(static_cast<std::size_t>(std::max(n_tokens, 0)) + 1, 0);
  for (const auto& id : nodes) {
    if (auto pos = terminal_position(id)) {
      if (*pos < 1 || *pos > n_tokens) {
        add(ViolationKind::Anchoring, "terminal '" + id + "' outside 1.." + std::to_string(n_tokens));
      } else {
        ++seen[static_cast<std::size_t>(*pos)];
      }
    }
  }
  for (int p = 1; p <= n_tokens; ++p) {
    if (seen[static_cast<std::size_t>(p)] == 0) {
      add(ViolationKind::Anchoring, "token " + std::to_string(p) + " has no terminal node");
    }
  }

  std::unordered_map<std::string, std::vector<std::string>> primary_children;
  std::unordered_map<std::string, std::vector<std::string>> all_children;
  std::unordered_map<std::string, std::set<std::string>> primary_parents;
  std::set<std::tuple<std::string, std::string, Category, bool>> edge_set;
  std::set<std::pair<std::string, std::string>> primary_pairs;

  for (const auto& e : g.edges) {
    const bool known = nodes.count(e.parent) && nodes.count(e.child);
    if (!known) {
      add(ViolationKind::UnknownNode, "edge " + e.parent + "->" + e.child + " references an unknown node");
      continue;
    }
    if (!edge_set.insert({e.parent, e.child, e.category, e.remote}).second) {
      add(ViolationKind::DuplicateEdge, "edge " + e.parent + "->" + e.child + " (" +
                                            std::string(to_string(e.category)) + ") repeated");
    }
    if (terminal_position(e.parent)) {
      add(ViolationKind::TerminalHasChildren, "terminal '" + e.parent + "' has outgoing edge");
    }
    all_children[e.parent].push_back(e.child);
    if (!e.remote) {
      primary_children[e.parent].push_back(e.child);
      primary_parents[e.child].insert(e.parent);
      primary_pairs.insert({e.parent, e.child});
    }
  }

  for (const auto& e : g.edges) {
    if (!e.remote || !nodes.count(e.parent) || !nodes.count(e.child)) continue;
    if (e.child == g.root) add(ViolationKind::RemoteToRoot, "remote edge from '" + e.parent + "' targets the root");
    if (primary_pairs.count({e.parent, e.child})) {
      add(ViolationKind::RemoteDuplicatesPrimary,
          "remote edge " + e.parent + "->" + e.child + " duplicates a primary edge");
    }
  }

  for (const auto& id : g.nodes) {
    auto it = primary_parents.find(id);
    const std::size_t count = it == primary_parents.end() ? 0 : it->second.size();
    if (id == g.root) {
      if (count > 0) add(ViolationKind::RootHasParent, "root '" + id + "' has a primary parent");
    } else if (count > 1) {
      add(ViolationKind::MultiplePrimaryParents, "node '" + id + "' has " + std::to_string(count) + " primary parents");
    }
  }

  // Reachability from the root over primary edges.
  if (root_known) {
    std::unordered_set<std::string> reached{g.root};
    std::vector<std::string> stack{g.root};
    while (!stack.empty()) {
      auto v = std::move(stack.back());
      stack.pop_back();
      for (const auto& c : primary_children[v]) {
        if (reached.insert(c).second) stack.push_back(c);
      }
    }
    for (const auto& id : g.nodes) {
      if (!reached.count(id)) add(ViolationKind::Unreachable, "node '" + id + "' is not reachable from the root");
    }
  }

  // Directed cycles over primary + remote edges.
  {
    enum class Mark { White, Grey, Black };
    std::unordered_map<std::string, Mark> mark;
    bool cyclic = false;
    for (const auto& start : g.nodes) {
      if (cyclic || mark[start] != Mark::White) continue;
      std::vector<std::pair<std::string, std::size_t>> stack{{start, 0}};
      mark[start] = Mark::Grey;
      while (!stack.empty() && !cyclic) {
        auto& [v, next] = stack.back();
        const auto& kids = all_children[v];
        if (next < kids.size()) {
          const std::string c = kids[next++];
          if (mark[c] == Mark::Grey) {
            cyclic = true;
            add(ViolationKind::Cycle, "cycle through '" + c + "'");
          } else if (mark[c] == Mark::White) {
            mark[c] = Mark::Grey;
            stack.push_back({c, 0});
          }
        } else {
          mark[v] = Mark::Black;
          stack.pop_back();
        }
      }
    }
  }

  if (!report.has(ViolationKind::Cycle)) {
    const auto yields = all_yields(g);
    for (const auto& id : g.nodes) {
      if (terminal_position(id)) continue;
      auto it = yields.find(id);
      if (it == yields.end() || it->second.empty()) {
        add(ViolationKind::EmptyYield, "internal node '" + id + "' covers no terminal");
      }
    }
  }

  return report;
}

std::map<std::string, std::vector<int>> all_yields(const UccaGraph& g) {
  std::unordered_map<std::string, std::vector<std::string>> children;
  for (const auto& e : g.edges) {
    if (!e.remote) children[e.parent].push_back(e.child);
  }
  std::map<std::string, std::vector<int>> out;
  std::unordered_set<std::string> in_progress;

  std::function<const std::vector<int>&(const std::string&)> visit =
      [&](const std::string& v) -> const std::vector<int>& {
    if (auto it = out.find(v); it != out.end()) return it->second;
    std::vector<int> acc;
    if (auto pos = terminal_position(v)) acc.push_back(*pos);
    if (in_progress.insert(v).second) {
      for (const auto& c : children[v]) {
        if (in_progress.count(c)) continue;
        const auto& sub = visit(c);
        acc.insert(acc.end(), sub.begin(), sub.end());
      }
      in_progress.erase(v);
    }
    std::sort(acc.begin(), acc.end());
    acc.erase(std::unique(acc.begin(), acc.end()), acc.end());
    return out[v] = std::move(acc);
  };
  for (const auto& id : g.nodes) visit(id);
  return out;
}

std::vector<int> terminal_yield(const UccaGraph& g, std::string_view node) {
  if (std::find(g.nodes.begin(), g.nodes.end(), node) == g.nodes.end()) {
    throw Error("unknown node '" + std::string(node) + "'");
  }
  return all_yields(g).at(std::string(node));
}

bool is_contiguous(const std::vector<int>& positions) {
  if (positions.empty()) return false;
  return positions.back() - positions.front() + 1 == static_cast<int>(positions.size());
}

}  // namespace ucca
