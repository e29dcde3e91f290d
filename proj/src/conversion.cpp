#include "ucca/conversion.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <unordered_map>

namespace ucca {

namespace {

struct Unit {
  int parent = -1;
  std::vector<int> children;
  std::vector<Category> categories;  // incoming primary edge(s)
  std::vector<Category> lift_tag;
  int position = 0;  // > 0 for terminals
  std::vector<int> yield;
};

struct RemoteLink {
  int parent;
  int child;
  Category category;
};

class UnitTree {
 public:
  std::vector<Unit> units;
  std::vector<RemoteLink> remotes;
  int root = 0;

  Unit& at(int id) { return units[static_cast<std::size_t>(id)]; }
  const Unit& at(int id) const { return units[static_cast<std::size_t>(id)]; }

  int add_unit() {
    units.emplace_back();
    return static_cast<int>(units.size()) - 1;
  }

  void compute_yields() { compute_yield(root); }

  void sort_children(int id) {
    auto& kids = at(id).children;
    std::sort(kids.begin(), kids.end(), [&](int a, int b) { return at(a).yield.front() < at(b).yield.front(); });
  }

  void attach(int child, int parent) {
    at(child).parent = parent;
    at(parent).children.push_back(child);
  }

  void detach(int child) {
    auto& kids = at(at(child).parent).children;
    kids.erase(std::find(kids.begin(), kids.end(), child));
    at(child).parent = -1;
  }

  std::vector<int> preorder() const {
    std::vector<int> order;
    std::vector<int> stack{root};
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      order.push_back(v);
      const auto& kids = at(v).children;
      for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
    }
    return order;
  }

  std::vector<int> postorder() const {
    std::vector<int> post;
    std::function<void(int)> visit = [&](int v) {
      for (int c : at(v).children) visit(c);
      post.push_back(v);
    };
    visit(root);
    return post;
  }

 private:
  const std::vector<int>& compute_yield(int id) {
    std::vector<int> acc;
    if (at(id).position > 0) acc.push_back(at(id).position);
    for (int c : at(id).children) {
      const auto& sub = compute_yield(c);
      acc.insert(acc.end(), sub.begin(), sub.end());
    }
    std::sort(acc.begin(), acc.end());
    at(id).yield = std::move(acc);
    return at(id).yield;
  }
};

std::vector<int> difference(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::string lift_tag_string(const std::vector<Category>& tag) {
  return std::string(kLiftMarker) + format_categories(tag);
}

std::string yield_string(const std::vector<int>& y) {
  std::string s = "{";
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (k) s += ',';
    s += std::to_string(y[k]);
  }
  return s + "}";
}

// Repairs discontinuous units bottom-up; emits one record per lift.
std::vector<DiscontinuityRecord> lift_discontinuities(UnitTree& tree) {
  std::vector<DiscontinuityRecord> records;
  for (int x : tree.postorder()) {
    if (x == tree.root || tree.at(x).position > 0) continue;
    if (is_contiguous(tree.at(x).yield)) continue;

    tree.sort_children(x);
    const auto kids = tree.at(x).children;
    // Runs of adjacent children; keep the widest, leftmost on ties.
    std::size_t best_begin = 0, best_end = 0, best_width = 0;
    for (std::size_t begin = 0; begin < kids.size();) {
      std::size_t end = begin + 1;
      std::size_t width = tree.at(kids[begin]).yield.size();
      while (end < kids.size() &&
             tree.at(kids[end - 1]).yield.back() + 1 == tree.at(kids[end]).yield.front()) {
        width += tree.at(kids[end]).yield.size();
        ++end;
      }
      if (width > best_width) {
        best_begin = begin;
        best_end = end;
        best_width = width;
      }
      begin = end;
    }

    const int parent = tree.at(x).parent;
    for (std::size_t k = 0; k < kids.size(); ++k) {
      if (k >= best_begin && k < best_end) continue;
      const int c = kids[k];
      if (tree.at(c).lift_tag.empty()) tree.at(c).lift_tag = tree.at(x).categories;
      records.push_back({tree.at(c).yield, tree.at(x).yield, lift_tag_string(tree.at(c).lift_tag)});
      tree.detach(c);
      tree.attach(c, parent);
      tree.at(x).yield = difference(tree.at(x).yield, tree.at(c).yield);
    }
    tree.sort_children(parent);
  }
  return records;
}

// Unit -> (chain depth) and the spans of the folded chains.
struct Folded {
  std::vector<Span> spans;
  std::vector<int> depth;
};

Folded fold_chains(const UnitTree& tree) {
  Folded out;
  out.depth.assign(tree.units.size(), 0);
  std::function<void(int)> visit = [&](int top) {
    std::vector<int> chain{top};
    while (tree.at(chain.back()).children.size() == 1) chain.push_back(tree.at(chain.back()).children.front());
    ChainLabel label;
    label.root = top == tree.root;
    for (std::size_t d = 0; d < chain.size(); ++d) {
      out.depth[static_cast<std::size_t>(chain[d])] = static_cast<int>(d);
      if (chain[d] == tree.root) continue;
      label.steps.push_back({tree.at(chain[d]).categories, tree.at(chain[d]).lift_tag});
    }
    const auto& y = tree.at(top).yield;
    out.spans.push_back({y.front() - 1, y.back(), format_label(label)});
    for (int c : tree.at(chain.back()).children) visit(c);
  };
  visit(tree.root);
  sort_spans(out.spans);
  return out;
}

struct Reporter {
  const ConversionOptions& options;
  ConversionDiagnostics* diagnostics;

  void fail(const std::string& message, int ConversionDiagnostics::*counter) const {
    if (!options.lenient) throw Error(message);
    if (diagnostics) {
      ++(diagnostics->*counter);
      diagnostics->warnings.push_back(message);
    }
  }
};

// Units sharing a yield, listed top-down.
std::map<std::vector<int>, std::vector<int>> units_by_yield(const UnitTree& tree) {
  std::map<std::vector<int>, std::vector<int>> index;
  for (int v : tree.preorder()) index[tree.at(v).yield].push_back(v);
  return index;
}

UnitTree build_units(const ConstituencyTree& t, const Reporter& report) {
  std::vector<Span> spans = t.spans;
  sort_spans(spans);

  UnitTree tree;
  tree.root = tree.add_unit();
  std::vector<int> terminal_unit(static_cast<std::size_t>(t.n) + 1, -1);
  // Innermost internal unit of each decoded span, for uncovered tokens.
  std::vector<std::pair<Span, int>> hosts;

  struct Open {
    int j;
    int bottom;  // unit that receives the children of this span
  };
  std::vector<Open> open;

  for (const auto& s : spans) {
    while (!open.empty() && open.back().j <= s.i) open.pop_back();
    const bool is_root = s.i == 0 && s.j == t.n;
    const std::string where = "span (" + std::to_string(s.i) + "," + std::to_string(s.j) + ")";

    ChainLabel label;
    try {
      label = parse_label(s.label);
    } catch (const Error& e) {
      report.fail(where + ": " + e.what(), &ConversionDiagnostics::dropped_spans);
    }
    if (is_root) {
      // The root's own step has no edge; a label without ROOT spends its
      // first step on it.
      if (!label.root && !label.steps.empty()) label.steps.erase(label.steps.begin());
    } else if (label.root) {
      report.fail("ROOT label on inner " + where, &ConversionDiagnostics::dropped_spans);
    }

    int bottom = is_root ? tree.root : open.back().bottom;
    for (std::size_t k = 0; k < label.steps.size(); ++k) {
      const int u = tree.add_unit();
      tree.at(u).categories = label.steps[k].categories;
      tree.at(u).lift_tag = label.steps[k].lifted_from;
      if (k + 1 == label.steps.size() && s.j - s.i == 1) {
        tree.at(u).position = s.j;
        terminal_unit[static_cast<std::size_t>(s.j)] = u;
      }
      tree.attach(u, bottom);
      bottom = u;
    }
    if (tree.at(bottom).position == 0) {
      open.push_back({s.j, bottom});
      hosts.push_back({s, bottom});
    }
  }

  for (int p = 1; p <= t.n; ++p) {
    if (terminal_unit[static_cast<std::size_t>(p)] >= 0) continue;
    int host = tree.root;
    int width = t.n + 1;
    for (const auto& [s, unit] : hosts) {
      if (s.i < p && p <= s.j && s.j - s.i <= width) {
        host = unit;
        width = s.j - s.i;
      }
    }
    const int u = tree.add_unit();
    tree.at(u).categories = {kFallbackCategory};
    tree.at(u).position = p;
    tree.attach(u, host);
    terminal_unit[static_cast<std::size_t>(p)] = u;
    if (report.diagnostics) ++report.diagnostics->fallback_terminals;
  }

  // Internal units left without terminals (possible only for malformed
  // decoder output) are pruned.
  tree.compute_yields();
  for (int v : tree.postorder()) {
    if (v != tree.root && tree.at(v).yield.empty()) {
      tree.detach(v);
      report.fail("span chain covering no token dropped", &ConversionDiagnostics::dropped_spans);
    }
  }
  for (std::size_t v = 0; v < tree.units.size(); ++v) {
    if (!tree.at(static_cast<int>(v)).children.empty()) tree.sort_children(static_cast<int>(v));
  }
  return tree;
}

// Undoes lifts by replaying records last-to-first.
void replay_lifts(UnitTree& tree, const std::vector<DiscontinuityRecord>& records, const Reporter& report,
                  std::vector<bool>& moved) {
  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    tree.compute_yields();
    const auto index = units_by_yield(tree);
    const auto reduced = difference(it->original_parent_yield, it->moved_child_yield);
    auto found = index.find(reduced);
    if (found == index.end()) {
      report.fail("lift record: no unit with yield " + yield_string(reduced), &ConversionDiagnostics::unresolved_lifts);
      continue;
    }
    const int x = found->second.front();
    const int parent = tree.at(x).parent;
    int child = -1;
    if (parent >= 0) {
      for (int c : tree.at(parent).children) {
        if (tree.at(c).yield == it->moved_child_yield) child = c;
      }
    }
    if (child < 0 || tree.at(x).position > 0) {
      report.fail("lift record: no lifted unit with yield " + yield_string(it->moved_child_yield),
                  &ConversionDiagnostics::unresolved_lifts);
      continue;
    }
    if (lift_tag_string(tree.at(child).lift_tag) != it->augmentation_tag) {
      report.fail("lift record tag " + it->augmentation_tag + " does not match the tree label",
                  &ConversionDiagnostics::unresolved_lifts);
      continue;
    }
    tree.detach(child);
    tree.attach(child, x);
    moved[static_cast<std::size_t>(child)] = true;
  }
}

// Reattaches tagged units without records: breadth-first search below the
// current parent for the nearest internal unit whose categories match the tag.
void resolve_tags(UnitTree& tree, const std::vector<bool>& moved, const Reporter& report) {
  for (int c : tree.preorder()) {
    if (tree.at(c).lift_tag.empty() || moved[static_cast<std::size_t>(c)]) continue;
    const int parent = tree.at(c).parent;
    int target = -1;
    std::deque<int> queue;
    for (int k : tree.at(parent).children) {
      if (k != c) queue.push_back(k);
    }
    while (!queue.empty() && target < 0) {
      const int v = queue.front();
      queue.pop_front();
      if (tree.at(v).position == 0 && tree.at(v).categories == tree.at(c).lift_tag) {
        target = v;
        break;
      }
      for (int k : tree.at(v).children) queue.push_back(k);
    }
    if (target < 0) {
      report.fail("no unit matches lift tag " + lift_tag_string(tree.at(c).lift_tag),
                  &ConversionDiagnostics::unresolved_lifts);
      continue;
    }
    tree.detach(c);
    tree.attach(c, target);
  }
}

}  // namespace

TreeConversion graph_to_tree(const UccaGraph& g) {
  int n = 0;
  for (const auto& id : g.nodes) {
    if (terminal_position(id)) ++n;
  }
  const auto report = validate_graph(g, n);
  if (!report.ok()) throw Error("invalid graph: " + report.summary());

  UnitTree tree;
  std::unordered_map<std::string, int> index;
  for (const auto& id : g.nodes) {
    const int u = tree.add_unit();
    index.emplace(id, u);
    if (auto pos = terminal_position(id)) tree.at(u).position = *pos;
  }
  tree.root = index.at(g.root);
  for (const auto& e : g.edges) {
    const int p = index.at(e.parent), c = index.at(e.child);
    if (e.remote) {
      tree.remotes.push_back({p, c, e.category});
      continue;
    }
    if (tree.at(c).parent < 0) tree.attach(c, p);
    tree.at(c).categories.push_back(e.category);
  }
  for (auto& u : tree.units) std::sort(u.categories.begin(), u.categories.end());
  tree.compute_yields();
  for (std::size_t v = 0; v < tree.units.size(); ++v) {
    if (!tree.at(static_cast<int>(v)).children.empty()) tree.sort_children(static_cast<int>(v));
  }

  TreeConversion out;
  out.discontinuities = lift_discontinuities(tree);
  auto folded = fold_chains(tree);
  out.tree = {n, std::move(folded.spans)};
  for (const auto& r : tree.remotes) {
    out.remotes.push_back({tree.at(r.parent).yield, tree.at(r.child).yield, r.category,
                           folded.depth[static_cast<std::size_t>(r.parent)],
                           folded.depth[static_cast<std::size_t>(r.child)]});
  }
  return out;
}

UccaGraph tree_to_graph(const ConstituencyTree& t, const std::vector<RemoteRecord>& remotes,
                        const std::vector<DiscontinuityRecord>& discontinuities, const ConversionOptions& options,
                        ConversionDiagnostics* diagnostics) {
  if (auto problem = check_tree(t); !problem.empty()) throw Error("malformed tree: " + problem);
  const Reporter report{options, diagnostics};
  UnitTree tree = build_units(t, report);

  // Remote endpoints are resolved in the lifted tree, before any unit moves.
  {
    tree.compute_yields();
    const auto index = units_by_yield(tree);
    auto lookup = [&](const std::vector<int>& y, int depth) -> int {
      auto it = index.find(y);
      if (it == index.end() || depth < 0 || depth >= static_cast<int>(it->second.size())) return -1;
      return it->second[static_cast<std::size_t>(depth)];
    };
    for (const auto& r : remotes) {
      const int p = lookup(r.parent_yield, r.parent_depth);
      const int c = lookup(r.child_yield, r.child_depth);
      if (p < 0 || c < 0) {
        report.fail("remote " + yield_string(r.parent_yield) + " -> " + yield_string(r.child_yield) +
                        " matches no unit",
                    &ConversionDiagnostics::dropped_remotes);
        continue;
      }
      tree.remotes.push_back({p, c, r.category});
    }
  }

  std::vector<bool> moved(tree.units.size(), false);
  replay_lifts(tree, discontinuities, report, moved);
  resolve_tags(tree, moved, report);
  for (auto& u : tree.units) u.lift_tag.clear();
  tree.compute_yields();

  UccaGraph g;
  std::vector<std::string> ids(tree.units.size());
  int next = 0;
  const auto order = tree.preorder();
  for (int v : order) {
    const auto& u = tree.at(v);
    ids[static_cast<std::size_t>(v)] = u.position > 0 ? terminal_id(u.position) : "n" + std::to_string(next++);
  }
  for (int v : order) {
    g.nodes.push_back(ids[static_cast<std::size_t>(v)]);
    if (v == tree.root) continue;
    for (Category c : tree.at(v).categories) {
      g.edges.push_back({ids[static_cast<std::size_t>(tree.at(v).parent)], ids[static_cast<std::size_t>(v)], c, false});
    }
  }
  g.root = ids[static_cast<std::size_t>(tree.root)];

  // Remote edges must keep the structure a DAG without duplicating primary
  // pairs; after deprojectivization a decoded remote can violate that.
  std::vector<std::vector<int>> remote_children(tree.units.size());
  auto reaches = [&](int from, int to) {
    std::vector<int> stack{from};
    std::vector<bool> seen(tree.units.size(), false);
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      if (v == to) return true;
      if (seen[static_cast<std::size_t>(v)]) continue;
      seen[static_cast<std::size_t>(v)] = true;
      for (int c : tree.at(v).children) stack.push_back(c);
      for (int c : remote_children[static_cast<std::size_t>(v)]) stack.push_back(c);
    }
    return false;
  };
  std::set<std::tuple<int, int, Category>> added;
  for (const auto& r : tree.remotes) {
    std::string problem;
    if (r.child == tree.root) problem = "targets the root";
    else if (tree.at(r.parent).position > 0) problem = "starts at a terminal";
    else if (tree.at(r.child).parent == r.parent) problem = "duplicates a primary edge";
    else if (added.count({r.parent, r.child, r.category})) problem = "is repeated";
    else if (reaches(r.child, r.parent)) problem = "creates a cycle";
    if (!problem.empty()) {
      report.fail("remote " + ids[static_cast<std::size_t>(r.parent)] + " -> " +
                      ids[static_cast<std::size_t>(r.child)] + " " + problem,
                  &ConversionDiagnostics::dropped_remotes);
      continue;
    }
    added.insert({r.parent, r.child, r.category});
    remote_children[static_cast<std::size_t>(r.parent)].push_back(r.child);
    g.edges.push_back({ids[static_cast<std::size_t>(r.parent)], ids[static_cast<std::size_t>(r.child)], r.category, true});
  }
  return g;
}

std::vector<std::string> canonical_edges(const UccaGraph& g) {
  const auto yields = all_yields(g);
  std::unordered_map<std::string, std::string> primary_parent;
  for (const auto& e : g.edges) {
    if (!e.remote) primary_parent[e.child] = e.parent;
  }
  auto key = [&](const std::string& id) {
    const auto& y = yields.at(id);
    int depth = 0;
    std::string v = id;
    std::unordered_map<std::string, bool> guard;
    while (primary_parent.count(v) && !guard[v]) {
      guard[v] = true;
      v = primary_parent.at(v);
      if (yields.at(v) != y) break;
      ++depth;
    }
    return yield_string(y) + "#" + std::to_string(depth);
  };
  std::vector<std::string> lines;
  lines.push_back("root " + (yields.count(g.root) ? key(g.root) : std::string("?")));
  for (const auto& e : g.edges) {
    lines.push_back(key(e.parent) + " -> " + key(e.child) + " " + std::string(to_string(e.category)) +
                    (e.remote ? " remote" : " primary"));
  }
  std::sort(lines.begin(), lines.end());
  return lines;
}

bool structurally_equal(const UccaGraph& a, const UccaGraph& b) {
  return a.nodes.size() == b.nodes.size() && canonical_edges(a) == canonical_edges(b);
}

}  // namespace ucca
