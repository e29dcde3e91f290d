#include "fixtures.hpp"

#include <unistd.h>

#include <algorithm>
#include <functional>

namespace ucca::testing {

UccaGraph make_graph(std::string root, std::vector<std::string> nodes, std::vector<Edge> edges) {
  UccaGraph g;
  g.root = std::move(root);
  g.nodes = std::move(nodes);
  g.edges = std::move(edges);
  return g;
}

Passage figure1_passage() {
  const std::vector<std::array<std::string, 3>> words = {
      {"He", "PRON", "nsubj"},   {"has", "AUX", "aux"},      {"tied", "VERB", "ROOT"},  {"a", "DET", "det"},
      {"sheet", "NOUN", "dobj"}, {"around", "ADP", "prep"},  {"a", "DET", "det"},       {"beam", "NOUN", "pobj"},
      {"and", "CCONJ", "cc"},    {"hanged", "VERB", "conj"}, {"himself", "PRON", "dobj"}, {".", "PUNCT", "punct"}};
  Passage p;
  p.id = "figure1";
  p.language = "en";
  for (std::size_t k = 0; k < words.size(); ++k) {
    p.terminals.push_back({static_cast<int>(k) + 1, words[k][0], words[k][1], words[k][2], "", "O"});
  }
  using C = Category;
  UccaGraph g = make_graph(
      "root",
      {"root", "s1", "s2", "u1", "u2", "t1", "t2", "t3", "t4", "t5", "t6", "t7", "t8", "t9", "t10", "t11", "t12"},
      {{"root", "s1", C::H, false},  {"root", "t9", C::L, false},  {"root", "s2", C::H, false},
       {"root", "t12", C::U, false}, {"s1", "t1", C::A, false},    {"s1", "t2", C::F, false},
       {"s1", "t3", C::P, false},    {"s1", "u1", C::A, false},    {"s1", "u2", C::A, false},
       {"u1", "t4", C::F, false},    {"u1", "t5", C::C, false},    {"u2", "t6", C::R, false},
       {"u2", "t7", C::F, false},    {"u2", "t8", C::C, false},    {"s2", "t10", C::P, false},
       {"s2", "t11", C::A, false},   {"s2", "t1", C::A, true}});
  p.graph = std::move(g);
  return p;
}

namespace {

Category random_category(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, static_cast<int>(kNumCategories) - 2);  // U kept for tokens
  return kAllCategories[static_cast<std::size_t>(pick(rng))];
}

bool coin(std::mt19937_64& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

}  // namespace

UccaGraph random_graph(std::mt19937_64& rng, int n, const GraphGenOptions& options) {
  UccaGraph g;
  g.root = "n0";
  g.nodes.push_back("n0");
  int next_id = 1;
  const bool scatter = coin(rng, options.discontinuity_rate);
  auto new_internal = [&] {
    std::string id = "n" + std::to_string(next_id++);
    g.nodes.push_back(id);
    return id;
  };
  auto add_edge = [&](const std::string& parent, const std::string& child) {
    const Category c = random_category(rng);
    g.edges.push_back({parent, child, c, false});
    if (coin(rng, options.multi_category_rate)) {
      Category other = random_category(rng);
      if (other != c) g.edges.push_back({parent, child, other, false});
    }
  };

  std::function<void(const std::string&, std::vector<int>)> build = [&](const std::string& node,
                                                                         std::vector<int> positions) {
    const int size = static_cast<int>(positions.size());
    std::uniform_int_distribution<int> arity(2, std::min(4, size));
    const int k = arity(rng);
    std::vector<std::vector<int>> groups(static_cast<std::size_t>(k));
    if (scatter && size >= 3 && coin(rng, 0.4)) {
      std::shuffle(positions.begin(), positions.end(), rng);
      for (int g_ = 0; g_ < k; ++g_) groups[static_cast<std::size_t>(g_)].push_back(positions[static_cast<std::size_t>(g_)]);
      std::uniform_int_distribution<int> which(0, k - 1);
      for (int r = k; r < size; ++r) groups[static_cast<std::size_t>(which(rng))].push_back(positions[static_cast<std::size_t>(r)]);
      for (auto& grp : groups) std::sort(grp.begin(), grp.end());
    } else {
      std::vector<int> cuts(static_cast<std::size_t>(size - 1));
      for (int c = 0; c < size - 1; ++c) cuts[static_cast<std::size_t>(c)] = c + 1;
      std::shuffle(cuts.begin(), cuts.end(), rng);
      cuts.resize(static_cast<std::size_t>(k - 1));
      std::sort(cuts.begin(), cuts.end());
      int start = 0;
      for (int g_ = 0; g_ < k; ++g_) {
        const int end = g_ + 1 < k ? cuts[static_cast<std::size_t>(g_)] : size;
        groups[static_cast<std::size_t>(g_)].assign(positions.begin() + start, positions.begin() + end);
        start = end;
      }
    }
    for (const auto& grp : groups) {
      std::string parent = node;
      if (coin(rng, options.unary_rate)) {
        const auto mid = new_internal();
        add_edge(parent, mid);
        parent = mid;
      }
      if (grp.size() == 1) {
        const std::string t = terminal_id(grp.front());
        g.nodes.push_back(t);
        add_edge(parent, t);
      } else {
        const auto child = new_internal();
        add_edge(parent, child);
        build(child, grp);
      }
    }
  };

  std::vector<int> all(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) all[static_cast<std::size_t>(p)] = p + 1;
  if (n == 1) {
    g.nodes.push_back("t1");
    add_edge("n0", "t1");
  } else {
    build("n0", all);
  }

  // Remote edges, kept only when the graph stays valid.
  std::uniform_int_distribution<int> remote_count(0, options.max_remotes);
  const int wanted = remote_count(rng);
  std::vector<std::string> internals;
  for (const auto& id : g.nodes) {
    if (!terminal_position(id)) internals.push_back(id);
  }
  for (int r = 0, attempts = 0; r < wanted && attempts < 50; ++attempts) {
    std::uniform_int_distribution<std::size_t> node_pick(0, g.nodes.size() - 1);
    std::uniform_int_distribution<std::size_t> parent_pick(0, internals.size() - 1);
    const auto& child = g.nodes[node_pick(rng)];
    const auto& parent = internals[parent_pick(rng)];
    if (child == g.root || child == parent) continue;
    g.edges.push_back({parent, child, random_category(rng), true});
    if (validate_graph(g, n).ok()) {
      ++r;
    } else {
      g.edges.pop_back();
    }
  }
  return g;
}

Passage random_passage(std::mt19937_64& rng, const GraphGenOptions& options, const std::string& id) {
  std::uniform_int_distribution<int> length(options.min_tokens, options.max_tokens);
  const int n = length(rng);
  static const std::vector<std::string> words = {"the", "cat", "sat", "on", "a", "mat", "and", "dog", "ran", "home"};
  static const std::vector<std::string> tags = {"DET", "NOUN", "VERB", "ADP", "CCONJ", "PRON"};
  static const std::vector<std::string> deps = {"det", "nsubj", "root", "prep", "cc", "dobj"};
  std::uniform_int_distribution<std::size_t> w(0, words.size() - 1), t(0, tags.size() - 1);
  Passage p;
  p.id = id;
  p.language = "en";
  for (int k = 1; k <= n; ++k) {
    const auto tag = t(rng);
    const bool entity = coin(rng, 0.1);
    p.terminals.push_back({k, words[w(rng)], tags[tag], deps[tag], entity ? "PERSON" : "", entity ? "B" : "O"});
  }
  p.graph = random_graph(rng, n, options);
  return p;
}

bool has_discontinuity(const UccaGraph& g) {
  for (const auto& [id, y] : all_yields(g)) {
    if (!y.empty() && !is_contiguous(y)) return true;
  }
  return false;
}

ConstituencyTree random_tree(std::mt19937_64& rng, int n, const std::vector<std::string>& labels) {
  std::uniform_int_distribution<std::size_t> label(0, labels.size() - 1);
  ConstituencyTree t{n, {}};
  std::function<void(int, int)> fill = [&](int i, int j) {
    if (j - i == 1) return;
    // Random cut points; each piece becomes a span or stays uncovered.
    std::vector<int> cuts;
    for (int k = i + 1; k < j; ++k) {
      if (coin(rng, 0.5)) cuts.push_back(k);
    }
    if (cuts.empty()) cuts.push_back(std::uniform_int_distribution<int>(i + 1, j - 1)(rng));
    int start = i;
    cuts.push_back(j);
    for (int end : cuts) {
      const bool keep = j - i > 1 && coin(rng, 0.8);
      if (keep && !(start == i && end == j)) {
        t.spans.push_back({start, end, labels[label(rng)]});
        fill(start, end);
      } else if (end - start > 1 && !(start == i && end == j)) {
        fill(start, end);
      }
      start = end;
    }
  };
  t.spans.push_back({0, n, labels[label(rng)]});
  fill(0, n);
  sort_spans(t.spans);
  return t;
}

std::filesystem::path source_path(const std::string& relative) {
  return std::filesystem::path(UCCA_SOURCE_DIR) / relative;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("ucca_test_" + std::to_string(::getpid()) + "_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace ucca::testing
