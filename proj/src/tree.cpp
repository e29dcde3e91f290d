#include "ucca/tree.hpp"

#include <algorithm>

namespace ucca {

namespace {

std::vector<std::string_view> split(std::string_view text, std::string_view sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + sep.size();
  }
}

std::vector<Category> parse_categories(std::string_view text, std::string_view whole) {
  std::vector<Category> cats;
  for (auto code : split(text, "|")) {
    auto c = try_parse_category(code);
    if (!c) throw Error("malformed label '" + std::string(whole) + "'");
    cats.push_back(*c);
  }
  std::sort(cats.begin(), cats.end());
  return cats;
}

}  // namespace

std::string format_categories(const std::vector<Category>& cats) {
  std::string out;
  for (std::size_t k = 0; k < cats.size(); ++k) {
    if (k) out += '|';
    out += to_string(cats[k]);
  }
  return out;
}

std::string format_step(const LabelStep& step) {
  std::string out = format_categories(step.categories);
  if (!step.lifted_from.empty()) {
    out += kLiftMarker;
    out += format_categories(step.lifted_from);
  }
  return out;
}

std::string format_label(const ChainLabel& label) {
  std::string out;
  if (label.root) out += kRootStep;
  for (const auto& step : label.steps) {
    if (!out.empty()) out += '+';
    out += format_step(step);
  }
  return out;
}

ChainLabel parse_label(std::string_view text) {
  if (text.empty() || text == kNullLabel) throw Error("cannot parse an empty label");
  ChainLabel label;
  auto parts = split(text, "+");
  std::size_t first = 0;
  if (parts.front() == kRootStep) {
    label.root = true;
    first = 1;
  }
  for (std::size_t k = first; k < parts.size(); ++k) {
    LabelStep step;
    auto halves = split(parts[k], kLiftMarker);
    if (halves.size() > 2 || halves[0].empty()) throw Error("malformed label '" + std::string(text) + "'");
    step.categories = parse_categories(halves[0], text);
    if (halves.size() == 2) step.lifted_from = parse_categories(halves[1], text);
    label.steps.push_back(std::move(step));
  }
  return label;
}

void sort_spans(std::vector<Span>& spans) {
  std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) {
    if (a.i != b.i) return a.i < b.i;
    return a.j > b.j;
  });
}

std::string check_tree(const ConstituencyTree& t) {
  if (t.n < 1) return "tree must cover at least one token";
  bool has_root = false;
  std::vector<Span> spans = t.spans;
  sort_spans(spans);
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const auto& s = spans[k];
    if (s.i < 0 || s.j > t.n || s.i >= s.j) {
      return "span (" + std::to_string(s.i) + "," + std::to_string(s.j) + ") out of range";
    }
    if (s.label.empty()) return "span with empty label";
    if (s.i == 0 && s.j == t.n) has_root = true;
    if (k > 0 && spans[k - 1].i == s.i && spans[k - 1].j == s.j) {
      return "span (" + std::to_string(s.i) + "," + std::to_string(s.j) + ") repeated";
    }
  }
  // Crossing check: with preorder sorting, a stack of open spans suffices.
  std::vector<const Span*> open;
  for (const auto& s : spans) {
    while (!open.empty() && open.back()->j <= s.i) open.pop_back();
    if (!open.empty() && s.j > open.back()->j) {
      return "span (" + std::to_string(s.i) + "," + std::to_string(s.j) + ") crosses (" +
             std::to_string(open.back()->i) + "," + std::to_string(open.back()->j) + ")";
    }
    open.push_back(&s);
  }
  if (!has_root) return "root span (0," + std::to_string(t.n) + ") missing";
  return {};
}

namespace {

struct SpanNode {
  Span span;
  std::vector<int> children;
};

// Builds the nesting forest of preorder-sorted spans; returns index of root.
std::vector<SpanNode> nest(const std::vector<Span>& sorted) {
  std::vector<SpanNode> nodes;
  nodes.reserve(sorted.size());
  std::vector<int> open;
  for (const auto& s : sorted) {
    while (!open.empty() && nodes[static_cast<std::size_t>(open.back())].span.j <= s.i) open.pop_back();
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({s, {}});
    if (!open.empty()) nodes[static_cast<std::size_t>(open.back())].children.push_back(id);
    open.push_back(id);
  }
  return nodes;
}

void binarize_node(const std::vector<SpanNode>& nodes, int id, std::vector<Span>& out) {
  const auto& node = nodes[static_cast<std::size_t>(id)];
  out.push_back(node.span);
  if (node.span.j - node.span.i == 1) return;

  // Children plus width-one ∅ fillers for uncovered tokens.
  std::vector<std::pair<int, int>> parts;  // (child index or -1, position)
  int cursor = node.span.i;
  for (int c : node.children) {
    const auto& cs = nodes[static_cast<std::size_t>(c)].span;
    for (; cursor < cs.i; ++cursor) parts.push_back({-1, cursor});
    parts.push_back({c, cs.i});
    cursor = cs.j;
  }
  for (; cursor < node.span.j; ++cursor) parts.push_back({-1, cursor});

  // A single child covering the whole span cannot happen: chains are folded.
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (k > 0 && k + 1 < parts.size()) {
      // Right-factored ∅ span over parts[k..end).
      const int start = parts[k].first >= 0 ? nodes[static_cast<std::size_t>(parts[k].first)].span.i : parts[k].second;
      out.push_back({start, node.span.j, std::string(kNullLabel)});
    }
    if (parts[k].first >= 0) {
      binarize_node(nodes, parts[k].first, out);
    } else {
      out.push_back({parts[k].second, parts[k].second + 1, std::string(kNullLabel)});
    }
  }
}

}  // namespace

ConstituencyTree binarize(const ConstituencyTree& t) {
  std::vector<Span> sorted = t.spans;
  sort_spans(sorted);
  auto nodes = nest(sorted);
  ConstituencyTree out{t.n, {}};
  if (!nodes.empty()) binarize_node(nodes, 0, out.spans);
  sort_spans(out.spans);
  return out;
}

ConstituencyTree debinarize(const ConstituencyTree& t) {
  ConstituencyTree out{t.n, {}};
  for (const auto& s : t.spans) {
    if (s.label != kNullLabel) out.spans.push_back(s);
  }
  sort_spans(out.spans);
  return out;
}

LabelInventory::LabelInventory() { add(std::string(kNullLabel)); }

LabelInventory::LabelInventory(const std::vector<std::string>& labels) {
  if (labels.empty() || labels.front() != kNullLabel) {
    throw Error("label inventory must start with the null label");
  }
  for (const auto& l : labels) {
    if (find(l) >= 0) throw Error("label '" + l + "' repeated in inventory");
    add(l);
  }
}

int LabelInventory::add(const std::string& label) {
  if (auto id = find(label); id >= 0) return id;
  const int id = size();
  labels_.push_back(label);
  index_.emplace(label, id);
  return id;
}

int LabelInventory::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  return it == index_.end() ? -1 : it->second;
}

}  // namespace ucca
