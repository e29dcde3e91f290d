// Labeled-span constituency trees and the label encoding shared by the
// converter, the decoder and the model.

#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ucca/graph.hpp"

namespace ucca {

/// Label of binarization-only spans and of non-constituent chart cells.
inline constexpr std::string_view kNullLabel = "\xE2\x88\x85";  // ∅
/// First step of the root span's label; the root has no incoming edge.
inline constexpr std::string_view kRootStep = "ROOT";
/// Separates the original-parent categories of a lifted unit.
inline constexpr std::string_view kLiftMarker = "\xE2\x86\x91";  // ↑

/// One unit of a unary chain: the categories of its incoming primary edge(s)
/// and, for a lifted unit, the categories of the parent it was lifted from.
struct LabelStep {
  std::vector<Category> categories;
  std::vector<Category> lifted_from;

  bool operator==(const LabelStep&) const = default;
};

/// A span label is a top-down unary chain of steps, e.g. "A+C",
/// "ROOT+H", "A↑E" or "A|D".
struct ChainLabel {
  bool root = false;
  std::vector<LabelStep> steps;

  bool operator==(const ChainLabel&) const = default;
};

std::string format_categories(const std::vector<Category>& cats);
std::string format_step(const LabelStep& step);
std::string format_label(const ChainLabel& label);
/// Throws ucca::Error on malformed input or unknown category codes.
ChainLabel parse_label(std::string_view text);

struct Span {
  int i = 0;
  int j = 0;
  std::string label;

  bool operator==(const Span&) const = default;
};

/// Properly nested labeled spans over fenceposts 0..n, at most one label per
/// (i, j); unary chains are folded into one chain label.
struct ConstituencyTree {
  int n = 0;
  std::vector<Span> spans;

  bool operator==(const ConstituencyTree&) const = default;
};

/// Orders spans by (i ascending, j descending), i.e. preorder.
void sort_spans(std::vector<Span>& spans);

/// Empty string when well formed, otherwise the first problem found.
std::string check_tree(const ConstituencyTree& t);

/// Adds ∅-labeled spans until every span is a leaf of width one or has
/// exactly two children. Children are right-factored.
ConstituencyTree binarize(const ConstituencyTree& t);
/// Drops every ∅-labeled span.
ConstituencyTree debinarize(const ConstituencyTree& t);

/// Dense label ids for the chart; id 0 is always ∅.
class LabelInventory {
 public:
  LabelInventory();
  explicit LabelInventory(const std::vector<std::string>& labels);

  /// Returns the id, adding the label if new.
  int add(const std::string& label);
  /// -1 when unknown.
  int find(std::string_view label) const;
  const std::string& name(int id) const { return labels_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(labels_.size()); }
  const std::vector<std::string>& labels() const { return labels_; }

  bool operator==(const LabelInventory& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace ucca
