// Globally optimal tree decoding over a span chart.

#pragma once

#include <vector>

#include "ucca/chart.hpp"
#include "ucca/tree.hpp"

namespace ucca {

struct ChartSpan {
  int i = 0;
  int j = 0;
  int label = 0;

  bool operator==(const ChartSpan&) const = default;
};

/// A full binary bracketing (2n-1 spans, preorder) with one label id per
/// span, and its score sum of s(i, j, l).
struct DecodeResult {
  std::vector<ChartSpan> spans;
  double score = 0.0;
};

/// CYK argmax. The root span never takes ∅. Ties prefer the lower split
/// point, then the smaller label id. Throws ucca::Error on an empty chart.
DecodeResult cyk_decode(const SpanChart& chart);

inline constexpr int kBruteForceMaxLength = 10;

/// Enumerates every binary bracketing; exact because, once the bracketing
/// is fixed, each span's best label is independent of the others. Same
/// tie-breaking as cyk_decode. Throws ucca::Error for n > 10.
DecodeResult brute_force_decode(const SpanChart& chart);

/// Sum of the chart entries named by `spans`, accumulated in the same
/// order as the decoders: s(node) + (s(left) + s(right)).
double tree_score(const SpanChart& chart, const std::vector<ChartSpan>& spans);

/// Debinarized labeled tree.
ConstituencyTree to_tree(const DecodeResult& decoded, const LabelInventory& labels, int n);

/// cyk_decode followed by to_tree.
ConstituencyTree decode_tree(const SpanChart& chart, const LabelInventory& labels);

}  // namespace ucca
