#include "ucca/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>

#include "ucca/graph.hpp"

namespace ucca {

namespace {

// Lowest id among the maxima; the root span skips ∅.
int best_label(const SpanChart& chart, int i, int j) {
  const auto cell = chart.cell(i, j);
  const bool root = i == 0 && j == chart.n();
  int best = root ? 1 : 0;
  for (int l = best + 1; l < chart.num_labels(); ++l) {
    if (cell[static_cast<std::size_t>(l)] > cell[static_cast<std::size_t>(best)]) best = l;
  }
  return best;
}

void check_chart(const SpanChart& chart) {
  if (chart.n() < 1) throw Error("cannot decode an empty chart");
  if (chart.num_labels() < 2) throw Error("chart needs at least one label besides the null label");
}

double score_subtree(const SpanChart& chart, const std::vector<ChartSpan>& spans, std::size_t& next) {
  if (next >= spans.size()) throw Error("truncated bracketing");
  const ChartSpan s = spans[next++];
  const double own = chart.at(s.i, s.j, s.label);
  if (s.j - s.i == 1) return own;
  const double left = score_subtree(chart, spans, next);
  const double right = score_subtree(chart, spans, next);
  return own + (left + right);
}

}  // namespace

DecodeResult cyk_decode(const SpanChart& chart) {
  check_chart(chart);
  const int n = chart.n();
  const auto stride = static_cast<std::size_t>(n + 1);
  auto idx = [stride](int i, int j) { return static_cast<std::size_t>(i) * stride + static_cast<std::size_t>(j); };
  struct Cell {
    double best;
    int label;
    int split;
  };
  // Every cell is written before it is read, so the table stays uninitialized.
  const auto table = std::make_unique_for_overwrite<Cell[]>(stride * stride);
  Cell* const cells = table.get();

  // Labels first, walking the chart in storage order.
  const int num_labels = chart.num_labels();
  const double* cell = chart.data().data();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j <= n; ++j, cell += num_labels) {
      int l = 0;
      for (int m = 1; m < num_labels; ++m) l = cell[m] > cell[l] ? m : l;
      cells[idx(i, j)].label = l;
      cells[idx(i, j)].best = cell[l];
    }
  }
  const int root_label = best_label(chart, 0, n);
  cells[idx(0, n)].label = root_label;
  cells[idx(0, n)].best = chart.at(0, n, root_label);

  for (int width = 2; width <= n; ++width) {
    for (int i = 0; i + width <= n; ++i) {
      const int j = i + width;
      int best_k = i + 1;
      double best_sum = cells[idx(i, i + 1)].best + cells[idx(i + 1, j)].best;
      for (int k = i + 2; k < j; ++k) {
        const double sum = cells[idx(i, k)].best + cells[idx(k, j)].best;
        const bool better = sum > best_sum;
        best_sum = better ? sum : best_sum;
        best_k = better ? k : best_k;
      }
      cells[idx(i, j)].split = best_k;
      cells[idx(i, j)].best += best_sum;
    }
  }

  DecodeResult result;
  result.score = cells[idx(0, n)].best;
  result.spans.reserve(static_cast<std::size_t>(2 * n - 1));
  auto emit = [&](auto&& self, int i, int j) -> void {
    const Cell& c = cells[idx(i, j)];
    result.spans.push_back({i, j, c.label});
    if (j - i == 1) return;
    self(self, i, c.split);
    self(self, c.split, j);
  };
  emit(emit, 0, n);
  return result;
}

DecodeResult brute_force_decode(const SpanChart& chart) {
  check_chart(chart);
  const int n = chart.n();
  if (n > kBruteForceMaxLength) {
    throw Error("brute-force decoding limited to n <= " + std::to_string(kBruteForceMaxLength));
  }

  // Every bracketing of each span, with per-span best labels.
  std::map<std::pair<int, int>, std::vector<DecodeResult>> memo;
  auto enumerate = [&](auto&& self, int i, int j) -> const std::vector<DecodeResult>& {
    if (auto it = memo.find({i, j}); it != memo.end()) return it->second;
    std::vector<DecodeResult> trees;
    const int l = best_label(chart, i, j);
    const double own = chart.at(i, j, l);
    if (j - i == 1) {
      trees.push_back({{{i, j, l}}, own});
    } else {
      for (int k = i + 1; k < j; ++k) {
        const auto& lefts = self(self, i, k);
        const auto& rights = self(self, k, j);
        for (const auto& left : lefts) {
          for (const auto& right : rights) {
            DecodeResult t;
            t.spans.reserve(left.spans.size() + right.spans.size() + 1);
            t.spans.push_back({i, j, l});
            t.spans.insert(t.spans.end(), left.spans.begin(), left.spans.end());
            t.spans.insert(t.spans.end(), right.spans.begin(), right.spans.end());
            t.score = own + (left.score + right.score);
            trees.push_back(std::move(t));
          }
        }
      }
    }
    return memo[{i, j}] = std::move(trees);
  };
  const auto& all = enumerate(enumerate, 0, n);

  // Preorder (label, split) sequence; lexicographically smaller wins ties.
  auto key = [](const DecodeResult& t) {
    std::vector<int> k;
    for (std::size_t s = 0; s < t.spans.size(); ++s) {
      k.push_back(t.spans[s].label);
      k.push_back(t.spans[s].j - t.spans[s].i > 1 ? t.spans[s + 1].j : -1);
    }
    return k;
  };
  const DecodeResult* best = &all.front();
  for (const auto& t : all) {
    if (t.score > best->score || (t.score == best->score && key(t) < key(*best))) best = &t;
  }
  return *best;
}

double tree_score(const SpanChart& chart, const std::vector<ChartSpan>& spans) {
  std::size_t next = 0;
  const double score = score_subtree(chart, spans, next);
  if (next != spans.size()) throw Error("bracketing has trailing spans");
  return score;
}

ConstituencyTree to_tree(const DecodeResult& decoded, const LabelInventory& labels, int n) {
  ConstituencyTree t{n, {}};
  for (const auto& s : decoded.spans) t.spans.push_back({s.i, s.j, labels.name(s.label)});
  return debinarize(t);
}

ConstituencyTree decode_tree(const SpanChart& chart, const LabelInventory& labels) {
  if (chart.num_labels() != labels.size()) throw Error("chart width does not match the label inventory");
  return to_tree(cyk_decode(chart), labels, chart.n());
}

}  // namespace ucca
