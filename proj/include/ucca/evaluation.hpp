// Mutual-edge scoring of predicted against gold graphs.
//
// Edges are matched by yield signatures, so node ids never need to agree.
// Counts are kept per population (primary, remote, all) and mode
// (labeled, unlabeled) and micro-averaged over a corpus.

#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ucca/graph.hpp"

namespace ucca {

enum class Population { Primary = 0, Remote = 1, All = 2 };
enum class Mode { Labeled = 0, Unlabeled = 1 };

std::string_view to_string(Population p);
std::string_view to_string(Mode m);

struct EdgeSignature {
  std::vector<int> parent_yield;
  std::vector<int> child_yield;
  std::optional<Category> category;  // absent in unlabeled mode
  bool remote = false;

  auto operator<=>(const EdgeSignature&) const = default;
};

/// Yield-based signature of one edge of `g`.
EdgeSignature edge_signature(const UccaGraph& g, const Edge& edge, Mode mode);

struct Counts {
  long matched = 0;
  long predicted = 0;
  long gold = 0;

  Counts& operator+=(const Counts& o) {
    matched += o.matched;
    predicted += o.predicted;
    gold += o.gold;
    return *this;
  }
  bool operator==(const Counts&) const = default;
};

/// Precision: 0 when nothing was predicted but gold exists; 1 when both are
/// empty. Recall mirrors it.
double precision(const Counts& c);
double recall(const Counts& c);
/// Harmonic mean 2PR/(P+R); 0 when P+R = 0.
double f1(double p, double r);
double f1(const Counts& c);

struct PairCounts {
  int n_tokens = 0;
  // [population][mode]
  std::array<std::array<Counts, 2>, 3> cells{};
  /// Labeled primary-edge counts split by category (edges carrying it).
  std::map<Category, Counts> per_category;

  const Counts& at(Population p, Mode m) const {
    return cells[static_cast<std::size_t>(p)][static_cast<std::size_t>(m)];
  }
  Counts& at(Population p, Mode m) { return cells[static_cast<std::size_t>(p)][static_cast<std::size_t>(m)]; }
  PairCounts& operator+=(const PairCounts& o);
};

/// Throws ucca::Error when the two graphs anchor different token counts.
PairCounts score_pair(const UccaGraph& pred, const UccaGraph& gold);

struct Score {
  Counts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

Score make_score(const Counts& c);

struct LengthBucket {
  int min_length = 0;  // passages with at least this many tokens
  int passages = 0;
  std::array<std::array<Score, 2>, 3> cells{};
};

struct EvalReport {
  int passages = 0;
  std::array<std::array<Score, 2>, 3> cells{};
  std::map<Category, Score> per_category;
  std::vector<LengthBucket> by_length;

  const Score& at(Population p, Mode m) const {
    return cells[static_cast<std::size_t>(p)][static_cast<std::size_t>(m)];
  }
};

inline const std::vector<int> kLengthThresholds = {10, 20, 30, 40, 50};

/// Micro-averaged report; counts are summed before dividing.
EvalReport aggregate(const std::vector<PairCounts>& pairs);

/// Labeled pooled primary+remote F1, the model-selection metric.
inline double labeled_average_f1(const EvalReport& r) { return r.at(Population::All, Mode::Labeled).f1; }

struct ReportFormat {
  bool length_breakdown = false;
  bool category_breakdown = false;
};

std::string format_report_table(const EvalReport& r, const ReportFormat& format);
/// Machine-readable form; keys are stable and sorted.
std::string format_report_json(const EvalReport& r, const ReportFormat& format);

}  // namespace ucca
