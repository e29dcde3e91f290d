#include "ucca/evaluation.hpp"

#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace ucca {

std::string_view to_string(Population p) {
  switch (p) {
    case Population::Primary: return "primary";
    case Population::Remote: return "remote";
    case Population::All: return "all";
  }
  return "?";
}

std::string_view to_string(Mode m) { return m == Mode::Labeled ? "labeled" : "unlabeled"; }

namespace {

constexpr std::array<Population, 3> kPopulations = {Population::Primary, Population::Remote, Population::All};
constexpr std::array<Mode, 2> kModes = {Mode::Labeled, Mode::Unlabeled};

int count_terminals(const UccaGraph& g) {
  int n = 0;
  for (const auto& id : g.nodes) {
    if (terminal_position(id)) ++n;
  }
  return n;
}

using Multiset = std::map<EdgeSignature, long>;

Multiset signatures(const UccaGraph& g, const std::map<std::string, std::vector<int>>& yields, bool remote,
                    Mode mode) {
  Multiset out;
  for (const auto& e : g.edges) {
    if (e.remote != remote) continue;
    EdgeSignature sig{yields.at(e.parent), yields.at(e.child), std::nullopt, e.remote};
    if (mode == Mode::Labeled) sig.category = e.category;
    ++out[sig];
  }
  return out;
}

long intersection(const Multiset& a, const Multiset& b, std::optional<Category> only = std::nullopt) {
  long total = 0;
  for (const auto& [sig, count] : a) {
    if (only && sig.category != only) continue;
    if (auto it = b.find(sig); it != b.end()) total += std::min(count, it->second);
  }
  return total;
}

long size(const Multiset& m, std::optional<Category> only = std::nullopt) {
  long total = 0;
  for (const auto& [sig, count] : m) {
    if (!only || sig.category == only) total += count;
  }
  return total;
}

}  // namespace

EdgeSignature edge_signature(const UccaGraph& g, const Edge& edge, Mode mode) {
  const auto yields = all_yields(g);
  EdgeSignature sig{yields.at(edge.parent), yields.at(edge.child), std::nullopt, edge.remote};
  if (mode == Mode::Labeled) sig.category = edge.category;
  return sig;
}

double precision(const Counts& c) {
  if (c.predicted > 0) return static_cast<double>(c.matched) / static_cast<double>(c.predicted);
  return c.gold == 0 ? 1.0 : 0.0;
}

double recall(const Counts& c) {
  if (c.gold > 0) return static_cast<double>(c.matched) / static_cast<double>(c.gold);
  return c.predicted == 0 ? 1.0 : 0.0;
}

double f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

double f1(const Counts& c) { return f1(precision(c), recall(c)); }

PairCounts& PairCounts::operator+=(const PairCounts& o) {
  for (std::size_t p = 0; p < cells.size(); ++p) {
    for (std::size_t m = 0; m < cells[p].size(); ++m) cells[p][m] += o.cells[p][m];
  }
  for (const auto& [cat, c] : o.per_category) per_category[cat] += c;
  return *this;
}

PairCounts score_pair(const UccaGraph& pred, const UccaGraph& gold) {
  const int n_pred = count_terminals(pred);
  const int n_gold = count_terminals(gold);
  if (n_pred != n_gold) {
    throw Error("token count mismatch: predicted graph has " + std::to_string(n_pred) + ", gold has " +
                std::to_string(n_gold));
  }
  const auto pred_yields = all_yields(pred);
  const auto gold_yields = all_yields(gold);

  PairCounts out;
  out.n_tokens = n_gold;
  for (Mode mode : kModes) {
    for (bool remote : {false, true}) {
      const auto p = signatures(pred, pred_yields, remote, mode);
      const auto g = signatures(gold, gold_yields, remote, mode);
      Counts c{intersection(p, g), size(p), size(g)};
      out.at(remote ? Population::Remote : Population::Primary, mode) = c;
      out.at(Population::All, mode) += c;
      if (mode == Mode::Labeled && !remote) {
        for (Category cat : kAllCategories) {
          Counts cc{intersection(p, g, cat), size(p, cat), size(g, cat)};
          if (cc.predicted > 0 || cc.gold > 0) out.per_category[cat] = cc;
        }
      }
    }
  }
  return out;
}

Score make_score(const Counts& c) {
  Score s;
  s.counts = c;
  s.precision = precision(c);
  s.recall = recall(c);
  s.f1 = f1(s.precision, s.recall);
  return s;
}

EvalReport aggregate(const std::vector<PairCounts>& pairs) {
  EvalReport report;
  report.passages = static_cast<int>(pairs.size());
  PairCounts total;
  for (const auto& p : pairs) total += p;
  for (std::size_t p = 0; p < 3; ++p) {
    for (std::size_t m = 0; m < 2; ++m) report.cells[p][m] = make_score(total.cells[p][m]);
  }
  for (const auto& [cat, c] : total.per_category) report.per_category[cat] = make_score(c);

  for (int threshold : kLengthThresholds) {
    LengthBucket bucket;
    bucket.min_length = threshold;
    PairCounts sum;
    for (const auto& p : pairs) {
      if (p.n_tokens >= threshold) {
        sum += p;
        ++bucket.passages;
      }
    }
    for (std::size_t p = 0; p < 3; ++p) {
      for (std::size_t m = 0; m < 2; ++m) bucket.cells[p][m] = make_score(sum.cells[p][m]);
    }
    report.by_length.push_back(bucket);
  }
  return report;
}

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

nlohmann::json score_json(const Score& s) {
  return {{"precision", s.precision},
          {"recall", s.recall},
          {"f1", s.f1},
          {"matched", s.counts.matched},
          {"predicted", s.counts.predicted},
          {"gold", s.counts.gold}};
}

nlohmann::json cells_json(const std::array<std::array<Score, 2>, 3>& cells) {
  nlohmann::json out = nlohmann::json::object();
  for (Population p : kPopulations) {
    for (Mode m : kModes) {
      out[std::string(to_string(m))][std::string(to_string(p))] =
          score_json(cells[static_cast<std::size_t>(p)][static_cast<std::size_t>(m)]);
    }
  }
  return out;
}

}  // namespace

std::string format_report_table(const EvalReport& r, const ReportFormat& format) {
  std::ostringstream out;
  out << "passages: " << r.passages << "\n\n";
  out << "mode       population  matched  predicted  gold    P       R       F1\n";
  for (Mode m : kModes) {
    for (Population p : kPopulations) {
      const auto& s = r.at(p, m);
      char line[160];
      std::snprintf(line, sizeof line, "%-10s %-11s %7ld  %9ld  %6ld  %s  %s  %s\n", std::string(to_string(m)).c_str(),
                    std::string(to_string(p)).c_str(), s.counts.matched, s.counts.predicted, s.counts.gold,
                    fixed(s.precision).c_str(), fixed(s.recall).c_str(), fixed(s.f1).c_str());
      out << line;
    }
  }
  if (format.length_breakdown) {
    out << "\nlabeled F1 by sentence length\n";
    out << "length  passages  primary  remote   all\n";
    for (const auto& b : r.by_length) {
      char line[128];
      std::snprintf(line, sizeof line, ">=%-5d %8d  %s   %s   %s\n", b.min_length, b.passages,
                    fixed(b.cells[0][0].f1).c_str(), fixed(b.cells[1][0].f1).c_str(), fixed(b.cells[2][0].f1).c_str());
      out << line;
    }
  }
  if (format.category_breakdown) {
    out << "\nlabeled primary-edge F1 by category\n";
    for (const auto& [cat, s] : r.per_category) {
      out << "  " << to_string(cat) << "  " << fixed(s.f1) << "  (gold " << s.counts.gold << ")\n";
    }
  }
  return out.str();
}

std::string format_report_json(const EvalReport& r, const ReportFormat& format) {
  nlohmann::json out;
  out["format"] = 1;
  out["passages"] = r.passages;
  out["scores"] = cells_json(r.cells);
  if (format.length_breakdown) {
    nlohmann::json buckets = nlohmann::json::array();
    for (const auto& b : r.by_length) {
      buckets.push_back({{"min_length", b.min_length}, {"passages", b.passages}, {"scores", cells_json(b.cells)}});
    }
    out["by_length"] = buckets;
  }
  if (format.category_breakdown) {
    nlohmann::json cats = nlohmann::json::object();
    for (const auto& [cat, s] : r.per_category) cats[std::string(to_string(cat))] = score_json(s);
    out["by_category"] = cats;
  }
  return out.dump(2) + "\n";
}

}  // namespace ucca
