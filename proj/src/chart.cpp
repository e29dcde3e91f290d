#include "ucca/chart.hpp"

#include <algorithm>
#include <cmath>

namespace ucca {

SpanChart::SpanChart(int n, int num_labels, double fill)
    : n_(n), num_labels_(num_labels), scores_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n + 1) / 2 *
                                                   static_cast<std::size_t>(num_labels),
                                               fill) {}

SpanChart log_normalize(const SpanChart& logits) {
  SpanChart out = logits;
  for (int i = 0; i < logits.n(); ++i) {
    for (int j = i + 1; j <= logits.n(); ++j) {
      auto cell = out.cell(i, j);
      const double top = *std::max_element(cell.begin(), cell.end());
      double sum = 0.0;
      for (double v : cell) sum += std::exp(v - top);
      const double log_z = top + std::log(sum);
      for (double& v : cell) v -= log_z;
    }
  }
  return out;
}

}  // namespace ucca
