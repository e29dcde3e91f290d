#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ucca {

/// Scores s(i, j, l) for every span 0 <= i < j <= n and label id l, where
/// label 0 is ∅. Stored densely, one row of labels per span.
class SpanChart {
 public:
  SpanChart() = default;
  SpanChart(int n, int num_labels, double fill = 0.0);

  int n() const { return n_; }
  int num_labels() const { return num_labels_; }
  std::size_t num_spans() const { return static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_ + 1) / 2; }

  /// Row of span (i, j) in the dense layout.
  std::size_t span_index(int i, int j) const {
    const auto si = static_cast<std::size_t>(i);
    return si * static_cast<std::size_t>(n_) - si * (si - 1) / 2 + static_cast<std::size_t>(j - i - 1);
  }

  double& at(int i, int j, int label) { return scores_[offset(i, j) + static_cast<std::size_t>(label)]; }
  double at(int i, int j, int label) const { return scores_[offset(i, j) + static_cast<std::size_t>(label)]; }

  std::span<double> cell(int i, int j) { return {scores_.data() + offset(i, j), static_cast<std::size_t>(num_labels_)}; }
  std::span<const double> cell(int i, int j) const {
    return {scores_.data() + offset(i, j), static_cast<std::size_t>(num_labels_)};
  }

  std::vector<double>& data() { return scores_; }
  const std::vector<double>& data() const { return scores_; }

  bool operator==(const SpanChart&) const = default;

 private:
  std::size_t offset(int i, int j) const { return span_index(i, j) * static_cast<std::size_t>(num_labels_); }

  int n_ = 0;
  int num_labels_ = 0;
  std::vector<double> scores_;
};

/// Per-span log-softmax over labels.
SpanChart log_normalize(const SpanChart& logits);

}  // namespace ucca
