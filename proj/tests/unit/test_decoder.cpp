#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "ucca/decoder.hpp"

using namespace ucca;

namespace {

SpanChart random_chart(std::mt19937_64& rng, int n, int labels) {
  SpanChart chart(n, labels);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : chart.data()) v = normal(rng);
  return chart;
}

SpanChart integer_chart(std::mt19937_64& rng, int n, int labels) {
  SpanChart chart(n, labels);
  std::uniform_int_distribution<int> small(-1, 1);
  for (auto& v : chart.data()) v = small(rng);
  return chart;
}

// Independent oracle: every bracketing times every label assignment.
double exhaustive_best(const SpanChart& chart) {
  const int n = chart.n();
  std::function<std::vector<double>(int, int)> all_scores = [&](int i, int j) {
    std::vector<double> out;
    const int first = (i == 0 && j == n) ? 1 : 0;
    for (int l = first; l < chart.num_labels(); ++l) {
      if (j - i == 1) {
        out.push_back(chart.at(i, j, l));
        continue;
      }
      for (int k = i + 1; k < j; ++k) {
        for (double a : all_scores(i, k)) {
          for (double b : all_scores(k, j)) out.push_back(chart.at(i, j, l) + a + b);
        }
      }
    }
    return out;
  };
  const auto scores = all_scores(0, n);
  return *std::max_element(scores.begin(), scores.end());
}

double sum_spans(const SpanChart& chart, const std::vector<ChartSpan>& spans) {
  double total = 0.0;
  for (const auto& s : spans) total += chart.at(s.i, s.j, s.label);
  return total;
}

}  // namespace

TEST_SUITE("decoder") {

TEST_CASE("chart layout") {
  SpanChart chart(4, 3);
  CHECK(chart.num_spans() == 10);
  CHECK(chart.data().size() == 30);
  std::vector<bool> seen(chart.num_spans(), false);
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j <= 4; ++j) {
      const auto idx = chart.span_index(i, j);
      REQUIRE(idx < chart.num_spans());
      CHECK_FALSE(seen[idx]);
      seen[idx] = true;
    }
  }
  chart.at(1, 3, 2) = 5.0;
  CHECK(chart.cell(1, 3)[2] == 5.0);
}

TEST_CASE("log normalization gives distributions per span") {
  std::mt19937_64 rng(1);
  const auto chart = random_chart(rng, 5, 4);
  const auto norm = log_normalize(chart);
  for (int i = 0; i < 5; ++i) {
    for (int j = i + 1; j <= 5; ++j) {
      double total = 0.0;
      for (double v : norm.cell(i, j)) total += std::exp(v);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(norm.at(i, j, 1) - norm.at(i, j, 0) == doctest::Approx(chart.at(i, j, 1) - chart.at(i, j, 0)));
    }
  }
}

TEST_CASE("single token takes its best non-null label") {
  SpanChart chart(1, 3);
  chart.at(0, 1, 0) = 10.0;
  chart.at(0, 1, 1) = 1.0;
  chart.at(0, 1, 2) = 2.0;
  const auto cyk = cyk_decode(chart);
  REQUIRE(cyk.spans.size() == 1);
  CHECK(cyk.spans[0] == ChartSpan{0, 1, 2});
  CHECK(cyk.score == 2.0);
  CHECK(brute_force_decode(chart).spans == cyk.spans);
}

TEST_CASE("two-token hand example") {
  const LabelInventory labels({std::string(kNullLabel), "H", "A", "P"});
  SpanChart chart(2, labels.size());
  chart.at(0, 2, 1) = 5.0;
  chart.at(0, 1, 2) = 1.0;
  chart.at(1, 2, 3) = 1.0;
  const auto result = cyk_decode(chart);
  CHECK(result.score == 7.0);
  const ConstituencyTree expected{2, {{0, 2, "H"}, {0, 1, "A"}, {1, 2, "P"}}};
  CHECK(to_tree(result, labels, 2) == expected);
  CHECK(decode_tree(chart, labels) == expected);
}

TEST_CASE("three tokens against full enumeration") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto chart = random_chart(rng, 3, 4);
    CHECK(cyk_decode(chart).score == doctest::Approx(exhaustive_best(chart)).epsilon(1e-12));
  }
}

TEST_CASE("cyk matches brute force on random charts") {
  std::mt19937_64 rng(4);
  for (int n = 1; n <= 7; ++n) {
    for (int trial = 0; trial < 40; ++trial) {
      const auto chart = random_chart(rng, n, 5);
      const auto cyk = cyk_decode(chart);
      const auto brute = brute_force_decode(chart);
      CHECK(cyk.score == brute.score);
      CHECK(cyk.spans == brute.spans);
      CHECK(cyk.spans.size() == static_cast<std::size_t>(2 * n - 1));
      CHECK(std::abs(sum_spans(chart, cyk.spans) - cyk.score) <= 1e-9);
      CHECK(tree_score(chart, cyk.spans) == cyk.score);
      CHECK(cyk.spans.front().label != 0);
    }
  }
}

TEST_CASE("ties are broken identically") {
  std::mt19937_64 rng(6);
  for (int n = 2; n <= 7; ++n) {
    for (int trial = 0; trial < 40; ++trial) {
      const auto chart = integer_chart(rng, n, 3);
      const auto cyk = cyk_decode(chart);
      const auto brute = brute_force_decode(chart);
      CHECK(cyk.score == brute.score);
      CHECK(cyk.spans == brute.spans);
    }
  }
  SUBCASE("all-zero chart prefers the lowest split and label") {
    const auto result = cyk_decode(SpanChart(3, 3));
    const std::vector<ChartSpan> expected = {{0, 3, 1}, {0, 1, 0}, {1, 3, 0}, {1, 2, 0}, {2, 3, 0}};
    CHECK(result.spans == expected);
  }
}

TEST_CASE("positive scaling keeps the argmax") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 12)(rng);
    auto chart = random_chart(rng, n, 4);
    const auto before = cyk_decode(chart);
    const double lambda = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
    for (auto& v : chart.data()) v *= lambda;
    CHECK(cyk_decode(chart).spans == before.spans);
  }
}

TEST_CASE("decoded trees are well formed") {
  std::mt19937_64 rng(9);
  LabelInventory labels;
  for (const char* l : {"A", "P", "H", "C"}) labels.add(l);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 15)(rng);
    const auto tree = decode_tree(random_chart(rng, n, labels.size()), labels);
    CHECK(check_tree(tree).empty());
    CHECK(std::none_of(tree.spans.begin(), tree.spans.end(), [](const Span& s) { return s.label == kNullLabel; }));
  }
}

TEST_CASE("errors") {
  CHECK_THROWS_AS(cyk_decode(SpanChart()), Error);
  CHECK_THROWS_AS(cyk_decode(SpanChart(2, 1)), Error);
  CHECK_THROWS_AS(brute_force_decode(SpanChart(kBruteForceMaxLength + 1, 2)), Error);
  const LabelInventory labels;
  CHECK_THROWS_AS(decode_tree(SpanChart(2, 3), labels), Error);
}

TEST_CASE("decoding time grows cubically") {
  std::mt19937_64 rng(10);
  const auto small = random_chart(rng, 20, 2);
  const auto large = random_chart(rng, 40, 2);
  auto time_per_decode = [](const SpanChart& chart, int reps) {
    const auto start = std::chrono::steady_clock::now();
    double sink = 0.0;
    for (int r = 0; r < reps; ++r) sink += cyk_decode(chart).score;
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    CHECK(std::isfinite(sink));
    return elapsed.count() / reps;
  };
  // Interleaved rounds so that machine load affects both sizes alike.
  std::vector<double> ratios;
  for (int round = 0; round < 21; ++round) {
    const double t_small = time_per_decode(small, 800);
    const double t_large = time_per_decode(large, 100);
    ratios.push_back(t_large / t_small);
  }
  std::nth_element(ratios.begin(), ratios.begin() + 10, ratios.end());
  const double ratio = ratios[10];
  MESSAGE("n=40 / n=20 decode time ratio: " << ratio);
  CHECK(ratio >= 6.0);
  CHECK(ratio <= 12.0);
}

}  // TEST_SUITE
