// Acceptance checks 1-8. Prints one PASS/FAIL line per criterion; with
// arguments, runs only the listed criteria. Exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "synthetic.hpp"
#include "ucca/conversion.hpp"
#include "ucca/decoder.hpp"
#include "ucca/evaluation.hpp"
#include "ucca/io.hpp"
#include "ucca/training.hpp"

using namespace ucca;
using namespace ucca::testing;

namespace {

// Tolerances and budgets.
constexpr int kRoundtripGraphs = 1000;
constexpr int kRoundtripMaxTokens = 15;
constexpr double kMinDiscontinuityRate = 0.2;
constexpr double kRoundtripSeconds = 10.0;

constexpr int kChartsPerLength = 500;
constexpr int kChartLabels = 6;
constexpr double kDecoderSeconds = 60.0;
constexpr double kOracleTolerance = 1e-12;

constexpr int kProbesPerGroup = 20;

constexpr double kEq7Expected = 0.6857;
constexpr double kEq7Tolerance = 5e-5;
constexpr int kRandomPairs = 100;

constexpr double kOverfitPrimaryF1 = 0.99;
constexpr double kOverfitRemoteF1 = 0.9;
constexpr int kOverfitMaxEpochs = 200;
constexpr double kOverfitSeconds = 300.0;

constexpr int kRegimeSeeds = 5;

constexpr int kStatsTrain = 15;
constexpr int kStatsValidation = 238;
constexpr int kStatsTest = 239;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (pass) detail << "failed: ";
    detail << what << "; ";
    pass = false;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<Passage> toy_corpus() { return load_corpus(source_path("data/toy")).passages; }

Outcome conversion_roundtrip() {
  Outcome out;
  std::mt19937_64 rng(101);
  GraphGenOptions options;
  options.max_tokens = kRoundtripMaxTokens;
  options.max_remotes = 2;
  options.discontinuity_rate = 0.8;
  const auto start = Clock::now();
  int failures = 0, discontinuous = 0, remotes = 0;
  for (int k = 0; k < kRoundtripGraphs; ++k) {
    const int n = std::uniform_int_distribution<int>(1, kRoundtripMaxTokens)(rng);
    const UccaGraph g = random_graph(rng, n, options);
    discontinuous += has_discontinuity(g);
    remotes += static_cast<int>(std::count_if(g.edges.begin(), g.edges.end(), [](const Edge& e) { return e.remote; }));
    try {
      const TreeConversion c = graph_to_tree(g);
      const UccaGraph back = tree_to_graph(c.tree, c.remotes, c.discontinuities);
      if (!structurally_equal(back, g)) ++failures;
    } catch (const Error&) {
      ++failures;
    }
  }
  const double elapsed = seconds_since(start);
  const double rate = static_cast<double>(discontinuous) / kRoundtripGraphs;
  out.require(failures == 0, std::to_string(failures) + " roundtrip failures");
  out.require(rate >= kMinDiscontinuityRate, "discontinuity rate below 20%");
  out.require(elapsed < kRoundtripSeconds, "over the time budget");
  out.detail << kRoundtripGraphs << " graphs, " << failures << " failures, discontinuous " << std::fixed
             << std::setprecision(1) << 100 * rate << "%, " << remotes << " remote edges, " << std::setprecision(2)
             << elapsed << " s";
  return out;
}

SpanChart random_chart(std::mt19937_64& rng, int n, bool integral) {
  SpanChart chart(n, kChartLabels);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> small(-2, 2);
  for (auto& v : chart.data()) v = integral ? small(rng) : normal(rng);
  return chart;
}

// Every bracketing with every labeling, written independently of the library.
double enumerate_best(const SpanChart& chart) {
  const int n = chart.n();
  std::function<double(int, int)> best = [&](int i, int j) {
    double top = -1e300;
    const int first = (i == 0 && j == n) ? 1 : 0;
    for (int l = first; l < chart.num_labels(); ++l) {
      if (j - i == 1) {
        top = std::max(top, chart.at(i, j, l));
        continue;
      }
      for (int k = i + 1; k < j; ++k) top = std::max(top, chart.at(i, j, l) + best(i, k) + best(k, j));
    }
    return top;
  };
  return best(0, n);
}

Outcome decoder_optimality() {
  Outcome out;
  std::mt19937_64 rng(202);
  const auto start = Clock::now();
  int score_mismatch = 0, tree_mismatch = 0, oracle_mismatch = 0, charts = 0;
  for (int n = 2; n <= 8; ++n) {
    for (int k = 0; k < kChartsPerLength; ++k) {
      // Every other chart has small integer scores, so ties are common.
      const SpanChart chart = random_chart(rng, n, k % 2 == 1);
      const DecodeResult cyk = cyk_decode(chart);
      const DecodeResult brute = brute_force_decode(chart);
      ++charts;
      score_mismatch += cyk.score != brute.score;
      tree_mismatch += cyk.spans != brute.spans;
      if (n <= 5 && std::abs(cyk.score - enumerate_best(chart)) > kOracleTolerance) ++oracle_mismatch;
    }
  }
  const double elapsed = seconds_since(start);
  out.require(score_mismatch == 0, "score mismatches");
  out.require(tree_mismatch == 0, "tree mismatches");
  out.require(oracle_mismatch == 0, "enumeration oracle mismatches");
  out.require(elapsed < kDecoderSeconds, "over the time budget");
  out.detail << charts << " charts, " << score_mismatch << " score / " << tree_mismatch << " tree / "
             << oracle_mismatch << " oracle mismatches, " << std::fixed << std::setprecision(2) << elapsed << " s";
  return out;
}

Outcome gradient_correctness() {
  Outcome out;
  const Passage p = figure1_passage();
  ParserModel model = model_for({p}, tiny_model_config(), 303);
  std::mt19937_64 rng(304);
  const std::vector<std::pair<ParamGroup, std::string>> groups = {
      {ParamGroup::Embedding, "embedding"}, {ParamGroup::Attention, "attention"},
      {ParamGroup::FeedForward, "feed-forward"}, {ParamGroup::LayerNorm, "layer-norm"},
      {ParamGroup::SpanMlp, "span-MLP"}, {ParamGroup::Remote, "remote"}, {ParamGroup::Projection, "projection"}};
  double worst = 0.0;
  for (const auto& [group, name] : groups) {
    const auto probes = gradient_probes(model, p, group, kProbesPerGroup, rng);
    double group_worst = 0.0;
    for (const auto& probe : probes) group_worst = std::max(group_worst, probe.relative);
    worst = std::max(worst, group_worst);
    out.require(static_cast<int>(probes.size()) >= kProbesPerGroup, name + " has too few probes");
    out.require(group_worst < kProbeTolerance, name + " relative error " + std::to_string(group_worst));
  }
  out.detail << kProbesPerGroup << " probes x " << groups.size() << " groups, h = " << kProbeStep
             << ", worst relative error " << std::scientific << std::setprecision(2) << worst;
  return out;
}

Outcome metric_oracle() {
  Outcome out;
  // Single flip: one primary category changed.
  const UccaGraph gold = *figure1_passage().graph;
  UccaGraph flipped = gold;
  for (auto& e : flipped.edges) {
    if (!e.remote && e.category == Category::P) {
      e.category = Category::S;
      break;
    }
  }
  const PairCounts flip = score_pair(flipped, gold);
  const long n_gold = flip.at(Population::Primary, Mode::Labeled).gold;
  out.require(flip.at(Population::Primary, Mode::Labeled).matched == n_gold - 1, "single flip labeled");
  out.require(flip.at(Population::Primary, Mode::Unlabeled).matched == n_gold, "single flip unlabeled");

  // Micro pooling: (matched, predicted, gold) = (1, 2, 1) and (1, 1, 2).
  const UccaGraph flat = make_graph("r", {"r", "t1"}, {{"r", "t1", Category::P, false}});
  const UccaGraph chain =
      make_graph("r", {"r", "u", "t1"}, {{"r", "u", Category::H, false}, {"u", "t1", Category::P, false}});
  const EvalReport pooled = aggregate({score_pair(chain, flat), score_pair(flat, chain)});
  const Score& s = pooled.at(Population::Primary, Mode::Labeled);
  const double third = 2.0 / 3.0;
  out.require(std::abs(s.precision - third) < 1e-12 && std::abs(s.recall - third) < 1e-12 &&
                  std::abs(s.f1 - third) < 1e-12,
              "micro pooling");

  const double eq7 = f1(0.8, 0.6);
  out.require(std::abs(eq7 - kEq7Expected) <= kEq7Tolerance, "F1(0.8, 0.6) = " + std::to_string(eq7));

  std::mt19937_64 rng(404);
  int violations = 0;
  for (int k = 0; k < kRandomPairs; ++k) {
    const int n = std::uniform_int_distribution<int>(1, 12)(rng);
    const UccaGraph a = random_graph(rng, n);
    const UccaGraph b = random_graph(rng, n);
    const PairCounts self = score_pair(a, a), ab = score_pair(a, b), ba = score_pair(b, a);
    for (int pop = 0; pop < 3; ++pop) {
      for (int mode = 0; mode < 2; ++mode) {
        const auto p = static_cast<Population>(pop);
        const auto m = static_cast<Mode>(mode);
        const Counts& c = self.at(p, m);
        if (c.matched != c.gold || c.predicted != c.gold || f1(c) != 1.0) ++violations;
        if (precision(ab.at(p, m)) != recall(ba.at(p, m)) || f1(ab.at(p, m)) != f1(ba.at(p, m))) ++violations;
      }
    }
  }
  out.require(violations == 0, std::to_string(violations) + " identity/symmetry violations");
  out.detail << "flip " << n_gold - 1 << "/" << n_gold << ", pooled F1 " << std::fixed << std::setprecision(4) << s.f1
             << ", F1(0.8, 0.6) = " << std::setprecision(6) << eq7 << ", " << kRandomPairs << " random pairs";
  return out;
}

Outcome overfit_sanity() {
  Outcome out;
  const std::vector<Passage> toy = toy_corpus();
  int with_remote = 0, discontinuous = 0, longest = 0;
  for (const auto& p : toy) {
    with_remote += std::any_of(p.graph->edges.begin(), p.graph->edges.end(), [](const Edge& e) { return e.remote; });
    discontinuous += has_discontinuity(*p.graph);
    longest = std::max(longest, p.size());
  }
  out.require(toy.size() == 10 && longest <= 12 && with_remote >= 3 && discontinuous >= 2, "toy corpus shape");

  TrainConfig config = load_config(source_path("data/configs/toy.json"));
  out.require(config.max_epochs <= kOverfitMaxEpochs, "toy config allows more than 200 epochs");
  const auto start = Clock::now();
  const TrainResult result = train(config);
  const double elapsed = seconds_since(start);
  std::vector<const Passage*> ptrs;
  for (const auto& p : toy) ptrs.push_back(&p);
  const EvalReport report = evaluate_model(result.model, ptrs, nullptr, config.remote_threshold);
  const double primary = report.at(Population::Primary, Mode::Labeled).f1;
  const double remote = report.at(Population::Remote, Mode::Labeled).f1;
  out.require(primary >= kOverfitPrimaryF1, "labeled primary F1 below 0.99");
  out.require(remote >= kOverfitRemoteF1, "remote F1 below 0.9");
  out.require(elapsed < kOverfitSeconds, "over the time budget");
  out.detail << result.log["epochs"].size() << " epochs, train labeled primary F1 " << std::fixed
             << std::setprecision(4) << primary << ", remote F1 " << remote << ", " << std::setprecision(1)
             << elapsed << " s";
  return out;
}

// Synthetic suite: per language 12 train and 6 validation passages; the few-
// shot target contributes 3 training passages.
fs::path write_regime_suite() {
  const auto dir = scratch_dir("acceptance_regimes");
  std::mt19937_64 rng(505);
  for (const auto& language : kSyntheticLanguages) {
    const int train_size = language == "fr" ? 3 : 12;
    save_corpus(synthetic_corpus(rng, language, language + "_train", train_size), dir / ("train_" + language));
    save_corpus(synthetic_corpus(rng, language, language + "_dev", 6), dir / ("dev_" + language));
  }
  return dir;
}

TrainConfig regime_config(const fs::path& dir, RegimeType type, std::uint64_t seed) {
  Json j = {{"corpora", Json::array()},
            {"regime", {{"type", to_string(type)}, {"target", "fr"}}},
            {"seed", seed},
            {"batch_size", 4},
            {"max_epochs", 30},
            {"patience", 8},
            {"optimizer", {{"learning_rate", 2e-3}}},
            {"model",
             {{"d_model", 32}, {"heads", 4}, {"ffn", 64}, {"span_hidden", 32}, {"remote_hidden", 16},
              {"dropout", 0.1}}}};
  for (const auto& language : kSyntheticLanguages) {
    j["corpora"].push_back({{"language", language}, {"path", "train_" + language}, {"role", "train"}});
    j["corpora"].push_back({{"language", language}, {"path", "dev_" + language}, {"role", "validation"}});
  }
  return config_from_json(j, dir);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

Outcome regime_algebra() {
  Outcome out;
  const auto dir = write_regime_suite();
  std::set<std::string> target_train;
  for (const auto& p : load_corpus(dir / "train_fr").passages) target_train.insert(p.id);

  std::vector<double> zero_f1, few_f1;
  for (int seed = 1; seed <= kRegimeSeeds; ++seed) {
    const TrainResult zero = train(regime_config(dir, RegimeType::ZeroShot, static_cast<std::uint64_t>(seed)));
    const TrainResult few = train(regime_config(dir, RegimeType::FewShot, static_cast<std::uint64_t>(seed)));
    std::set<std::string> zero_ids, few_ids;
    for (const auto& e : zero.log["train_passages"]) {
      zero_ids.insert(e["id"].get<std::string>());
      out.require(e["language"] != "fr", "zero-shot log lists a target passage");
    }
    for (const auto& e : few.log["train_passages"]) few_ids.insert(e["id"].get<std::string>());
    for (const auto& id : target_train) out.require(!zero_ids.count(id), "zero-shot trained on " + id);
    std::set<std::string> expected = zero_ids;
    expected.insert(target_train.begin(), target_train.end());
    out.require(few_ids == expected, "few-shot set differs from zero-shot plus target");
    for (const auto& epoch : zero.log["epochs"]) {
      out.require(epoch["passages_seen"].value("fr", 0) == 0, "zero-shot epoch saw a target passage");
    }

    const Corpus dev = load_corpus(dir / "dev_fr");
    std::vector<const Passage*> ptrs;
    for (const auto& p : dev.passages) ptrs.push_back(&p);
    zero_f1.push_back(labeled_average_f1(evaluate_model(zero.model, ptrs, nullptr, 0.5)));
    few_f1.push_back(labeled_average_f1(evaluate_model(few.model, ptrs, nullptr, 0.5)));
  }
  const double zero_median = median(zero_f1), few_median = median(few_f1);
  out.require(few_median >= zero_median, "few-shot median below zero-shot median");
  out.detail << kRegimeSeeds << " seeds, target validation F1 median zero-shot " << std::fixed << std::setprecision(4)
             << zero_median << ", few-shot " << few_median << " (per seed zero/few:";
  for (int k = 0; k < kRegimeSeeds; ++k) out.detail << " " << std::setprecision(3) << zero_f1[k] << "/" << few_f1[k];
  out.detail << ")";
  return out;
}

Outcome determinism() {
  Outcome out;
  const auto dir = scratch_dir("acceptance_determinism");
  TrainConfig config = load_config(source_path("data/configs/toy.json"));
  config.max_epochs = 3;
  config.stop_at_train_f1.reset();
  std::vector<const Passage*> ptrs;
  const std::vector<Passage> toy = toy_corpus();
  for (const auto& p : toy) ptrs.push_back(&p);
  std::vector<std::string> checkpoints, reports, logs;
  for (int run = 0; run < 2; ++run) {
    const TrainResult r = train(config);
    const auto path = dir / ("run" + std::to_string(run) + ".ckpt");
    save_checkpoint(r.model, config.remote_threshold, config_hash(config), path);
    checkpoints.push_back(read_file(path));
    const EvalReport report = evaluate_model(r.model, ptrs, nullptr, config.remote_threshold);
    reports.push_back(format_report_json(report, {true, true}));
    logs.push_back(r.log.dump());
  }
  out.require(checkpoints[0] == checkpoints[1], "checkpoints differ");
  out.require(reports[0] == reports[1], "evaluation reports differ");
  out.require(logs[0] == logs[1], "training logs differ");
  out.detail << "2 runs x " << config.max_epochs << " epochs at default model size, checkpoint "
             << checkpoints[0].size() << " bytes";
  return out;
}

Outcome format_stability() {
  Outcome out;
  const std::vector<Passage> toy = toy_corpus();
  const auto dir = scratch_dir("acceptance_formats");
  int mismatches = 0;
  for (const auto& p : toy) {
    save_passage(p, dir / (p.id + ".json"));
    mismatches += !(load_passage(dir / (p.id + ".json")) == p);
  }
  save_corpus(toy, dir / "bundle.json");
  mismatches += !(load_corpus(dir / "bundle.json").passages == toy);
  out.require(toy.size() == 10 && mismatches == 0, "load(save(p)) mismatch");

  std::mt19937_64 rng(808);
  auto split = [&](const std::string& name, int count) {
    std::vector<Passage> ps;
    for (int k = 0; k < count; ++k) {
      Passage p = random_passage(rng, {}, name + std::to_string(k));
      p.language = "fr";
      ps.push_back(std::move(p));
    }
    save_corpus(ps, dir / "french" / name);
  };
  split("train", kStatsTrain);
  split("validation", kStatsValidation);
  split("test", kStatsTest);
  const CorpusStats stats = corpus_stats(dir / "french");
  const int train = stats.splits.at("train").passages;
  const int validation = stats.splits.at("validation").passages;
  const int test = stats.splits.at("test").passages;
  out.require(train == kStatsTrain && validation == kStatsValidation && test == kStatsTest, "split counts");
  out.detail << toy.size() << " toy passages round-trip, stats " << train << "/" << validation << "/" << test;
  return out;
}

struct Criterion {
  int number;
  std::string name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "conversion roundtrip", conversion_roundtrip}, {2, "decoder optimality", decoder_optimality},
      {3, "gradient correctness", gradient_correctness}, {4, "metric oracle", metric_oracle},
      {5, "overfit sanity", overfit_sanity},             {6, "regime algebra", regime_algebra},
      {7, "determinism", determinism},                   {8, "format stability", format_stability}};
  std::set<int> selected;
  for (int k = 1; k < argc; ++k) selected.insert(std::stoi(argv[k]));
  bool all_pass = true;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.number)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    all_pass = all_pass && o.pass;
    std::cout << "criterion " << c.number << " " << (o.pass ? "PASS" : "FAIL") << "  " << c.name << ": "
              << o.detail.str() << std::endl;
  }
  return all_pass ? 0 : 1;
}
