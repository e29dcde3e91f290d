// ucca: validate, convert, import, train, parse, evaluate and stats.

#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ucca/conversion.hpp"
#include "ucca/evaluation.hpp"
#include "ucca/graph.hpp"
#include "ucca/io.hpp"
#include "ucca/parallel.hpp"
#include "ucca/training.hpp"

namespace {

using namespace ucca;

// Exit codes.
constexpr int kOk = 0;
constexpr int kInvalid = 1;  // validate found bad passages
constexpr int kFailed = 2;

struct Globals {
  std::optional<std::uint64_t> seed;
  int threads = 0;

  int workers() const { return threads > 0 ? threads : default_threads(); }
};

void report_error(const std::string& type, const std::string& message, const std::string& command) {
  Json e = {{"error", {{"type", type}, {"message", message}, {"command", command}}}};
  std::cerr << e.dump() << '\n';
}

int run_validate(const std::string& path) {
  LoadOptions options;
  options.lenient = true;
  const Corpus corpus = load_corpus(path, options);
  Json out = {{"passages", corpus.passages.size() + static_cast<std::size_t>(corpus.skipped)},
              {"valid", corpus.passages.size()},
              {"invalid", Json::array()}};
  for (const auto& w : corpus.warnings) out["invalid"].push_back(w);
  std::cout << out.dump(2) << '\n';
  return corpus.skipped > 0 ? kInvalid : kOk;
}

int run_convert(const std::string& input, const std::string& direction, const std::string& out) {
  if (direction == "graph2tree") {
    const Corpus corpus = load_corpus(input);
    std::vector<TreeEntry> entries;
    for (const auto& p : corpus.passages) {
      entries.push_back({p.id, p.language, p.terminals, graph_to_tree(*p.graph)});
    }
    save_tree_file(entries, out);
    std::cout << "converted " << entries.size() << " passages to trees\n";
    return kOk;
  }
  if (direction == "tree2graph") {
    std::vector<Passage> passages;
    for (const auto& e : load_tree_file(input)) {
      Passage p;
      p.id = e.id;
      p.language = e.language;
      p.terminals = e.terminals;
      p.graph = tree_to_graph(e.conversion.tree, e.conversion.remotes, e.conversion.discontinuities);
      const auto report = validate_graph(*p.graph, p.size());
      if (!report.ok()) throw Error("passage " + p.id + ": " + report.summary());
      passages.push_back(std::move(p));
    }
    save_corpus(passages, out);
    std::cout << "converted " << passages.size() << " trees to graphs\n";
    return kOk;
  }
  throw Error("unknown direction '" + direction + "'");
}

int run_import(const std::string& input, const std::string& format, const std::string& language,
               const std::string& conllu, const std::string& out) {
  ImportReport report;
  std::vector<Passage> passages;
  if (format == "ucca-xml") {
    passages = import_ucca_xml(input, language, &report);
  } else if (format == "mrp") {
    passages = import_mrp(input, language, &report);
  } else {
    throw Error("unknown import format '" + format + "'");
  }
  if (!conllu.empty()) apply_conllu(passages, conllu);
  for (const auto& p : passages) {
    const auto v = validate_graph(*p.graph, p.size());
    if (!v.ok()) throw Error("imported passage " + p.id + " is invalid: " + v.summary());
  }
  save_corpus(passages, out);
  Json j = {{"passages", passages.size()},
            {"implicit_units_dropped", report.implicit_units},
            {"linkage_nodes_dropped", report.linkage_nodes},
            {"warnings", report.warnings}};
  std::cout << j.dump(2) << '\n';
  return kOk;
}

struct TrainOverrides {
  std::optional<int> epochs, batch_size, patience;
  std::optional<double> learning_rate;
  std::string regime, target;
};

int run_train(const Globals& g, const std::string& config_path, const std::string& out, std::string log_path,
              const TrainOverrides& o) {
  TrainConfig config = load_config(config_path);
  if (g.seed) config.seed = *g.seed;
  if (o.epochs) config.max_epochs = *o.epochs;
  if (o.batch_size) config.batch_size = *o.batch_size;
  if (o.patience) config.patience = *o.patience;
  if (o.learning_rate) config.optimizer.learning_rate = *o.learning_rate;
  if (!o.regime.empty()) config.regime.type = parse_regime(o.regime);
  if (!o.target.empty()) config.regime.target = o.target;
  // Re-run the file validation on the overridden values.
  config = config_from_json(config_to_json(config));

  TrainResult result = train(config);
  save_checkpoint(result.model, config.remote_threshold, config_hash(config), out);
  if (log_path.empty()) log_path = out + ".log.json";
  write_file(log_path, dump_json(result.log));
  const Json& last = result.log["epochs"].back();
  std::cout << "epochs " << result.log["epochs"].size() << ", best epoch " << result.log["best_epoch"]
            << ", validation F1 " << result.log["best_validation_f1"];
  if (last.contains("train_primary_f1")) std::cout << ", train primary F1 " << last["train_primary_f1"];
  std::cout << "\ncheckpoint " << out << "\nlog " << log_path << '\n';
  return kOk;
}

int run_parse(const Globals& g, const std::string& checkpoint_path, const std::string& input, const std::string& out,
              bool no_remotes, std::optional<double> threshold, const std::string& external_path) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  LoadOptions options;
  options.allow_unannotated = true;
  Corpus corpus = load_corpus(input, options);
  std::optional<ExternalVectors> external;
  if (!external_path.empty()) external = load_external_vectors(external_path);
  if (ckpt.model.config().external_dim > 0 && !external) {
    throw Error("checkpoint expects external vectors; pass --external");
  }
  const double t = threshold.value_or(ckpt.remote_threshold);
  std::vector<int> dropped(corpus.passages.size(), 0);
  parallel_for(corpus.passages.size(), g.workers(), [&](std::size_t k) {
    Passage& p = corpus.passages[k];
    const Matrix* ext = external ? &external->rows(p.id, p.size()) : nullptr;
    ParseOutput parsed = ckpt.model.parse(p, ext, t, !no_remotes);
    dropped[k] = parsed.diagnostics.dropped_remotes;
    p.graph = std::move(parsed.graph);
  });
  save_corpus(corpus.passages, out);
  int total_dropped = 0;
  for (int d : dropped) total_dropped += d;
  std::cout << "parsed " << corpus.passages.size() << " passages";
  if (total_dropped > 0) std::cout << " (" << total_dropped << " remote edges dropped)";
  std::cout << '\n';
  return kOk;
}

int run_evaluate(const Globals& g, const std::string& pred_path, const std::string& gold_path,
                 const std::string& breakdown, bool json) {
  ReportFormat format;
  std::stringstream ss(breakdown);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item == "length") {
      format.length_breakdown = true;
    } else if (item == "category") {
      format.category_breakdown = true;
    } else if (!item.empty()) {
      throw Error("unknown breakdown '" + item + "'");
    }
  }
  const Corpus pred = load_corpus(pred_path);
  const Corpus gold = load_corpus(gold_path);
  std::map<std::string, const Passage*> by_id;
  for (const auto& p : pred.passages) by_id[p.id] = &p;
  std::vector<std::string> missing;
  for (const auto& p : gold.passages) {
    if (!by_id.count(p.id)) missing.push_back(p.id);
  }
  if (!missing.empty()) {
    std::string ids;
    for (const auto& id : missing) ids += (ids.empty() ? "" : ", ") + id;
    throw Error("no prediction for gold passages: " + ids);
  }
  std::vector<PairCounts> pairs(gold.passages.size());
  parallel_for(gold.passages.size(), g.workers(), [&](std::size_t k) {
    const Passage& gp = gold.passages[k];
    pairs[k] = score_pair(*by_id.at(gp.id)->graph, *gp.graph);
  });
  const EvalReport report = aggregate(pairs);
  std::cout << (json ? format_report_json(report, format) : format_report_table(report, format));
  return kOk;
}

int run_stats(const std::string& path, bool json) {
  LoadOptions options;
  options.allow_unannotated = true;
  const CorpusStats stats = corpus_stats(path, options);
  if (json) {
    std::cout << stats_to_json(stats).dump(2) << '\n';
  } else {
    std::cout << format_stats_table(stats);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UCCA graph parsing toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals globals;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Random seed (overrides config files)");
  app.add_option("--threads", globals.threads, "Worker threads for parse and evaluate (default: $UCCA_THREADS or 1)")
      ->check(CLI::NonNegativeNumber);

  std::string corpus_path, out, direction, format, language, conllu, config_path, log_path, checkpoint, input,
      external, pred, gold, breakdown;
  bool json = false, no_remotes = false;
  std::optional<double> threshold;
  TrainOverrides overrides;

  auto* validate = app.add_subcommand("validate", "Check every passage graph");
  validate->add_option("corpus", corpus_path)->required();

  auto* convert = app.add_subcommand("convert", "Graphs to trees or back");
  convert->add_option("corpus", corpus_path)->required();
  convert->add_option("--direction", direction)->required()->check(CLI::IsMember({"graph2tree", "tree2graph"}));
  convert->add_option("--out", out)->required();

  auto* import = app.add_subcommand("import", "Convert UCCA XML or MRP into passage files");
  import->add_option("path", input)->required();
  import->add_option("--format", format)->required()->check(CLI::IsMember({"ucca-xml", "mrp"}));
  import->add_option("--language", language)->required();
  import->add_option("--conllu", conllu, "CoNLL-U file with token features");
  import->add_option("--out", out)->required();

  auto* train_cmd = app.add_subcommand("train", "Train a parser");
  train_cmd->add_option("--config", config_path)->required();
  train_cmd->add_option("--out", out, "Checkpoint path")->required();
  train_cmd->add_option("--log", log_path, "Training log (default: <out>.log.json)");
  train_cmd->add_option("--epochs", overrides.epochs);
  train_cmd->add_option("--batch-size", overrides.batch_size);
  train_cmd->add_option("--patience", overrides.patience);
  train_cmd->add_option("--learning-rate", overrides.learning_rate);
  train_cmd->add_option("--regime", overrides.regime)
      ->check(CLI::IsMember({"single", "cross", "zero_shot", "few_shot"}));
  train_cmd->add_option("--target", overrides.target);

  auto* parse = app.add_subcommand("parse", "Parse a corpus with a checkpoint");
  parse->add_option("--checkpoint", checkpoint)->required();
  parse->add_option("--input", input)->required();
  parse->add_option("--out", out)->required();
  parse->add_flag("--no-remotes", no_remotes);
  parse->add_option("--threshold", threshold, "Remote gate threshold (default: from checkpoint)");
  parse->add_option("--external", external, "External vector file");

  auto* evaluate = app.add_subcommand("evaluate", "Score predicted against gold graphs");
  evaluate->add_option("--pred", pred)->required();
  evaluate->add_option("--gold", gold)->required();
  evaluate->add_option("--breakdown", breakdown, "Comma list of: length, category");
  evaluate->add_flag("--json", json);

  auto* stats = app.add_subcommand("stats", "Corpus statistics per split");
  stats->add_option("corpus", corpus_path)->required();
  stats->add_flag("--json", json);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what(), "");
    return kFailed;
  }
  if (*seed_opt) globals.seed = seed;

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (*validate) return run_validate(corpus_path);
    if (*convert) return run_convert(corpus_path, direction, out);
    if (*import) return run_import(input, format, language, conllu, out);
    if (*train_cmd) return run_train(globals, config_path, out, log_path, overrides);
    if (*parse) return run_parse(globals, checkpoint, input, out, no_remotes, threshold, external);
    if (*evaluate) return run_evaluate(globals, pred, gold, breakdown, json);
    if (*stats) return run_stats(corpus_path, json);
  } catch (const ucca::Error& e) {
    report_error("ucca", e.what(), command);
  } catch (const Json::exception& e) {
    report_error("json", e.what(), command);
  } catch (const std::exception& e) {
    report_error("internal", e.what(), command);
  }
  return kFailed;
}
