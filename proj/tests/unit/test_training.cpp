#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "ucca/parallel.hpp"
#include "ucca/training.hpp"

using namespace ucca;
using namespace ucca::testing;

namespace {

Json minimal_config() {
  return Json::parse(R"({
    "corpora": [
      {"language": "en", "path": "train_en", "role": "train"},
      {"language": "en", "path": "dev_en", "role": "validation"}
    ]
  })");
}

// Three languages with 4 train and 2 validation passages each.
fs::path language_suite(const std::string& name) {
  const auto dir = scratch_dir(name);
  std::mt19937_64 rng(5);
  for (const std::string language : {"en", "de", "fr"}) {
    for (const std::string role : {"train", "dev"}) {
      std::vector<Passage> ps;
      for (int k = 0; k < (role == "train" ? 4 : 2); ++k) {
        Passage p = random_passage(rng, {}, language + "_" + role + std::to_string(k));
        p.language = language;
        ps.push_back(std::move(p));
      }
      save_corpus(ps, dir / (role + "_" + language));
    }
  }
  return dir;
}

TrainConfig suite_config(const fs::path& dir, RegimeType type, const std::string& target) {
  Json j = {{"corpora", Json::array()}, {"regime", {{"type", to_string(type)}, {"target", target}}}};
  for (const std::string language : {"en", "de", "fr"}) {
    j["corpora"].push_back({{"language", language}, {"path", "train_" + language}, {"role", "train"}});
    j["corpora"].push_back({{"language", language}, {"path", "dev_" + language}, {"role", "validation"}});
  }
  return config_from_json(j, dir);
}

std::set<std::string> ids(const std::vector<CorpusPassage>& ps) {
  std::set<std::string> out;
  for (const auto& cp : ps) out.insert(cp.passage.id);
  return out;
}

TrainConfig tiny_train_config(int epochs) {
  TrainConfig c;
  c.model = tiny_model_config();
  c.max_epochs = epochs;
  c.patience = epochs;
  c.batch_size = 2;
  c.optimizer.learning_rate = 5e-3;
  return c;
}

RegimeData data_of(const std::vector<Passage>& train, const std::vector<Passage>& validation) {
  RegimeData d;
  for (const auto& p : train) d.train.push_back({p, "en"});
  for (const auto& p : validation) d.validation.push_back({p, "en"});
  return d;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("minimal config takes defaults and resolves paths") {
  const TrainConfig c = config_from_json(minimal_config(), "/data/exp");
  CHECK(c.corpora.size() == 2);
  CHECK(c.corpora[0].path == "/data/exp/train_en");
  CHECK(c.regime.type == RegimeType::Single);
  CHECK(c.batch_size == 16);
  CHECK(c.clip_norm == 5.0);
  CHECK(c.model.d_model == 256);
  CHECK(c.model.heads == 8);
  CHECK(c.optimizer.learning_rate == 1e-3);
  CHECK_FALSE(c.stop_at_train_f1.has_value());
}

TEST_CASE("config JSON round-trips") {
  Json j = minimal_config();
  j["regime"] = {{"type", "few_shot"}, {"target", "de"}};
  j["model"] = {{"d_model", 32}, {"heads", 4}};
  j["stop_at_train_f1"] = 0.9;
  j["seed"] = 7;
  const TrainConfig c = config_from_json(j, "/x");
  const TrainConfig back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(config_hash(back) == config_hash(c));
  CHECK(back.regime.type == RegimeType::FewShot);
  CHECK(back.model.d_model == 32);
  CHECK(*back.stop_at_train_f1 == 0.9);
}

TEST_CASE("config hash tracks every field") {
  const TrainConfig a = config_from_json(minimal_config());
  TrainConfig b = a;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
  b = a;
  b.model.dropout = 0.2;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("config validation errors") {
  auto rejects = [](const Json& j) { CHECK_THROWS_AS(config_from_json(j), Error); };
  Json j = minimal_config();
  j["unknown_field"] = 1;
  rejects(j);
  j = minimal_config();
  j["corpora"].erase(1);
  rejects(j);
  j = minimal_config();
  j["regime"] = "zero_shot";
  rejects(j);
  j = minimal_config();
  j["regime"] = "sideways";
  rejects(j);
  j = minimal_config();
  j["batch_size"] = 0;
  rejects(j);
  j = minimal_config();
  j["batch_size"] = "many";
  rejects(j);
  j = minimal_config();
  j["model"] = {{"d_model", 30}, {"heads", 8}};
  rejects(j);
  j = minimal_config();
  j["optimizer"] = {{"type", "sgd"}};
  rejects(j);
  j = minimal_config();
  j["corpora"][0]["role"] = "test";
  rejects(j);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
}

}  // TEST_SUITE("config")

TEST_SUITE("regime") {

TEST_CASE("zero-shot drops target training passages only") {
  const auto dir = language_suite("regime_zero");
  const RegimeData zero = select_regime_data(suite_config(dir, RegimeType::ZeroShot, "fr"));
  CHECK(zero.train.size() == 8);
  for (const auto& cp : zero.train) CHECK(cp.language != "fr");
  CHECK(zero.validation.size() == 6);
}

TEST_CASE("few-shot is zero-shot plus the target passages") {
  const auto dir = language_suite("regime_few");
  const RegimeData zero = select_regime_data(suite_config(dir, RegimeType::ZeroShot, "fr"));
  const RegimeData few = select_regime_data(suite_config(dir, RegimeType::FewShot, "fr"));
  auto expected = ids(zero.train);
  for (const auto& cp : few.train) {
    if (cp.language == "fr") expected.insert(cp.passage.id);
  }
  CHECK(ids(few.train) == expected);
  CHECK(few.train.size() == 12);
}

TEST_CASE("single and cross regimes") {
  const auto dir = language_suite("regime_single");
  const RegimeData single = select_regime_data(suite_config(dir, RegimeType::Single, "de"));
  CHECK(single.train.size() == 4);
  CHECK(single.validation.size() == 2);
  for (const auto& cp : single.train) CHECK(cp.language == "de");
  const RegimeData cross = select_regime_data(suite_config(dir, RegimeType::Cross, ""));
  CHECK(cross.train.size() == 12);
  CHECK_THROWS_AS(select_regime_data(suite_config(dir, RegimeType::Single, "")), Error);
  CHECK_THROWS_AS(select_regime_data(suite_config(dir, RegimeType::Single, "xx")), Error);
}

TEST_CASE("regime names") {
  for (auto r : {RegimeType::Single, RegimeType::Cross, RegimeType::ZeroShot, RegimeType::FewShot}) {
    CHECK(parse_regime(to_string(r)) == r);
  }
  CHECK_THROWS_AS(parse_regime("many_shot"), Error);
}

}  // TEST_SUITE("regime")

TEST_SUITE("optimizer") {

TEST_CASE("first Adam step moves by the learning rate against the gradient sign") {
  Parameter p("w", ParamGroup::Projection, Matrix::Zero(1, 3));
  p.value << 1.0, -2.0, 0.5;
  p.grad << 4.0, -0.001, 0.0;
  AdamConfig config;
  config.learning_rate = 0.1;
  Adam adam({&p}, config);
  adam.step();
  CHECK(adam.steps() == 1);
  // m̂ = g and v̂ = g² after bias correction.
  CHECK(p.value(0, 0) == doctest::Approx(1.0 - 0.1 * 4.0 / (4.0 + 1e-9)).epsilon(1e-12));
  CHECK(p.value(0, 1) == doctest::Approx(-2.0 + 0.1 * 0.001 / (0.001 + 1e-9)).epsilon(1e-12));
  CHECK(p.value(0, 2) == 0.5);
}

TEST_CASE("second Adam step follows the moment recurrences") {
  Parameter p("w", ParamGroup::Projection, Matrix::Zero(1, 1));
  AdamConfig config;
  Adam adam({&p}, config);
  p.grad(0, 0) = 1.0;
  adam.step();
  p.grad(0, 0) = -3.0;
  adam.step();
  const double m = 0.9 * 0.1 * 1.0 + 0.1 * -3.0;
  const double v = 0.98 * 0.02 * 1.0 + 0.02 * 9.0;
  const double mhat = m / (1 - 0.81);
  const double vhat = v / (1 - 0.98 * 0.98);
  const double first = -1e-3 * 1.0 / (1.0 + 1e-9);
  CHECK(p.value(0, 0) == doctest::Approx(first - 1e-3 * mhat / (std::sqrt(vhat) + 1e-9)).epsilon(1e-12));
}

TEST_CASE("gradient clipping") {
  Parameter a("a", ParamGroup::Projection, Matrix::Zero(1, 2));
  Parameter b("b", ParamGroup::Projection, Matrix::Zero(1, 1));
  a.grad << 3.0, 0.0;
  b.grad << 4.0;
  CHECK(clip_gradients({&a, &b}, 10.0) == doctest::Approx(5.0));
  CHECK(a.grad(0, 0) == 3.0);
  CHECK(clip_gradients({&a, &b}, 1.0) == doctest::Approx(5.0));
  CHECK(a.grad(0, 0) == doctest::Approx(0.6));
  CHECK(b.grad(0, 0) == doctest::Approx(0.8));
  CHECK(std::hypot(a.grad(0, 0), b.grad(0, 0)) == doctest::Approx(1.0));
}

}  // TEST_SUITE("optimizer")

TEST_SUITE("training") {

TEST_CASE("checkpoints round-trip bit for bit") {
  const Corpus toy = load_corpus(source_path("data/toy"));
  ParserModel model = model_for(toy.passages, tiny_model_config(), 4);
  const auto path = scratch_dir("ckpt") / "model.ckpt";
  save_checkpoint(model, 0.3, "abc", path);
  const Checkpoint ck = load_checkpoint(path, &model.labels());
  CHECK(ck.remote_threshold == 0.3);
  CHECK(ck.config_hash == "abc");
  CHECK(ck.model.labels() == model.labels());
  const auto a = model.parameters();
  const auto b = ck.model.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k]->value == b[k]->value);
  const Passage& p = toy.passages[2];
  CHECK(ck.model.forward(p, nullptr, {}).logits == model.forward(p, nullptr, {}).logits);
  CHECK(ck.model.parse(p, nullptr, 0.3).graph == model.parse(p, nullptr, 0.3).graph);
}

TEST_CASE("checkpoint errors") {
  const Corpus toy = load_corpus(source_path("data/toy"));
  ParserModel model = model_for(toy.passages, tiny_model_config(), 4);
  const auto dir = scratch_dir("ckpt_errors");
  save_checkpoint(model, 0.5, "h", dir / "m.ckpt");
  LabelInventory other;
  other.add("ROOT");
  other.add("A");
  CHECK_THROWS_AS(load_checkpoint(dir / "m.ckpt", &other), Error);

  std::string bytes = read_file(dir / "m.ckpt");
  write_file(dir / "truncated.ckpt", bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_AS(load_checkpoint(dir / "truncated.ckpt"), Error);
  write_file(dir / "trailing.ckpt", bytes + "x");
  CHECK_THROWS_AS(load_checkpoint(dir / "trailing.ckpt"), Error);
  bytes[0] = 'X';
  write_file(dir / "magic.ckpt", bytes);
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.ckpt"), Error);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), Error);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const Corpus toy = load_corpus(source_path("data/toy"));
  const RegimeData data = data_of({toy.passages.begin(), toy.passages.begin() + 4}, {toy.passages[4]});
  TrainConfig config = tiny_train_config(3);
  config.model.dropout = 0.1;
  config.model.word_dropout = 0.25;
  const TrainResult a = train(config, data, nullptr);
  const TrainResult b = train(config, data, nullptr);
  CHECK(a.log == b.log);
  const auto pa = a.model.parameters();
  const auto pb = b.model.parameters();
  for (std::size_t k = 0; k < pa.size(); ++k) CHECK(pa[k]->value == pb[k]->value);

  config.seed = 2;
  const TrainResult c = train(config, data, nullptr);
  CHECK(c.model.parameters()[0]->value != pa[0]->value);
}

TEST_CASE("training loss decreases on the toy corpus") {
  const Corpus toy = load_corpus(source_path("data/toy"));
  const RegimeData data = data_of(toy.passages, {toy.passages[0]});
  const TrainResult r = train(tiny_train_config(20), data, nullptr);
  const auto& epochs = r.log["epochs"];
  REQUIRE(epochs.size() == 20);
  double first = 0.0, last = 0.0;
  for (int k = 0; k < 5; ++k) {
    first += epochs[k]["loss"].get<double>();
    last += epochs[19 - k]["loss"].get<double>();
  }
  CHECK(last < 0.5 * first);
  for (const auto& e : epochs) {
    CHECK(e["loss"].get<double>() == doctest::Approx(e["non_terminal"].get<double>() + e["remote"].get<double>()));
  }
}

TEST_CASE("log records the regime and the training languages") {
  const auto dir = language_suite("log_regime");
  TrainConfig config = suite_config(dir, RegimeType::ZeroShot, "de");
  config.model = tiny_model_config();
  config.max_epochs = 1;
  const TrainResult r = train(config);
  CHECK(r.log["regime"]["type"] == "zero_shot");
  CHECK(r.log["regime"]["target"] == "de");
  CHECK_FALSE(r.log["train_languages"].contains("de"));
  CHECK(r.log["train_languages"]["en"] == 4);
  for (const auto& e : r.log["train_passages"]) CHECK(e["language"] != "de");
  CHECK(r.log["validation_languages"]["de"] == 2);
  CHECK(r.log["epochs"][0]["passages_seen"].value("de", 0) == 0);
  CHECK(r.log["epochs"][0]["validation_f1_by_language"].contains("de"));
  CHECK(r.log["config_hash"] == config_hash(config));
}

TEST_CASE("overfitting the figure passage recovers its remote edge") {
  const Passage fig = figure1_passage();
  TrainConfig config = tiny_train_config(150);
  config.batch_size = 1;
  config.stop_at_train_f1 = 1.0;
  const TrainResult r = train(config, data_of({fig}, {fig}), nullptr);
  const ParseOutput out = r.model.parse(fig, nullptr, config.remote_threshold);
  CHECK(structurally_equal(out.graph, *fig.graph));
  const auto gold = graph_to_tree(*fig.graph);
  CHECK(out.remotes == gold.remotes);
  REQUIRE(out.remotes.size() == 1);
  CHECK(out.remotes[0].child_yield == std::vector<int>{1});
  CHECK(out.remotes[0].category == Category::A);
}

}  // TEST_SUITE("training")

TEST_SUITE("parallel") {

TEST_CASE("every index runs once and results keep their order") {
  for (int threads : {1, 2, 5}) {
    std::vector<int> hits(37, 0);
    parallel_for(hits.size(), threads, [&](std::size_t k) { hits[k] += static_cast<int>(k) + 1; });
    for (std::size_t k = 0; k < hits.size(); ++k) CHECK(hits[k] == static_cast<int>(k) + 1);
  }
  parallel_for(0, 4, [](std::size_t) { FAIL("no work expected"); });
}

TEST_CASE("exceptions propagate") {
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t k) {
                                 if (k == 6) throw Error("boom");
                               }),
                  Error);
}

TEST_CASE("parallel parsing matches sequential parsing") {
  const Corpus toy = load_corpus(source_path("data/toy"));
  const ParserModel model = model_for(toy.passages, tiny_model_config(), 9);
  std::vector<UccaGraph> one(toy.passages.size()), many(toy.passages.size());
  auto run = [&](std::vector<UccaGraph>& into, int threads) {
    parallel_for(toy.passages.size(), threads,
                 [&](std::size_t k) { into[k] = model.parse(toy.passages[k], nullptr, 0.5).graph; });
  };
  run(one, 1);
  run(many, 4);
  CHECK(one == many);
}

TEST_CASE("thread count from the environment") {
  ::setenv("UCCA_THREADS", "3", 1);
  CHECK(default_threads() == 3);
  ::setenv("UCCA_THREADS", "zero", 1);
  CHECK(default_threads() == 1);
  ::unsetenv("UCCA_THREADS");
  CHECK(default_threads() == 1);
}

}  // TEST_SUITE("parallel")
