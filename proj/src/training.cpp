#include "ucca/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace ucca {

std::string_view to_string(RegimeType r) {
  switch (r) {
    case RegimeType::Single: return "single";
    case RegimeType::Cross: return "cross";
    case RegimeType::ZeroShot: return "zero_shot";
    case RegimeType::FewShot: return "few_shot";
  }
  return "?";
}

RegimeType parse_regime(std::string_view name) {
  for (RegimeType r : {RegimeType::Single, RegimeType::Cross, RegimeType::ZeroShot, RegimeType::FewShot}) {
    if (to_string(r) == name) return r;
  }
  throw Error("unknown regime '" + std::string(name) + "'");
}

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw Error(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw Error("unknown field '" + key + "' in " + where);
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw Error("field '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw Error("invalid config: " + message);
}

}  // namespace

Json model_config_to_json(const ModelConfig& c) {
  return {{"d_model", c.d_model},           {"heads", c.heads},
          {"ffn", c.ffn},                   {"dropout", c.dropout},
          {"positional", c.positional},     {"span_hidden", c.span_hidden},
          {"remote_hidden", c.remote_hidden}, {"word_dropout", c.word_dropout},
          {"predict_punctuation", c.predict_punctuation}, {"external_dim", c.external_dim}};
}

ModelConfig model_config_from_json(const Json& j) {
  const std::string where = "model";
  reject_unknown(j, {"d_model", "heads", "ffn", "dropout", "positional", "span_hidden", "remote_hidden", "word_dropout",
                     "predict_punctuation", "external_dim"},
                 where);
  ModelConfig c;
  read(j, "d_model", c.d_model, where);
  read(j, "heads", c.heads, where);
  read(j, "ffn", c.ffn, where);
  read(j, "dropout", c.dropout, where);
  read(j, "positional", c.positional, where);
  read(j, "span_hidden", c.span_hidden, where);
  read(j, "remote_hidden", c.remote_hidden, where);
  read(j, "word_dropout", c.word_dropout, where);
  read(j, "predict_punctuation", c.predict_punctuation, where);
  read(j, "external_dim", c.external_dim, where);
  require(c.d_model > 0 && c.d_model % 2 == 0, "d_model must be a positive even number");
  require(c.heads > 0 && c.d_model % c.heads == 0, "heads must divide d_model");
  require(c.ffn > 0 && c.span_hidden > 0 && c.remote_hidden > 0, "layer widths must be positive");
  require(c.dropout >= 0.0 && c.dropout < 1.0, "dropout must lie in [0, 1)");
  require(c.word_dropout >= 0.0, "word_dropout must be non-negative");
  require(c.external_dim >= 0, "external_dim must be non-negative");
  return c;
}

TrainConfig config_from_json(const Json& j, const fs::path& base_dir) {
  const std::string where = "config";
  reject_unknown(j, {"corpora", "regime", "optimizer", "batch_size", "max_epochs", "patience", "clip_norm", "seed",
                     "model", "remote_threshold", "external_vectors", "stop_at_train_f1", "lenient"},
                 where);
  TrainConfig c;
  require(j.contains("corpora") && j.at("corpora").is_array(), "'corpora' must be a list");
  for (const auto& e : j.at("corpora")) {
    reject_unknown(e, {"language", "path", "role"}, "corpora entry");
    CorpusSpec spec;
    read(e, "language", spec.language, "corpora entry");
    read(e, "path", spec.path, "corpora entry");
    read(e, "role", spec.role, "corpora entry");
    require(!spec.path.empty(), "corpus without a path");
    require(spec.role == "train" || spec.role == "validation", "corpus role must be train or validation");
    if (!base_dir.empty() && fs::path(spec.path).is_relative()) spec.path = (base_dir / spec.path).lexically_normal().string();
    c.corpora.push_back(std::move(spec));
  }
  if (j.contains("regime")) {
    const Json& r = j.at("regime");
    if (r.is_string()) {
      c.regime.type = parse_regime(r.get<std::string>());
    } else {
      reject_unknown(r, {"type", "target"}, "regime");
      std::string type = "single";
      read(r, "type", type, "regime");
      c.regime.type = parse_regime(type);
      read(r, "target", c.regime.target, "regime");
    }
  }
  if (j.contains("optimizer")) {
    const Json& o = j.at("optimizer");
    reject_unknown(o, {"type", "learning_rate", "beta1", "beta2", "epsilon"}, "optimizer");
    if (o.contains("type")) require(o.at("type") == "adam", "only the adam optimizer is supported");
    read(o, "learning_rate", c.optimizer.learning_rate, "optimizer");
    read(o, "beta1", c.optimizer.beta1, "optimizer");
    read(o, "beta2", c.optimizer.beta2, "optimizer");
    read(o, "epsilon", c.optimizer.epsilon, "optimizer");
  }
  read(j, "batch_size", c.batch_size, where);
  read(j, "max_epochs", c.max_epochs, where);
  read(j, "patience", c.patience, where);
  read(j, "clip_norm", c.clip_norm, where);
  read(j, "seed", c.seed, where);
  read(j, "remote_threshold", c.remote_threshold, where);
  read(j, "external_vectors", c.external_vectors, where);
  read(j, "lenient", c.lenient, where);
  if (j.contains("stop_at_train_f1") && !j.at("stop_at_train_f1").is_null()) {
    double v = 0.0;
    read(j, "stop_at_train_f1", v, where);
    c.stop_at_train_f1 = v;
  }
  if (!c.external_vectors.empty() && !base_dir.empty() && fs::path(c.external_vectors).is_relative()) {
    c.external_vectors = (base_dir / c.external_vectors).lexically_normal().string();
  }
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));

  require(c.batch_size >= 1, "batch_size must be at least 1");
  require(c.max_epochs >= 1, "max_epochs must be at least 1");
  require(c.patience >= 1, "patience must be at least 1");
  require(c.clip_norm > 0.0, "clip_norm must be positive");
  require(c.optimizer.learning_rate > 0.0, "learning_rate must be positive");
  require(c.optimizer.beta1 >= 0.0 && c.optimizer.beta1 < 1.0 && c.optimizer.beta2 >= 0.0 && c.optimizer.beta2 < 1.0,
          "betas must lie in [0, 1)");
  require(c.remote_threshold >= 0.0, "remote_threshold must be non-negative");
  require(std::any_of(c.corpora.begin(), c.corpora.end(), [](const CorpusSpec& s) { return s.role == "validation"; }),
          "at least one validation corpus is required");
  if (c.regime.type == RegimeType::ZeroShot || c.regime.type == RegimeType::FewShot) {
    require(!c.regime.target.empty(), std::string(to_string(c.regime.type)) + " needs a target language");
  }
  return c;
}

Json config_to_json(const TrainConfig& c) {
  Json corpora = Json::array();
  for (const auto& s : c.corpora) corpora.push_back({{"language", s.language}, {"path", s.path}, {"role", s.role}});
  Json model = model_config_to_json(c.model);
  model.erase("external_dim");
  Json j = {{"corpora", corpora},
            {"regime", {{"type", to_string(c.regime.type)}, {"target", c.regime.target}}},
            {"optimizer",
             {{"learning_rate", c.optimizer.learning_rate},
              {"beta1", c.optimizer.beta1},
              {"beta2", c.optimizer.beta2},
              {"epsilon", c.optimizer.epsilon}}},
            {"batch_size", c.batch_size},
            {"max_epochs", c.max_epochs},
            {"patience", c.patience},
            {"clip_norm", c.clip_norm},
            {"seed", c.seed},
            {"model", model},
            {"remote_threshold", c.remote_threshold},
            {"external_vectors", c.external_vectors},
            {"lenient", c.lenient}};
  j["stop_at_train_f1"] = c.stop_at_train_f1 ? Json(*c.stop_at_train_f1) : Json(nullptr);
  return j;
}

TrainConfig load_config(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw Error("malformed JSON in " + path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

std::string config_hash(const TrainConfig& c) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : config_to_json(c).dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

RegimeData select_regime_data(const TrainConfig& config) {
  std::set<std::string> train_languages;
  for (const auto& s : config.corpora) {
    if (s.role == "train") train_languages.insert(s.language);
  }
  std::string single_language = config.regime.target;
  if (config.regime.type == RegimeType::Single && single_language.empty()) {
    if (train_languages.size() > 1) throw Error("invalid config: single regime over several languages needs a target");
    if (!train_languages.empty()) single_language = *train_languages.begin();
  }
  auto keep = [&](const CorpusSpec& s) {
    switch (config.regime.type) {
      case RegimeType::Single: return s.language == single_language;
      case RegimeType::Cross: return true;
      case RegimeType::ZeroShot: return s.role == "validation" || s.language != config.regime.target;
      case RegimeType::FewShot: return true;
    }
    return true;
  };
  LoadOptions options;
  options.lenient = config.lenient;
  RegimeData data;
  for (const auto& s : config.corpora) {
    if (!keep(s)) continue;
    auto& into = s.role == "train" ? data.train : data.validation;
    for (auto& p : load_corpus(s.path, options).passages) {
      std::string language = s.language.empty() ? p.language : s.language;
      into.push_back({std::move(p), std::move(language)});
    }
  }
  if (data.train.empty()) {
    std::string msg = "invalid config: the training set is empty";
    if (config.regime.type == RegimeType::ZeroShot) msg += " after removing " + config.regime.target + " passages";
    throw Error(msg);
  }
  if (data.validation.empty()) throw Error("invalid config: the validation set is empty");
  return data;
}

Adam::Adam(std::vector<Parameter*> params, const AdamConfig& config) : params_(std::move(params)), config_(config) {
  for (Parameter* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    m_[k] = config_.beta1 * m_[k] + (1.0 - config_.beta1) * p.grad;
    v_[k] = config_.beta2 * v_[k] + (1.0 - config_.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= config_.learning_rate * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + config_.epsilon);
  }
}

double clip_gradients(const std::vector<Parameter*>& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (Parameter* p : params) p->grad *= scale;
  }
  return norm;
}

namespace {

const Matrix* external_for(const ExternalVectors* external, const Passage& p) {
  return external ? &external->rows(p.id, p.size()) : nullptr;
}

std::vector<PairCounts> score_all(const ParserModel& model, const std::vector<const Passage*>& passages,
                                  const ExternalVectors* external, double threshold, bool remotes) {
  std::vector<PairCounts> pairs;
  for (const Passage* p : passages) {
    const auto out = model.parse(*p, external_for(external, *p), threshold, remotes);
    pairs.push_back(score_pair(out.graph, *p->graph));
  }
  return pairs;
}

}  // namespace

EvalReport evaluate_model(const ParserModel& model, const std::vector<const Passage*>& passages,
                          const ExternalVectors* external, double threshold, bool remotes) {
  return aggregate(score_all(model, passages, external, threshold, remotes));
}

TrainResult train(const TrainConfig& config) {
  const RegimeData data = select_regime_data(config);
  std::optional<ExternalVectors> external;
  if (!config.external_vectors.empty()) external = load_external_vectors(config.external_vectors);
  return train(config, data, external ? &*external : nullptr);
}

TrainResult train(const TrainConfig& config, const RegimeData& data, const ExternalVectors* external) {
  std::vector<const Passage*> train_ptrs, valid_ptrs;
  std::vector<TreeConversion> gold;
  for (const auto& cp : data.train) {
    train_ptrs.push_back(&cp.passage);
    gold.push_back(graph_to_tree(*cp.passage.graph));
  }
  for (const auto& cp : data.validation) valid_ptrs.push_back(&cp.passage);
  std::vector<const ConstituencyTree*> trees;
  for (const auto& g : gold) trees.push_back(&g.tree);

  ModelConfig model_config = config.model;
  model_config.external_dim = external ? external->dim() : 0;
  std::mt19937_64 rng(config.seed);
  TrainResult result{ParserModel(model_config, Vocabularies::build(train_ptrs), collect_labels(trees), rng), {}};
  ParserModel& model = result.model;
  const auto params = model.parameters();
  Adam adam(params, config.optimizer);

  Json& log = result.log;
  log["config_hash"] = config_hash(config);
  log["regime"] = {{"type", to_string(config.regime.type)}, {"target", config.regime.target}};
  log["seed"] = config.seed;
  log["train_passages"] = Json::array();
  log["train_languages"] = Json::object();
  for (const auto& cp : data.train) {
    log["train_passages"].push_back({{"id", cp.passage.id}, {"language", cp.language}});
    log["train_languages"][cp.language] = log["train_languages"].value(cp.language, 0) + 1;
  }
  log["validation_languages"] = Json::object();
  for (const auto& cp : data.validation) {
    log["validation_languages"][cp.language] = log["validation_languages"].value(cp.language, 0) + 1;
  }
  log["labels"] = model.labels().size();
  log["epochs"] = Json::array();

  std::vector<Matrix> best_values;
  double best_f1 = -1.0;
  int best_epoch = 0;
  int since_best = 0;
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  const ForwardMode mode{true, model_config.dropout, &rng};

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LossValue sum;
    std::map<std::string, int> seen;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      model.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const auto& cp = data.train[order[k]];
        const LossValue v = model.accumulate(cp.passage, gold[order[k]], external_for(external, cp.passage), mode);
        sum.total += v.total;
        sum.non_terminal += v.non_terminal;
        sum.remote += v.remote;
        ++seen[cp.language];
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (Parameter* p : params) p->grad *= scale;
      clip_gradients(params, config.clip_norm);
      adam.step();
    }

    const auto pairs = score_all(model, valid_ptrs, external, config.remote_threshold, true);
    const EvalReport report = aggregate(pairs);
    std::map<std::string, std::vector<PairCounts>> by_language;
    for (std::size_t k = 0; k < pairs.size(); ++k) by_language[data.validation[k].language].push_back(pairs[k]);
    Json per_language = Json::object();
    for (const auto& [language, ps] : by_language) per_language[language] = labeled_average_f1(aggregate(ps));

    const double n = static_cast<double>(order.size());
    Json entry = {{"epoch", epoch},
                  {"loss", sum.total / n},
                  {"non_terminal", sum.non_terminal / n},
                  {"remote", sum.remote / n},
                  {"passages_seen", seen},
                  {"validation_f1", labeled_average_f1(report)},
                  {"validation_primary_f1", report.at(Population::Primary, Mode::Labeled).f1},
                  {"validation_remote_f1", report.at(Population::Remote, Mode::Labeled).f1},
                  {"validation_f1_by_language", per_language}};

    const double f1 = labeled_average_f1(report);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_epoch = epoch;
      since_best = 0;
      best_values.clear();
      for (const Parameter* p : params) best_values.push_back(p->value);
    } else {
      ++since_best;
    }

    bool reached = false;
    if (config.stop_at_train_f1) {
      const EvalReport train_report = evaluate_model(model, train_ptrs, external, config.remote_threshold);
      const double train_f1 = train_report.at(Population::Primary, Mode::Labeled).f1;
      entry["train_primary_f1"] = train_f1;
      entry["train_remote_f1"] = train_report.at(Population::Remote, Mode::Labeled).f1;
      reached = train_f1 >= *config.stop_at_train_f1 &&
                train_report.at(Population::Remote, Mode::Labeled).f1 >= *config.stop_at_train_f1;
    }
    log["epochs"].push_back(entry);
    if (reached) {
      log["stopped"] = "train_f1";
      break;
    }
    if (since_best >= config.patience) {
      log["stopped"] = "patience";
      break;
    }
  }
  if (!log.contains("stopped")) log["stopped"] = "max_epochs";

  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = best_values[k];
  log["best_epoch"] = best_epoch;
  log["best_validation_f1"] = best_f1;
  return result;
}

namespace {

constexpr char kMagic[8] = {'U', 'C', 'C', 'A', 'C', 'K', 'P', 'T'};

Json vocab_to_json(const Vocab& v) {
  return {{"tokens", std::vector<std::string>(v.tokens().begin() + 1, v.tokens().end())},
          {"counts", std::vector<long>(v.counts().begin() + 1, v.counts().end())}};
}

Vocab vocab_from_json(const Json& j) {
  Vocab v;
  const auto tokens = j.at("tokens").get<std::vector<std::string>>();
  const auto counts = j.at("counts").get<std::vector<long>>();
  if (tokens.size() != counts.size()) throw Error("corrupt checkpoint: vocabulary sizes differ");
  for (std::size_t k = 0; k < tokens.size(); ++k) v.add(tokens[k], counts[k]);
  return v;
}

template <typename T>
void put(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& at) {
  if (at + sizeof(T) > in.size()) throw Error("corrupt checkpoint: truncated");
  T value;
  std::memcpy(&value, in.data() + at, sizeof(T));
  at += sizeof(T);
  return value;
}

}  // namespace

void save_checkpoint(const ParserModel& model, double remote_threshold, const std::string& hash, const fs::path& path) {
  Json params = Json::array();
  for (const Parameter* p : model.parameters()) params.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  const auto& v = model.vocabs();
  const Json header = {{"model", model_config_to_json(model.config())},
                       {"labels", model.labels().labels()},
                       {"vocabularies",
                        {{"word", vocab_to_json(v.word)},
                         {"pos", vocab_to_json(v.pos)},
                         {"dep", vocab_to_json(v.dep)},
                         {"entity", vocab_to_json(v.entity)},
                         {"iob", vocab_to_json(v.iob)}}},
                       {"parameters", params},
                       {"remote_threshold", remote_threshold},
                       {"config_hash", hash}};
  const std::string text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  for (const Parameter* p : model.parameters()) {
    out.append(reinterpret_cast<const char*>(p->value.data()), static_cast<std::size_t>(p->value.size()) * sizeof(double));
  }
  write_file(path, out);
}

Checkpoint load_checkpoint(const fs::path& path, const LabelInventory* expected_labels) {
  const std::string in = read_file(path);
  if (in.size() < sizeof(kMagic) || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(path.string() + " is not a checkpoint");
  }
  std::size_t at = sizeof(kMagic);
  const auto version = take<std::uint32_t>(in, at);
  if (version != kCheckpointVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  const auto length = take<std::uint64_t>(in, at);
  if (at + length > in.size()) throw Error("corrupt checkpoint: truncated header");
  Json header;
  try {
    header = Json::parse(in.substr(at, length));
  } catch (const Json::exception& e) {
    throw Error(std::string("corrupt checkpoint header: ") + e.what());
  }
  at += length;

  const LabelInventory labels(header.at("labels").get<std::vector<std::string>>());
  if (expected_labels && !(*expected_labels == labels)) {
    throw Error("label inventory mismatch: the checkpoint has " + std::to_string(labels.size()) +
                " labels, expected " + std::to_string(expected_labels->size()));
  }
  const Json& vj = header.at("vocabularies");
  Vocabularies vocabs{vocab_from_json(vj.at("word")), vocab_from_json(vj.at("pos")), vocab_from_json(vj.at("dep")),
                      vocab_from_json(vj.at("entity")), vocab_from_json(vj.at("iob"))};
  std::mt19937_64 rng(0);
  Checkpoint ck{ParserModel(model_config_from_json(header.at("model")), std::move(vocabs), labels, rng),
                header.at("remote_threshold").get<double>(), header.at("config_hash").get<std::string>()};
  const auto params = ck.model.parameters();
  const Json& shapes = header.at("parameters");
  if (shapes.size() != params.size()) throw Error("corrupt checkpoint: parameter count differs");
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (shapes[k].at("name") != p.name || shapes[k].at("rows") != p.value.rows() || shapes[k].at("cols") != p.value.cols()) {
      throw Error("checkpoint parameter " + shapes[k].at("name").get<std::string>() +
                  " does not match the model (label inventory or configuration mismatch)");
    }
    const std::size_t bytes = static_cast<std::size_t>(p.value.size()) * sizeof(double);
    if (at + bytes > in.size()) throw Error("corrupt checkpoint: truncated parameters");
    std::memcpy(p.value.data(), in.data() + at, bytes);
    at += bytes;
  }
  if (at != in.size()) throw Error("corrupt checkpoint: trailing bytes");
  return ck;
}

}  // namespace ucca
