#include "ucca/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace ucca {

EncoderConfig ModelConfig::encoder() const {
  EncoderConfig e;
  e.input_dim = kTokenDim + external_dim;
  e.d_model = d_model;
  e.heads = heads;
  e.ffn = ffn;
  e.dropout = dropout;
  e.positional = positional;
  return e;
}

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// Adds -log softmax(row)[target] to the loss and its gradient to `grad`.
double cross_entropy(const double* row, int width, int target, double* grad) {
  const double top = *std::max_element(row, row + width);
  double z = 0.0;
  for (int l = 0; l < width; ++l) z += std::exp(row[l] - top);
  const double log_z = top + std::log(z);
  if (grad) {
    for (int l = 0; l < width; ++l) grad[l] += std::exp(row[l] - log_z);
    grad[target] -= 1.0;
  }
  return log_z - row[target];
}

bool has_category(const std::string& label, Category c) {
  if (label == kNullLabel) return false;
  for (const auto& step : parse_label(label).steps) {
    if (std::find(step.categories.begin(), step.categories.end(), c) != step.categories.end()) return true;
  }
  return false;
}

}  // namespace

LossValue compute_loss(const ConstituencyTree& gold_tree, const std::vector<RemoteRecord>& gold_remotes,
                       const SpanChart& logits, const LabelInventory& labels, const RemoteOutputs* remote,
                       LossGradients* grads) {
  const int n = logits.n();
  if (n != gold_tree.n) {
    throw Error("chart covers " + std::to_string(n) + " tokens but the gold tree " + std::to_string(gold_tree.n));
  }
  if (logits.num_labels() != labels.size()) throw Error("chart width does not match the label inventory");
  std::map<std::pair<int, int>, int> gold;
  for (const auto& s : gold_tree.spans) {
    if (s.label == kNullLabel) continue;
    const int id = labels.find(s.label);
    if (id < 0) throw Error("gold label '" + s.label + "' is not in the label inventory");
    gold[{s.i, s.j}] = id;
  }
  LossValue value;
  if (grads) grads->chart = SpanChart(n, logits.num_labels());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j <= n; ++j) {
      auto it = gold.find({i, j});
      const int target = it == gold.end() ? 0 : it->second;
      value.non_terminal += cross_entropy(logits.cell(i, j).data(), logits.num_labels(), target,
                                          grads ? grads->chart.cell(i, j).data() : nullptr);
    }
  }
  if (remote) {
    const auto targets = remote_targets(remote->candidates, gold_remotes);
    const auto sources = remote->candidates.sources.size();
    if (grads) {
      grads->remote.gate_logits = Vector::Zero(static_cast<Eigen::Index>(sources));
      grads->remote.attach_logits.clear();
      for (const auto& m : remote->attach_logits) grads->remote.attach_logits.push_back(Matrix::Zero(m.rows(), m.cols()));
    }
    for (std::size_t s = 0; s < sources; ++s) {
      const double z = remote->gate_logits(static_cast<Eigen::Index>(s));
      const double y = targets.attach[s].empty() ? 0.0 : 1.0;
      value.remote += softplus(z) - y * z;
      if (grads) grads->remote.gate_logits(static_cast<Eigen::Index>(s)) = sigmoid(z) - y;
      const Matrix& m = remote->attach_logits[s];
      for (const auto& [p, c] : targets.attach[s]) {
        value.remote += cross_entropy(m.data(), static_cast<int>(m.size()), p * static_cast<int>(m.cols()) + c,
                                      grads ? grads->remote.attach_logits[s].data() : nullptr);
      }
    }
  }
  value.total = value.remote + value.non_terminal;
  return value;
}

LabelInventory collect_labels(const std::vector<const ConstituencyTree*>& trees) {
  LabelInventory labels;
  for (const auto* t : trees) {
    for (const auto& s : t->spans) {
      if (s.label != kNullLabel) labels.add(s.label);
    }
  }
  return labels;
}

ParserModel::ParserModel(const ModelConfig& config, Vocabularies vocabs, LabelInventory labels, std::mt19937_64& rng)
    : config_(config), vocabs_(std::move(vocabs)), labels_(std::move(labels)) {
  embeddings = EmbeddingTables(vocabs_, rng);
  encoder = Encoder(config.encoder(), rng);
  fenceposts = Fenceposts(config.d_model, rng);
  scorer = SpanScorer(config.d_model, config.span_hidden, labels_.size(), rng);
  remote = RemoteHeads(config.d_model, config.remote_hidden, rng);
  for (int l = 0; l < labels_.size(); ++l) {
    const auto& name = labels_.name(l);
    root_label_.push_back(name != kNullLabel && parse_label(name).root);
    punct_label_.push_back(has_category(name, Category::U));
  }
}

ForwardState ParserModel::forward(const Passage& p, const Matrix* external, const ForwardMode& mode) const {
  if (p.size() == 0) throw Error("passage '" + p.id + "' has no tokens");
  ForwardState st;
  st.ids = lookup_tokens(p, vocabs_);
  if (mode.training && mode.rng && config_.word_dropout > 0.0) {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (int& id : st.ids.word) {
      const double drop = config_.word_dropout / (1.0 + static_cast<double>(vocabs_.word.frequency(id)));
      if (uniform(*mode.rng) < drop) id = Vocab::kUnknown;
    }
  }
  const Matrix xs = embeddings.embed(st.ids, external);
  st.ys = encoder.forward(xs, mode, mode.training ? &st.encoder : nullptr);
  st.fenceposts = fenceposts.forward(st.ys);
  st.logits = scorer.forward(st.fenceposts, mode.training ? &st.span : nullptr);
  return st;
}

LossValue ParserModel::accumulate(const Passage& p, const TreeConversion& gold, const Matrix* external,
                                  const ForwardMode& mode) {
  ForwardMode train = mode;
  train.training = true;
  ForwardState st = forward(p, external, train);
  const RemoteOutputs rem = remote.forward(gold.tree, st.fenceposts);
  LossGradients grads;
  const LossValue value = compute_loss(gold.tree, gold.remotes, st.logits, labels_, &rem, &grads);
  Matrix df = scorer.backward(grads.chart, st.span);
  df += remote.backward(grads.remote, rem, df.rows());
  const Matrix dys = fenceposts.backward(df);
  const Matrix dxs = encoder.backward(dys, st.encoder);
  embeddings.backward(st.ids, dxs);
  return value;
}

LossValue ParserModel::loss(const Passage& p, const TreeConversion& gold, const Matrix* external) const {
  const ForwardState st = forward(p, external, {});
  const RemoteOutputs rem = remote.forward(gold.tree, st.fenceposts);
  return compute_loss(gold.tree, gold.remotes, st.logits, labels_, &rem);
}

SpanChart ParserModel::decoding_chart(const SpanChart& logits) const {
  constexpr double kMasked = -1e30;
  SpanChart chart = log_normalize(logits);
  const int n = chart.n();
  const bool any_root = std::find(root_label_.begin(), root_label_.end(), true) != root_label_.end();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j <= n; ++j) {
      const bool is_root = i == 0 && j == n;
      auto cell = chart.cell(i, j);
      const double null_score = cell[0];
      for (double& v : cell) v -= null_score;
      for (int l = 1; l < labels_.size(); ++l) {
        const bool root_label = root_label_[static_cast<std::size_t>(l)];
        if ((!is_root && root_label) || (is_root && any_root && !root_label) ||
            (!config_.predict_punctuation && punct_label_[static_cast<std::size_t>(l)])) {
          cell[static_cast<std::size_t>(l)] = kMasked;
        }
      }
    }
  }
  return chart;
}

ParseOutput ParserModel::parse(const Passage& p, const Matrix* external, double threshold, bool remotes) const {
  const ForwardState st = forward(p, external, {});
  ParseOutput out;
  out.tree = decode_tree(decoding_chart(st.logits), labels_);
  if (remotes) out.remotes = recover_remotes(out.tree, st.fenceposts, remote, threshold);
  ConversionOptions options;
  options.lenient = true;
  out.graph = tree_to_graph(out.tree, out.remotes, {}, options, &out.diagnostics);
  return out;
}

std::vector<Parameter*> ParserModel::parameters() {
  std::vector<Parameter*> out = embeddings.parameters();
  for (Parameter* p : encoder.parameters()) out.push_back(p);
  for (Parameter* p : fenceposts.parameters()) out.push_back(p);
  for (Parameter* p : scorer.parameters()) out.push_back(p);
  for (Parameter* p : remote.parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> ParserModel::parameters() const {
  const auto all = const_cast<ParserModel*>(this)->parameters();
  return {all.begin(), all.end()};
}

void ParserModel::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

}  // namespace ucca
