#include "ucca/encoder.hpp"

#include <cmath>

namespace ucca {

Vocab::Vocab() {
  tokens_.emplace_back(kUnknownToken);
  counts_.push_back(0);
}

int Vocab::add(const std::string& token, long count) {
  auto it = index_.find(token);
  if (it != index_.end()) {
    counts_[static_cast<std::size_t>(it->second)] += count;
    return it->second;
  }
  const int id = size();
  tokens_.push_back(token);
  counts_.push_back(count);
  index_.emplace(token, id);
  return id;
}

int Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnknown : it->second;
}

Vocabularies Vocabularies::build(const std::vector<const Passage*>& passages) {
  Vocabularies v;
  for (const Passage* p : passages) {
    for (const auto& t : p->terminals) {
      v.word.add(t.surface);
      v.pos.add(t.pos_tag);
      v.dep.add(t.dep_label);
      v.entity.add(t.entity_type);
      v.iob.add(t.entity_iob);
    }
  }
  return v;
}

TokenIds lookup_tokens(const Passage& p, const Vocabularies& vocabs) {
  TokenIds ids;
  for (const auto& t : p.terminals) {
    ids.word.push_back(vocabs.word.find(t.surface));
    ids.pos.push_back(vocabs.pos.find(t.pos_tag));
    ids.dep.push_back(vocabs.dep.find(t.dep_label));
    ids.entity.push_back(vocabs.entity.find(t.entity_type));
    ids.iob.push_back(vocabs.iob.find(t.entity_iob));
  }
  return ids;
}

void ExternalVectors::set(const std::string& passage_id, Matrix rows) {
  if (rows.cols() != dim_) {
    throw Error("external vectors for '" + passage_id + "' have " + std::to_string(rows.cols()) +
                " columns, expected " + std::to_string(dim_));
  }
  rows_[passage_id] = std::move(rows);
}

const Matrix& ExternalVectors::rows(const std::string& passage_id, int n_tokens) const {
  auto it = rows_.find(passage_id);
  if (it == rows_.end()) throw Error("no external vectors for passage '" + passage_id + "'");
  if (it->second.rows() != n_tokens) {
    throw Error("passage '" + passage_id + "' has " + std::to_string(n_tokens) + " tokens but " +
                std::to_string(it->second.rows()) + " external vectors");
  }
  return it->second;
}

namespace {

Matrix random_table(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(cols)));
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = normal(rng);
  }
  return m;
}

void check_ids(const std::vector<int>& ids, const Parameter& table) {
  for (int id : ids) {
    if (id < 0 || id >= table.value.rows()) throw Error("id out of range for " + table.name);
  }
}

}  // namespace

EmbeddingTables::EmbeddingTables(const Vocabularies& vocabs, std::mt19937_64& rng)
    : word("embedding.word", ParamGroup::Embedding, random_table(vocabs.word.size(), kWordDim, rng)),
      pos("embedding.pos", ParamGroup::Embedding, random_table(vocabs.pos.size(), kPosDim, rng)),
      dep("embedding.dep", ParamGroup::Embedding, random_table(vocabs.dep.size(), kDepDim, rng)),
      entity("embedding.entity", ParamGroup::Embedding, random_table(vocabs.entity.size(), kEntityDim, rng)),
      iob("embedding.iob", ParamGroup::Embedding, random_table(vocabs.iob.size(), kIobDim, rng)) {}

Matrix EmbeddingTables::embed(const TokenIds& ids, const Matrix* external) const {
  const auto n = static_cast<Eigen::Index>(ids.word.size());
  for (const auto* v : {&ids.pos, &ids.dep, &ids.entity, &ids.iob}) {
    if (static_cast<Eigen::Index>(v->size()) != n) throw Error("feature columns differ in length");
  }
  check_ids(ids.word, word);
  check_ids(ids.pos, pos);
  check_ids(ids.dep, dep);
  check_ids(ids.entity, entity);
  check_ids(ids.iob, iob);
  if (external && external->rows() != n) {
    throw Error("external vector count " + std::to_string(external->rows()) + " does not match token count " +
                std::to_string(n));
  }
  const Eigen::Index k = external ? external->cols() : 0;
  Matrix x(n, kTokenDim + k);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto s = static_cast<std::size_t>(t);
    Eigen::Index c = 0;
    for (const auto& [table, id] : {std::pair{&word, ids.word[s]}, std::pair{&pos, ids.pos[s]},
                                    std::pair{&dep, ids.dep[s]}, std::pair{&entity, ids.entity[s]},
                                    std::pair{&iob, ids.iob[s]}}) {
      const auto width = table->value.cols();
      x.block(t, c, 1, width) = table->value.row(id);
      c += width;
    }
    if (external) x.block(t, kTokenDim, 1, k) = external->row(t);
  }
  return x;
}

void EmbeddingTables::backward(const TokenIds& ids, const Matrix& dx) {
  for (Eigen::Index t = 0; t < dx.rows(); ++t) {
    const auto s = static_cast<std::size_t>(t);
    Eigen::Index c = 0;
    for (const auto& [table, id] : {std::pair{&word, ids.word[s]}, std::pair{&pos, ids.pos[s]},
                                    std::pair{&dep, ids.dep[s]}, std::pair{&entity, ids.entity[s]},
                                    std::pair{&iob, ids.iob[s]}}) {
      const auto width = table->value.cols();
      table->grad.row(id) += dx.block(t, c, 1, width);
      c += width;
    }
  }
}

std::vector<Parameter*> EmbeddingTables::parameters() { return {&word, &pos, &dep, &entity, &iob}; }

Matrix embed_tokens(const Passage& p, const Vocabularies& vocabs, const EmbeddingTables& tables,
                    const Matrix* external) {
  return tables.embed(lookup_tokens(p, vocabs), external);
}

Matrix positional_encoding(int n, int dim) {
  Matrix pe(n, dim);
  for (int t = 0; t < n; ++t) {
    for (int c = 0; c < dim; ++c) {
      const double rate = std::pow(10000.0, -static_cast<double>(c - c % 2) / dim);
      pe(t, c) = c % 2 == 0 ? std::sin(t * rate) : std::cos(t * rate);
    }
  }
  return pe;
}

Encoder::Encoder(const EncoderConfig& config, std::mt19937_64& rng)
    : input("encoder.input", ParamGroup::Projection, config.input_dim, config.d_model, rng),
      final_norm("encoder.final_norm", config.d_model),
      config_(config) {
  if (config.d_model % 2 != 0) throw Error("model dimension must be even");
  for (int l = 0; l < kNumLayers; ++l) {
    layers.emplace_back("encoder.layer" + std::to_string(l), config.d_model, config.heads, config.ffn, rng);
  }
}

Matrix Encoder::forward(const Matrix& xs, const ForwardMode& mode, EncoderCache* cache) const {
  if (xs.rows() == 0) throw Error("cannot encode an empty sequence");
  if (xs.cols() != config_.input_dim) {
    throw Error("encoder expects " + std::to_string(config_.input_dim) + " input columns, got " +
                std::to_string(xs.cols()));
  }
  Matrix h = input.forward(xs);
  if (config_.positional) h += positional_encoding(static_cast<int>(xs.rows()), config_.d_model);
  ForwardMode layer_mode = mode;
  layer_mode.dropout = config_.dropout;
  if (cache) {
    cache->input = xs;
    cache->layers.assign(layers.size(), {});
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h = layers[l].forward(h, layer_mode, cache ? &cache->layers[l] : nullptr);
  }
  return final_norm.forward(h, cache ? &cache->final_norm : nullptr);
}

Matrix Encoder::backward(const Matrix& dys, const EncoderCache& cache) {
  Matrix dh = final_norm.backward(dys, cache.final_norm);
  for (std::size_t l = layers.size(); l-- > 0;) dh = layers[l].backward(dh, cache.layers[l]);
  return input.backward(cache.input, dh);
}

std::vector<Parameter*> Encoder::parameters() {
  std::vector<Parameter*> out = {&input.weight, &input.bias};
  for (auto& layer : layers) {
    for (Parameter* p : {&layer.norm1.gain, &layer.norm1.shift, &layer.attention.query.weight,
                         &layer.attention.query.bias, &layer.attention.key.weight, &layer.attention.key.bias,
                         &layer.attention.value.weight, &layer.attention.value.bias,
                         &layer.attention.output.weight, &layer.attention.output.bias, &layer.norm2.gain,
                         &layer.norm2.shift, &layer.feed_forward.inner.weight, &layer.feed_forward.inner.bias,
                         &layer.feed_forward.outer.weight, &layer.feed_forward.outer.bias}) {
      out.push_back(p);
    }
  }
  out.push_back(&final_norm.gain);
  out.push_back(&final_norm.shift);
  return out;
}

std::vector<std::vector<Matrix>> attention_trace(const EncoderCache& cache) {
  std::vector<std::vector<Matrix>> out;
  for (const auto& layer : cache.layers) out.push_back(layer.attention.probs);
  return out;
}

Fenceposts::Fenceposts(int d_model, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 0.1);
  Matrix s(1, d_model / 2), e(1, d_model / 2);
  for (Eigen::Index c = 0; c < s.cols(); ++c) s(0, c) = normal(rng);
  for (Eigen::Index c = 0; c < e.cols(); ++c) e(0, c) = normal(rng);
  start = Parameter("span.start", ParamGroup::SpanMlp, std::move(s));
  end = Parameter("span.end", ParamGroup::SpanMlp, std::move(e));
}

Matrix Fenceposts::forward(const Matrix& ys) const {
  const Eigen::Index n = ys.rows();
  const Eigen::Index half = start.value.cols();
  if (ys.cols() != 2 * half) throw Error("fencepost width mismatch");
  Matrix f(n + 1, 2 * half);
  f.block(0, 0, 1, half) = start.value;
  f.block(1, 0, n, half) = ys.leftCols(half);
  f.block(0, half, n, half) = ys.rightCols(half);
  f.block(n, half, 1, half) = end.value;
  return f;
}

Matrix Fenceposts::backward(const Matrix& df) {
  const Eigen::Index n = df.rows() - 1;
  const Eigen::Index half = start.value.cols();
  Matrix dys(n, 2 * half);
  start.grad += df.block(0, 0, 1, half);
  dys.leftCols(half) = df.block(1, 0, n, half);
  dys.rightCols(half) = df.block(0, half, n, half);
  end.grad += df.block(n, half, 1, half);
  return dys;
}

Vector span_representation(const Matrix& fenceposts, int i, int j) {
  if (i < 0 || j >= fenceposts.rows() || i >= j) throw Error("span outside the fencepost range");
  Vector v(2 * fenceposts.cols());
  v.head(fenceposts.cols()) = fenceposts.row(i).transpose();
  v.tail(fenceposts.cols()) = fenceposts.row(j).transpose();
  return v;
}

SpanScorer::SpanScorer(int d_model, int hidden, int num_labels, std::mt19937_64& rng) : output() {
  Linear first("span_mlp.first", ParamGroup::SpanMlp, 2 * d_model, hidden, rng);
  left = Parameter("span_mlp.left", ParamGroup::SpanMlp, first.weight.value.topRows(d_model));
  right = Parameter("span_mlp.right", ParamGroup::SpanMlp, first.weight.value.bottomRows(d_model));
  bias = Parameter("span_mlp.bias", ParamGroup::SpanMlp, Matrix::Zero(1, hidden));
  output = Linear("span_mlp.output", ParamGroup::SpanMlp, hidden, num_labels, rng);
}

SpanChart SpanScorer::forward(const Matrix& fenceposts, SpanScorerCache* cache) const {
  const int n = static_cast<int>(fenceposts.rows()) - 1;
  if (n < 1) throw Error("cannot score spans of an empty sequence");
  const Matrix a = fenceposts * left.value;
  const Matrix b = fenceposts * right.value;
  SpanChart chart(n, num_labels());
  Matrix pre(static_cast<Eigen::Index>(chart.num_spans()), bias.value.cols());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j <= n; ++j) {
      pre.row(static_cast<Eigen::Index>(chart.span_index(i, j))) = a.row(i) + b.row(j) + bias.value.row(0);
    }
  }
  Matrix hidden = pre.cwiseMax(0.0);
  Eigen::Map<Matrix>(chart.data().data(), pre.rows(), num_labels()) = output.forward(hidden);
  if (cache) {
    cache->fenceposts = fenceposts;
    cache->pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return chart;
}

Matrix SpanScorer::backward(const SpanChart& dlogits, const SpanScorerCache& cache) {
  const int n = dlogits.n();
  const Eigen::Map<const Matrix> dout(dlogits.data().data(), static_cast<Eigen::Index>(dlogits.num_spans()),
                                      dlogits.num_labels());
  Matrix dhidden = output.backward(cache.hidden, dout);
  dhidden = (cache.pre.array() > 0.0).select(dhidden, 0.0);
  bias.grad.row(0) += dhidden.colwise().sum();
  Matrix da = Matrix::Zero(n + 1, bias.value.cols());
  Matrix db = Matrix::Zero(n + 1, bias.value.cols());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j <= n; ++j) {
      const auto row = dhidden.row(static_cast<Eigen::Index>(dlogits.span_index(i, j)));
      da.row(i) += row;
      db.row(j) += row;
    }
  }
  left.grad.noalias() += cache.fenceposts.transpose() * da;
  right.grad.noalias() += cache.fenceposts.transpose() * db;
  return da * left.value.transpose() + db * right.value.transpose();
}

std::vector<Parameter*> SpanScorer::parameters() { return {&left, &right, &bias, &output.weight, &output.bias}; }

}  // namespace ucca
