// Token embeddings, the self-attention encoder and the span scorer.

#pragma once

#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "ucca/chart.hpp"
#include "ucca/graph.hpp"
#include "ucca/nn.hpp"

namespace ucca {

inline constexpr int kWordDim = 100;
inline constexpr int kPosDim = 50;
inline constexpr int kDepDim = 50;
inline constexpr int kEntityDim = 25;
inline constexpr int kIobDim = 25;
inline constexpr int kTokenDim = kWordDim + kPosDim + kDepDim + kEntityDim + kIobDim;

/// String-to-id map with frequencies; id 0 is the unknown entry.
class Vocab {
 public:
  static constexpr int kUnknown = 0;
  static constexpr std::string_view kUnknownToken = "<unk>";

  Vocab();
  int add(const std::string& token, long count = 1);
  /// kUnknown for unseen tokens.
  int find(std::string_view token) const;
  long frequency(int id) const { return counts_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<long>& counts() const { return counts_; }

  bool operator==(const Vocab& o) const { return tokens_ == o.tokens_ && counts_ == o.counts_; }

 private:
  std::vector<std::string> tokens_;
  std::vector<long> counts_;
  std::unordered_map<std::string, int> index_;
};

struct Vocabularies {
  Vocab word, pos, dep, entity, iob;

  /// Counts every feature value of the given passages.
  static Vocabularies build(const std::vector<const Passage*>& passages);
  bool operator==(const Vocabularies&) const = default;
};

struct TokenIds {
  std::vector<int> word, pos, dep, entity, iob;
};

TokenIds lookup_tokens(const Passage& p, const Vocabularies& vocabs);

/// Precomputed per-token vectors read from a file, keyed by passage id.
class ExternalVectors {
 public:
  ExternalVectors() = default;
  explicit ExternalVectors(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  void set(const std::string& passage_id, Matrix rows);
  /// Rows for a passage; throws ucca::Error when absent or sized wrongly.
  const Matrix& rows(const std::string& passage_id, int n_tokens) const;
  bool contains(const std::string& passage_id) const { return rows_.count(passage_id) > 0; }
  std::size_t passages() const { return rows_.size(); }
  const std::map<std::string, Matrix>& all() const { return rows_; }

 private:
  int dim_ = 0;
  std::map<std::string, Matrix> rows_;
};

class EmbeddingTables {
 public:
  EmbeddingTables() = default;
  EmbeddingTables(const Vocabularies& vocabs, std::mt19937_64& rng);

  /// n x (250 + k) concatenation; `external` must have n rows when given.
  Matrix embed(const TokenIds& ids, const Matrix* external = nullptr) const;
  /// Scatters the first 250 columns of dx into the table rows used.
  void backward(const TokenIds& ids, const Matrix& dx);

  std::vector<Parameter*> parameters();

  Parameter word, pos, dep, entity, iob;
};

/// x_t for every token of `p`, with unknown values on row 0.
Matrix embed_tokens(const Passage& p, const Vocabularies& vocabs, const EmbeddingTables& tables,
                    const Matrix* external = nullptr);

/// Sinusoidal position table, n x dim.
Matrix positional_encoding(int n, int dim);

struct EncoderConfig {
  int input_dim = kTokenDim;
  int d_model = 256;
  int heads = 8;
  int ffn = 1024;
  double dropout = 0.1;
  bool positional = true;
};

struct EncoderCache {
  Matrix input;
  std::vector<EncoderLayerCache> layers;
  LayerNormCache final_norm;
};

class Encoder {
 public:
  static constexpr int kNumLayers = 8;

  Encoder() = default;
  Encoder(const EncoderConfig& config, std::mt19937_64& rng);

  /// ys with one row per input row. Throws ucca::Error on an empty input or
  /// a width mismatch.
  Matrix forward(const Matrix& xs, const ForwardMode& mode, EncoderCache* cache) const;
  Matrix backward(const Matrix& dys, const EncoderCache& cache);

  std::vector<Parameter*> parameters();
  const EncoderConfig& config() const { return config_; }

  Linear input;
  std::vector<EncoderLayer> layers;
  LayerNorm final_norm;

 private:
  EncoderConfig config_;
};

/// Per layer, per head attention probabilities of a cached forward pass.
std::vector<std::vector<Matrix>> attention_trace(const EncoderCache& cache);

/// Fencepost vectors f_0..f_n: f_t joins the forward half of token t and the
/// backward half of token t+1 (1-based), with learned vectors past the ends.
class Fenceposts {
 public:
  Fenceposts() = default;
  Fenceposts(int d_model, std::mt19937_64& rng);

  Matrix forward(const Matrix& ys) const;
  Matrix backward(const Matrix& df);

  std::vector<Parameter*> parameters() { return {&start, &end}; }

  Parameter start;  // stands in for the forward half before token 1
  Parameter end;    // stands in for the backward half after token n
};

/// Representation of span (i, j): [f_i ; f_j].
Vector span_representation(const Matrix& fenceposts, int i, int j);

struct SpanScorerCache {
  Matrix fenceposts;
  Matrix pre;     // num_spans x hidden, before ReLU
  Matrix hidden;  // after ReLU
};

/// Two-layer MLP over [f_i ; f_j]; the first layer is split into a left and a
/// right block so that each fencepost is projected once.
class SpanScorer {
 public:
  SpanScorer() = default;
  SpanScorer(int d_model, int hidden, int num_labels, std::mt19937_64& rng);

  SpanChart forward(const Matrix& fenceposts, SpanScorerCache* cache) const;
  /// `dlogits` holds d loss / d s(i, j, l); returns d loss / d fenceposts.
  Matrix backward(const SpanChart& dlogits, const SpanScorerCache& cache);

  std::vector<Parameter*> parameters();
  int num_labels() const { return output.out(); }

  Parameter left, right, bias;
  Linear output;
};

}  // namespace ucca
