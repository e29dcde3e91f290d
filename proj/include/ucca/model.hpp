// The full parser: embeddings, encoder, span scorer and remote heads.

#pragma once

#include <random>
#include <vector>

#include "ucca/conversion.hpp"
#include "ucca/decoder.hpp"
#include "ucca/encoder.hpp"
#include "ucca/remote.hpp"

namespace ucca {

struct ModelConfig {
  int d_model = 256;
  int heads = 8;
  int ffn = 1024;
  double dropout = 0.1;
  bool positional = true;
  int span_hidden = 250;
  int remote_hidden = 128;
  /// Word dropout probability is word_dropout / (1 + frequency).
  double word_dropout = 0.25;
  /// When false, labels with a U step are never decoded.
  bool predict_punctuation = true;
  int external_dim = 0;

  EncoderConfig encoder() const;
  bool operator==(const ModelConfig&) const = default;
};

struct LossValue {
  double total = 0.0;
  double non_terminal = 0.0;
  double remote = 0.0;
};

struct LossGradients {
  SpanChart chart;
  RemoteGradients remote;
};

/// Label cross-entropy over every chart span (∅ where the gold tree has no
/// span) plus, when `remote` is given, gate binary cross-entropy over all
/// sources and attach cross-entropy per gold remote. Throws ucca::Error on a
/// length mismatch or a gold label missing from `labels`.
LossValue compute_loss(const ConstituencyTree& gold_tree, const std::vector<RemoteRecord>& gold_remotes,
                       const SpanChart& logits, const LabelInventory& labels, const RemoteOutputs* remote,
                       LossGradients* grads = nullptr);

/// Every label of the given gold trees, in first-seen preorder.
LabelInventory collect_labels(const std::vector<const ConstituencyTree*>& trees);

struct ParseOutput {
  ConstituencyTree tree;
  std::vector<RemoteRecord> remotes;
  UccaGraph graph;
  ConversionDiagnostics diagnostics;
};

struct ForwardState {
  TokenIds ids;
  EncoderCache encoder;
  Matrix ys;
  Matrix fenceposts;
  SpanScorerCache span;
  SpanChart logits;
};

class ParserModel {
 public:
  ParserModel() = default;
  ParserModel(const ModelConfig& config, Vocabularies vocabs, LabelInventory labels, std::mt19937_64& rng);

  /// Training mode applies dropout and word dropout from `mode.rng`.
  ForwardState forward(const Passage& p, const Matrix* external, const ForwardMode& mode) const;

  /// Forward, loss and accumulated gradients for one gold passage.
  LossValue accumulate(const Passage& p, const TreeConversion& gold, const Matrix* external,
                       const ForwardMode& mode);

  /// Loss only, in inference mode.
  LossValue loss(const Passage& p, const TreeConversion& gold, const Matrix* external) const;

  /// Log-probabilities relative to each cell's ∅ entry, so a tree's score is, up to a
  /// constant, the log-likelihood of the whole chart labeling (spans outside the tree
  /// count as ∅). Inner spans never take ROOT labels; the root span takes one
  /// when the inventory has any.
  SpanChart decoding_chart(const SpanChart& logits) const;

  ParseOutput parse(const Passage& p, const Matrix* external, double threshold, bool remotes = true) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  void zero_grad();

  const ModelConfig& config() const { return config_; }
  const Vocabularies& vocabs() const { return vocabs_; }
  const LabelInventory& labels() const { return labels_; }

  EmbeddingTables embeddings;
  Encoder encoder;
  Fenceposts fenceposts;
  SpanScorer scorer;
  RemoteHeads remote;

 private:
  ModelConfig config_;
  Vocabularies vocabs_;
  LabelInventory labels_;
  std::vector<bool> root_label_;
  std::vector<bool> punct_label_;
};

}  // namespace ucca
