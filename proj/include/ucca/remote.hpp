// Remote edge heads over a primary tree.
//
// Tree nodes are the labeled spans of a debinarized tree. A span stands for
// the top unit of its chain when it is a remote child and for the lowest
// non-terminal unit of its chain when it is a remote parent.

#pragma once

#include <random>
#include <vector>

#include "ucca/conversion.hpp"
#include "ucca/nn.hpp"

namespace ucca {

struct TreeNode {
  int i = 0;
  int j = 0;
  int units = 1;        // units in the chain, the root unit included
  int parent = -1;      // enclosing node, -1 for the root
  bool root = false;
  /// Chain depth used when this node is a remote parent, -1 if it cannot be one.
  int parent_depth() const;
};

struct RemoteCandidates {
  std::vector<TreeNode> nodes;                // preorder
  std::vector<int> sources;                   // node indices
  std::vector<std::vector<int>> parents;      // per source, candidate node indices
};

/// Every non-root node is a source. Its candidates are the other nodes that
/// can be a parent, minus nodes inside it and its primary parent.
RemoteCandidates remote_candidates(const ConstituencyTree& tree);

/// [f_i ; f_j] for a span of `tree`; throws ucca::Error when the span is not in it.
Vector node_representation(const ConstituencyTree& tree, const Matrix& fenceposts, int i, int j);

struct RemoteOutputs {
  RemoteCandidates candidates;
  Vector gate_logits;                 // per source
  std::vector<Matrix> attach_logits;  // per source: candidates x categories
  // cache
  Matrix reps;
  Matrix gate_pre, gate_hidden;
  Matrix attach_src, attach_par;
  std::vector<Matrix> attach_pre, attach_hidden;
};

struct RemoteGradients {
  Vector gate_logits;
  std::vector<Matrix> attach_logits;
};

class RemoteHeads {
 public:
  RemoteHeads() = default;
  RemoteHeads(int d_model, int hidden, std::mt19937_64& rng);

  RemoteOutputs forward(const ConstituencyTree& tree, const Matrix& fenceposts) const;
  /// Returns d loss / d fenceposts.
  Matrix backward(const RemoteGradients& grads, const RemoteOutputs& out, Eigen::Index fencepost_rows);

  std::vector<Parameter*> parameters();

  Linear gate_hidden, gate_output;
  Parameter attach_source, attach_parent, attach_bias;
  Linear attach_output;
};

/// Gold attachment of each source: (candidate index, category index) pairs.
/// Records whose endpoints are not a source and one of its candidates are
/// counted in `skipped`.
struct RemoteTargets {
  std::vector<std::vector<std::pair<int, int>>> attach;
  int skipped = 0;
};

RemoteTargets remote_targets(const RemoteCandidates& candidates, const std::vector<RemoteRecord>& gold);

/// Gate probabilities at or above `threshold` attach to their best candidate
/// and category, skipping any choice that would close a cycle.
std::vector<RemoteRecord> recover_remotes(const ConstituencyTree& tree, const Matrix& fenceposts,
                                          const RemoteHeads& heads, double threshold);

/// Same, from precomputed outputs.
std::vector<RemoteRecord> select_remotes(const RemoteOutputs& out, double threshold);

double sigmoid(double x);

}  // namespace ucca
