#include "ucca/remote.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ucca {

int TreeNode::parent_depth() const {
  const int depth = j - i == 1 ? units - 2 : units - 1;
  const int lowest = root ? 1 : 0;
  return depth >= lowest ? depth : -1;
}

namespace {

bool inside(const TreeNode& inner, const TreeNode& outer) { return outer.i <= inner.i && inner.j <= outer.j; }

std::vector<int> span_yield(const TreeNode& node) {
  std::vector<int> y;
  for (int t = node.i + 1; t <= node.j; ++t) y.push_back(t);
  return y;
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

RemoteCandidates remote_candidates(const ConstituencyTree& tree) {
  RemoteCandidates out;
  std::vector<Span> spans = debinarize(tree).spans;
  sort_spans(spans);
  std::vector<int> open;
  for (const auto& s : spans) {
    const ChainLabel label = parse_label(s.label);
    TreeNode node;
    node.i = s.i;
    node.j = s.j;
    node.root = s.i == 0 && s.j == tree.n;
    node.units = static_cast<int>(label.steps.size()) + (node.root && label.root ? 1 : 0);
    while (!open.empty() && !inside(node, out.nodes[static_cast<std::size_t>(open.back())])) open.pop_back();
    node.parent = open.empty() ? -1 : open.back();
    open.push_back(static_cast<int>(out.nodes.size()));
    out.nodes.push_back(node);
  }
  for (std::size_t s = 0; s < out.nodes.size(); ++s) {
    const TreeNode& src = out.nodes[s];
    if (src.root) continue;
    std::vector<int> parents;
    for (std::size_t p = 0; p < out.nodes.size(); ++p) {
      const TreeNode& par = out.nodes[p];
      if (p == s || inside(par, src) || static_cast<int>(p) == src.parent || par.parent_depth() < 0) continue;
      parents.push_back(static_cast<int>(p));
    }
    out.sources.push_back(static_cast<int>(s));
    out.parents.push_back(std::move(parents));
  }
  return out;
}

Vector node_representation(const ConstituencyTree& tree, const Matrix& fenceposts, int i, int j) {
  const bool found = std::any_of(tree.spans.begin(), tree.spans.end(),
                                 [&](const Span& s) { return s.i == i && s.j == j && s.label != kNullLabel; });
  if (!found) throw Error("span (" + std::to_string(i) + "," + std::to_string(j) + ") is not a node of the tree");
  Vector v(2 * fenceposts.cols());
  v.head(fenceposts.cols()) = fenceposts.row(i).transpose();
  v.tail(fenceposts.cols()) = fenceposts.row(j).transpose();
  return v;
}

RemoteHeads::RemoteHeads(int d_model, int hidden, std::mt19937_64& rng)
    : gate_hidden("remote.gate.hidden", ParamGroup::Remote, 2 * d_model, hidden, rng),
      gate_output("remote.gate.output", ParamGroup::Remote, hidden, 1, rng) {
  Linear first("remote.attach.first", ParamGroup::Remote, 4 * d_model, hidden, rng);
  attach_source = Parameter("remote.attach.source", ParamGroup::Remote, first.weight.value.topRows(2 * d_model));
  attach_parent = Parameter("remote.attach.parent", ParamGroup::Remote, first.weight.value.bottomRows(2 * d_model));
  attach_bias = Parameter("remote.attach.bias", ParamGroup::Remote, Matrix::Zero(1, hidden));
  attach_output = Linear("remote.attach.output", ParamGroup::Remote, hidden, static_cast<int>(kNumCategories), rng);
}

RemoteOutputs RemoteHeads::forward(const ConstituencyTree& tree, const Matrix& fenceposts) const {
  RemoteOutputs out;
  out.candidates = remote_candidates(tree);
  const auto& nodes = out.candidates.nodes;
  const Eigen::Index d = fenceposts.cols();
  out.reps.resize(static_cast<Eigen::Index>(nodes.size()), 2 * d);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    out.reps.block(static_cast<Eigen::Index>(k), 0, 1, d) = fenceposts.row(nodes[k].i);
    out.reps.block(static_cast<Eigen::Index>(k), d, 1, d) = fenceposts.row(nodes[k].j);
  }
  const auto& sources = out.candidates.sources;
  Matrix src_reps(static_cast<Eigen::Index>(sources.size()), 2 * d);
  for (std::size_t s = 0; s < sources.size(); ++s) src_reps.row(static_cast<Eigen::Index>(s)) = out.reps.row(sources[s]);
  out.gate_pre = gate_hidden.forward(src_reps);
  out.gate_hidden = out.gate_pre.cwiseMax(0.0);
  out.gate_logits = gate_output.forward(out.gate_hidden).col(0);

  out.attach_src = out.reps * attach_source.value;
  out.attach_par = out.reps * attach_parent.value;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const auto& parents = out.candidates.parents[s];
    Matrix pre(static_cast<Eigen::Index>(parents.size()), attach_bias.value.cols());
    for (std::size_t p = 0; p < parents.size(); ++p) {
      pre.row(static_cast<Eigen::Index>(p)) =
          out.attach_src.row(sources[s]) + out.attach_par.row(parents[p]) + attach_bias.value.row(0);
    }
    Matrix hidden = pre.cwiseMax(0.0);
    out.attach_logits.push_back(attach_output.forward(hidden));
    out.attach_pre.push_back(std::move(pre));
    out.attach_hidden.push_back(std::move(hidden));
  }
  return out;
}

Matrix RemoteHeads::backward(const RemoteGradients& grads, const RemoteOutputs& out, Eigen::Index fencepost_rows) {
  const auto& nodes = out.candidates.nodes;
  const auto& sources = out.candidates.sources;
  const Eigen::Index d = out.reps.cols() / 2;
  Matrix dreps = Matrix::Zero(out.reps.rows(), out.reps.cols());

  if (!sources.empty()) {
    Matrix dgate = grads.gate_logits;
    Matrix dhidden = gate_output.backward(out.gate_hidden, dgate);
    dhidden = (out.gate_pre.array() > 0.0).select(dhidden, 0.0);
    Matrix src_reps(static_cast<Eigen::Index>(sources.size()), 2 * d);
    for (std::size_t s = 0; s < sources.size(); ++s) src_reps.row(static_cast<Eigen::Index>(s)) = out.reps.row(sources[s]);
    const Matrix dsrc = gate_hidden.backward(src_reps, dhidden);
    for (std::size_t s = 0; s < sources.size(); ++s) dreps.row(sources[s]) += dsrc.row(static_cast<Eigen::Index>(s));
  }

  Matrix dsrc_proj = Matrix::Zero(out.attach_src.rows(), out.attach_src.cols());
  Matrix dpar_proj = Matrix::Zero(out.attach_par.rows(), out.attach_par.cols());
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const auto& parents = out.candidates.parents[s];
    if (parents.empty()) continue;
    Matrix dhidden = attach_output.backward(out.attach_hidden[s], grads.attach_logits[s]);
    dhidden = (out.attach_pre[s].array() > 0.0).select(dhidden, 0.0);
    attach_bias.grad.row(0) += dhidden.colwise().sum();
    dsrc_proj.row(sources[s]) += dhidden.colwise().sum();
    for (std::size_t p = 0; p < parents.size(); ++p) dpar_proj.row(parents[p]) += dhidden.row(static_cast<Eigen::Index>(p));
  }
  attach_source.grad.noalias() += out.reps.transpose() * dsrc_proj;
  attach_parent.grad.noalias() += out.reps.transpose() * dpar_proj;
  dreps.noalias() += dsrc_proj * attach_source.value.transpose();
  dreps.noalias() += dpar_proj * attach_parent.value.transpose();

  Matrix df = Matrix::Zero(fencepost_rows, d);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    df.row(nodes[k].i) += dreps.block(static_cast<Eigen::Index>(k), 0, 1, d);
    df.row(nodes[k].j) += dreps.block(static_cast<Eigen::Index>(k), d, 1, d);
  }
  return df;
}

std::vector<Parameter*> RemoteHeads::parameters() {
  return {&gate_hidden.weight,  &gate_hidden.bias,  &gate_output.weight,   &gate_output.bias, &attach_source,
          &attach_parent,       &attach_bias,       &attach_output.weight, &attach_output.bias};
}

RemoteTargets remote_targets(const RemoteCandidates& candidates, const std::vector<RemoteRecord>& gold) {
  RemoteTargets out;
  out.attach.resize(candidates.sources.size());
  auto find_node = [&](const std::vector<int>& y) -> int {
    if (y.empty() || !is_contiguous(y)) return -1;
    for (std::size_t k = 0; k < candidates.nodes.size(); ++k) {
      const auto& node = candidates.nodes[k];
      if (node.i == y.front() - 1 && node.j == y.back()) return static_cast<int>(k);
    }
    return -1;
  };
  for (const auto& r : gold) {
    const int child = find_node(r.child_yield);
    const int parent = find_node(r.parent_yield);
    const auto src = std::find(candidates.sources.begin(), candidates.sources.end(), child);
    if (child < 0 || parent < 0 || r.child_depth != 0 || src == candidates.sources.end() ||
        candidates.nodes[static_cast<std::size_t>(parent)].parent_depth() != r.parent_depth) {
      ++out.skipped;
      continue;
    }
    const auto s = static_cast<std::size_t>(src - candidates.sources.begin());
    const auto& parents = candidates.parents[s];
    const auto p = std::find(parents.begin(), parents.end(), parent);
    if (p == parents.end()) {
      ++out.skipped;
      continue;
    }
    out.attach[s].emplace_back(static_cast<int>(p - parents.begin()), static_cast<int>(r.category));
  }
  return out;
}

std::vector<RemoteRecord> select_remotes(const RemoteOutputs& out, double threshold) {
  const auto& cand = out.candidates;
  const auto& nodes = cand.nodes;
  // Span graph: primary containment plus the remotes accepted so far.
  std::vector<std::vector<int>> children(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k].parent >= 0) children[static_cast<std::size_t>(nodes[k].parent)].push_back(static_cast<int>(k));
  }
  auto reaches = [&](int from, int to) {
    std::vector<int> stack{from};
    std::vector<bool> seen(nodes.size(), false);
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      if (v == to) return true;
      if (seen[static_cast<std::size_t>(v)]) continue;
      seen[static_cast<std::size_t>(v)] = true;
      for (int c : children[static_cast<std::size_t>(v)]) stack.push_back(c);
    }
    return false;
  };

  std::vector<RemoteRecord> records;
  for (std::size_t s = 0; s < cand.sources.size(); ++s) {
    if (sigmoid(out.gate_logits(static_cast<Eigen::Index>(s))) < threshold) continue;
    const auto& parents = cand.parents[s];
    const Matrix& logits = out.attach_logits[s];
    const int src = cand.sources[s];
    int best_p = -1, best_c = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < parents.size(); ++p) {
      if (reaches(src, parents[p])) continue;
      for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        if (logits(static_cast<Eigen::Index>(p), c) > best) {
          best = logits(static_cast<Eigen::Index>(p), c);
          best_p = parents[p];
          best_c = static_cast<int>(c);
        }
      }
    }
    if (best_p < 0) continue;
    children[static_cast<std::size_t>(best_p)].push_back(src);
    const TreeNode& par = nodes[static_cast<std::size_t>(best_p)];
    records.push_back({span_yield(par), span_yield(nodes[static_cast<std::size_t>(src)]),
                       kAllCategories[static_cast<std::size_t>(best_c)], par.parent_depth(), 0});
  }
  return records;
}

std::vector<RemoteRecord> recover_remotes(const ConstituencyTree& tree, const Matrix& fenceposts,
                                          const RemoteHeads& heads, double threshold) {
  return select_remotes(heads.forward(tree, fenceposts), threshold);
}

}  // namespace ucca
