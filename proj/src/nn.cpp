#include "ucca/nn.hpp"

#include <cmath>

#include "ucca/graph.hpp"

namespace ucca {

std::string_view to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::Embedding: return "embedding";
    case ParamGroup::Projection: return "projection";
    case ParamGroup::Attention: return "attention";
    case ParamGroup::FeedForward: return "feed_forward";
    case ParamGroup::LayerNorm: return "layer_norm";
    case ParamGroup::SpanMlp: return "span_mlp";
    case ParamGroup::Remote: return "remote";
  }
  return "?";
}

Parameter::Parameter(std::string name_, ParamGroup group_, Matrix value_)
    : name(std::move(name_)), group(group_), value(std::move(value_)) {
  zero_grad();
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, const ForwardMode& mode) {
  Matrix mask = Matrix::Ones(rows, cols);
  if (!mode.drops()) return mask;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double keep = 1.0 - mode.dropout;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) mask(r, c) = uniform(*mode.rng) < keep ? 1.0 / keep : 0.0;
  }
  return mask;
}

Matrix softmax_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double top = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - top).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Linear::Linear(const std::string& name, ParamGroup group, int in, int out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> uniform(-limit, limit);
  Matrix w(in, out);
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = uniform(rng);
  }
  weight = Parameter(name + ".weight", group, std::move(w));
  bias = Parameter(name + ".bias", group, Matrix::Zero(1, out));
}

Matrix Linear::forward(const Matrix& x) const {
  if (x.cols() != weight.value.rows()) throw Error("dimension mismatch in " + weight.name);
  Matrix y = x * weight.value;
  y.rowwise() += bias.value.row(0);
  return y;
}

Matrix Linear::backward(const Matrix& x, const Matrix& dy) {
  weight.grad.noalias() += x.transpose() * dy;
  bias.grad.row(0) += dy.colwise().sum();
  return dy * weight.value.transpose();
}

LayerNorm::LayerNorm(const std::string& name, int dim)
    : gain(name + ".gain", ParamGroup::LayerNorm, Matrix::Ones(1, dim)),
      shift(name + ".shift", ParamGroup::LayerNorm, Matrix::Zero(1, dim)) {}

Matrix LayerNorm::forward(const Matrix& x, LayerNormCache* cache) const {
  const auto d = static_cast<double>(x.cols());
  Matrix xhat(x.rows(), x.cols());
  Vector inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).sum() / d;
    const auto centered = x.row(r).array() - mean;
    const double var = centered.square().sum() / d;
    inv_std(r) = 1.0 / std::sqrt(var + kEpsilon);
    xhat.row(r) = centered * inv_std(r);
  }
  Matrix y = xhat.array().rowwise() * gain.value.row(0).array();
  y.rowwise() += shift.value.row(0);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Matrix LayerNorm::backward(const Matrix& dy, const LayerNormCache& cache) {
  gain.grad.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  shift.grad.row(0) += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gain.value.row(0).array();
  const auto d = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double sum = dxhat.row(r).sum();
    const double dot = dxhat.row(r).dot(cache.xhat.row(r));
    dx.row(r) = (cache.inv_std(r) / d) * (d * dxhat.row(r).array() - sum - cache.xhat.row(r).array() * dot);
  }
  return dx;
}

MultiHeadAttention::MultiHeadAttention(const std::string& name, int dim, int heads, std::mt19937_64& rng)
    : query(name + ".query", ParamGroup::Attention, dim, dim, rng),
      key(name + ".key", ParamGroup::Attention, dim, dim, rng),
      value(name + ".value", ParamGroup::Attention, dim, dim, rng),
      output(name + ".output", ParamGroup::Attention, dim, dim, rng),
      heads_(heads) {
  if (heads < 1 || dim % heads != 0) throw Error("model dimension must be divisible by the head count");
}

Matrix MultiHeadAttention::forward(const Matrix& x, const ForwardMode& mode, AttentionCache* cache) const {
  const Eigen::Index n = x.rows();
  const Eigen::Index dk = x.cols() / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Matrix q = query.forward(x);
  Matrix k = key.forward(x);
  Matrix v = value.forward(x);
  Matrix context(n, x.cols());
  std::vector<Matrix> probs, masks;
  for (int h = 0; h < heads_; ++h) {
    const auto cols = Eigen::seqN(h * dk, dk);
    Matrix scores = q(Eigen::all, cols) * k(Eigen::all, cols).transpose() * scale;
    Matrix p = softmax_rows(scores);
    Matrix mask = dropout_mask(n, n, mode);
    context(Eigen::all, cols) = p.cwiseProduct(mask) * v(Eigen::all, cols);
    probs.push_back(std::move(p));
    masks.push_back(std::move(mask));
  }
  Matrix y = output.forward(context);
  if (cache) {
    cache->x = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->masks = std::move(masks);
    cache->context = std::move(context);
  }
  return y;
}

Matrix MultiHeadAttention::backward(const Matrix& dy, const AttentionCache& cache) {
  const Eigen::Index n = cache.x.rows();
  const Eigen::Index dk = cache.x.cols() / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  const Matrix dcontext = output.backward(cache.context, dy);
  Matrix dq(n, cache.x.cols()), dk_all(n, cache.x.cols()), dv(n, cache.x.cols());
  for (int h = 0; h < heads_; ++h) {
    const auto cols = Eigen::seqN(h * dk, dk);
    const Matrix& p = cache.probs[static_cast<std::size_t>(h)];
    const Matrix& mask = cache.masks[static_cast<std::size_t>(h)];
    const Matrix dropped = p.cwiseProduct(mask);
    const Matrix dout = dcontext(Eigen::all, cols);
    dv(Eigen::all, cols) = dropped.transpose() * dout;
    const Matrix dp = (dout * cache.v(Eigen::all, cols).transpose()).cwiseProduct(mask);
    const Vector row_dot = dp.cwiseProduct(p).rowwise().sum();
    const Matrix dscores = p.cwiseProduct(dp.colwise() - row_dot) * scale;
    dq(Eigen::all, cols) = dscores * cache.k(Eigen::all, cols);
    dk_all(Eigen::all, cols) = dscores.transpose() * cache.q(Eigen::all, cols);
  }
  Matrix dx = query.backward(cache.x, dq);
  dx += key.backward(cache.x, dk_all);
  dx += value.backward(cache.x, dv);
  return dx;
}

FeedForward::FeedForward(const std::string& name, int dim, int hidden, std::mt19937_64& rng)
    : inner(name + ".inner", ParamGroup::FeedForward, dim, hidden, rng),
      outer(name + ".outer", ParamGroup::FeedForward, hidden, dim, rng) {}

Matrix FeedForward::forward(const Matrix& x, const ForwardMode& mode, FeedForwardCache* cache) const {
  Matrix pre = inner.forward(x);
  Matrix mask = dropout_mask(pre.rows(), pre.cols(), mode);
  Matrix hidden = pre.cwiseMax(0.0).cwiseProduct(mask);
  Matrix y = outer.forward(hidden);
  if (cache) {
    cache->x = x;
    cache->pre = std::move(pre);
    cache->hidden = std::move(hidden);
    cache->mask = std::move(mask);
  }
  return y;
}

Matrix FeedForward::backward(const Matrix& dy, const FeedForwardCache& cache) {
  Matrix dhidden = outer.backward(cache.hidden, dy);
  dhidden = dhidden.cwiseProduct(cache.mask);
  dhidden = (cache.pre.array() > 0.0).select(dhidden, 0.0);
  return inner.backward(cache.x, dhidden);
}

EncoderLayer::EncoderLayer(const std::string& name, int dim, int heads, int ffn, std::mt19937_64& rng)
    : norm1(name + ".norm1", dim),
      norm2(name + ".norm2", dim),
      attention(name + ".attention", dim, heads, rng),
      feed_forward(name + ".feed_forward", dim, ffn, rng) {}

Matrix EncoderLayer::forward(const Matrix& x, const ForwardMode& mode, EncoderLayerCache* cache) const {
  const Matrix a = norm1.forward(x, cache ? &cache->norm1 : nullptr);
  const Matrix h = x + attention.forward(a, mode, cache ? &cache->attention : nullptr);
  const Matrix b = norm2.forward(h, cache ? &cache->norm2 : nullptr);
  return h + feed_forward.forward(b, mode, cache ? &cache->feed_forward : nullptr);
}

Matrix EncoderLayer::backward(const Matrix& dy, const EncoderLayerCache& cache) {
  const Matrix dh = dy + norm2.backward(feed_forward.backward(dy, cache.feed_forward), cache.norm2);
  return dh + norm1.backward(attention.backward(dh, cache.attention), cache.norm1);
}

}  // namespace ucca
