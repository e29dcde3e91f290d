// Dense layers with hand-written backward passes.
//
// Every layer keeps its forward intermediates in an explicit cache object so
// that one set of parameters can serve several passages before an update.
// Gradients accumulate into Parameter::grad until zero_grad().

#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

namespace ucca {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class ParamGroup { Embedding, Projection, Attention, FeedForward, LayerNorm, SpanMlp, Remote };

std::string_view to_string(ParamGroup g);

struct Parameter {
  std::string name;
  ParamGroup group = ParamGroup::Projection;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string name, ParamGroup group, Matrix value);
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Dropout and related switches for one forward pass.
struct ForwardMode {
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  bool drops() const { return training && dropout > 0.0 && rng != nullptr; }
};

/// Inverted-dropout mask (entries 0 or 1/(1-p)); all ones when inactive.
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, const ForwardMode& mode);

/// Row-wise numerically stable softmax.
Matrix softmax_rows(const Matrix& x);

class Linear {
 public:
  Linear() = default;
  /// Xavier-uniform weights, zero bias.
  Linear(const std::string& name, ParamGroup group, int in, int out, std::mt19937_64& rng);

  Matrix forward(const Matrix& x) const;
  /// Accumulates weight and bias gradients; returns d/dx.
  Matrix backward(const Matrix& x, const Matrix& dy);

  int in() const { return static_cast<int>(weight.value.rows()); }
  int out() const { return static_cast<int>(weight.value.cols()); }

  Parameter weight;
  Parameter bias;
};

struct LayerNormCache {
  Matrix xhat;
  Vector inv_std;
};

class LayerNorm {
 public:
  static constexpr double kEpsilon = 1e-6;

  LayerNorm() = default;
  LayerNorm(const std::string& name, int dim);

  Matrix forward(const Matrix& x, LayerNormCache* cache) const;
  Matrix backward(const Matrix& dy, const LayerNormCache& cache);

  Parameter gain;
  Parameter shift;
};

struct AttentionCache {
  Matrix x;
  Matrix q, k, v;
  std::vector<Matrix> probs;  // per head, before dropout
  std::vector<Matrix> masks;  // per head dropout masks
  Matrix context;
};

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, int dim, int heads, std::mt19937_64& rng);

  Matrix forward(const Matrix& x, const ForwardMode& mode, AttentionCache* cache) const;
  Matrix backward(const Matrix& dy, const AttentionCache& cache);

  int heads() const { return heads_; }

  Linear query, key, value, output;

 private:
  int heads_ = 1;
};

struct FeedForwardCache {
  Matrix x;
  Matrix pre;     // before ReLU
  Matrix hidden;  // after ReLU and dropout
  Matrix mask;
};

class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(const std::string& name, int dim, int hidden, std::mt19937_64& rng);

  Matrix forward(const Matrix& x, const ForwardMode& mode, FeedForwardCache* cache) const;
  Matrix backward(const Matrix& dy, const FeedForwardCache& cache);

  Linear inner, outer;
};

struct EncoderLayerCache {
  LayerNormCache norm1, norm2;
  AttentionCache attention;
  FeedForwardCache feed_forward;
};

/// Pre-norm residual block: h = x + Attn(LN(x)); y = h + FFN(LN(h)).
class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(const std::string& name, int dim, int heads, int ffn, std::mt19937_64& rng);

  Matrix forward(const Matrix& x, const ForwardMode& mode, EncoderLayerCache* cache) const;
  Matrix backward(const Matrix& dy, const EncoderLayerCache& cache);

  LayerNorm norm1, norm2;
  MultiHeadAttention attention;
  FeedForward feed_forward;
};

}  // namespace ucca
