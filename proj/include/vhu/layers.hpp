#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "vhu/optim.hpp"
#include "vhu/tensor.hpp"

namespace vhu {

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kNormEps = 1e-5;

using Rng = std::mt19937_64;

// Gaussian fill with the given standard deviation; the tensor requires grad.
Tensor init_normal(Shape shape, double stddev, Rng& rng);

/// conv 3x3 (stride 1, pad 1, no bias) -> instance norm -> leaky ReLU.
struct VggBlockParams {
  Tensor kernel;  // [C_out, C_in, 3, 3]
  Tensor gamma;   // [C_out]
  Tensor beta;    // [C_out]
  double slope = kLeakySlope;
  double eps = kNormEps;

  static VggBlockParams init(std::size_t c_in, std::size_t c_out, Rng& rng);
  std::size_t out_channels() const { return kernel.dim(0); }
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

Tensor vgg_block(const Tensor& x, const VggBlockParams& p);

/// Row-vector affine map x[G,in] * W[in,out] + b[out].
struct LinearParams {
  Tensor weight;
  Tensor bias;

  static LinearParams init(std::size_t in, std::size_t out, Rng& rng);
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

Tensor linear(const Tensor& x, const LinearParams& p);

/// Multi-head self-attention weights over tokens of width S = heads * head_dim.
/// Query/key/value projections are bias-free; only the output projection has a bias.
struct AttentionParams {
  std::vector<Tensor> wq, wk, wv;  // per head, [S, D]
  Tensor wo;                       // [S, S]
  Tensor bo;                       // [S]

  static AttentionParams init(std::size_t width, std::size_t heads, Rng& rng);
  std::size_t heads() const { return wq.size(); }
  std::size_t width() const { return wo.dim(0); }
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

// concat_l softmax(Q_l K_l^T / sqrt(D)) V_l * W_o + b_o, without the residual.
Tensor attention(const Tensor& tokens, const AttentionParams& p);
// attention(tokens) + tokens.
Tensor mhsa(const Tensor& tokens, const AttentionParams& p);

struct MlpParams {
  LinearParams fc1;  // S -> 4S
  LinearParams fc2;  // 4S -> S
  double slope = kLeakySlope;

  static MlpParams init(std::size_t width, Rng& rng);
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

Tensor mlp(const Tensor& tokens, const MlpParams& p);

/// Pre-norm transformer block:
///   x <- x + attention(LayerNorm(x));  x <- x + MLP(LayerNorm(x)).
struct TransformerParams {
  Tensor ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
  AttentionParams attn;
  MlpParams mlp;
  double eps = kNormEps;

  static TransformerParams init(std::size_t width, std::size_t heads, Rng& rng);
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

Tensor transformer_block(const Tensor& tokens, const TransformerParams& p);

/// Three fully connected layers mapping the scalar control xi to the
/// concatenation [gamma^0, beta^0, ..., gamma^{n-1}, beta^{n-1}] for decoder
/// blocks with the listed channel counts.
struct HyperNetParams {
  LinearParams fc1, fc2, fc3;
  std::vector<std::size_t> channels;
  double slope = kLeakySlope;

  // The output layer starts with small weights and bias (gamma=1, beta=0), so
  // modulation is close to the identity at initialization.
  static HyperNetParams init(std::vector<std::size_t> channels, std::size_t hidden, Rng& rng);
  std::size_t output_size() const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct Modulation {
  Tensor gamma;  // [C]
  Tensor beta;   // [C]
};

// Raw hypernetwork output vector of length output_size().
Tensor hypernet(double xi, const HyperNetParams& p);
std::vector<Modulation> split_modulations(const Tensor& raw, const std::vector<std::size_t>& channels);

// gamma[c] * g[c,h,w] + beta[c].
Tensor hypernet_modulate(const Tensor& g, const Tensor& gamma, const Tensor& beta);

}  // namespace vhu
