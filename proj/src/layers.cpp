#include "vhu/layers.hpp"

#include <cmath>
#include <numeric>

#include "vhu/ops.hpp"

namespace vhu {

Tensor init_normal(Shape shape, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

VggBlockParams VggBlockParams::init(std::size_t c_in, std::size_t c_out, Rng& rng) {
  VggBlockParams p;
  p.kernel = init_normal({c_out, c_in, 3, 3}, std::sqrt(2.0 / static_cast<double>(9 * c_in)), rng);
  p.gamma = Tensor::full({c_out}, 1.0, true);
  p.beta = Tensor::zeros({c_out}, true);
  return p;
}

void VggBlockParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.emplace_back(prefix + ".kernel", kernel);
  out.emplace_back(prefix + ".gamma", gamma);
  out.emplace_back(prefix + ".beta", beta);
}

Tensor vgg_block(const Tensor& x, const VggBlockParams& p) {
  return leaky_relu(instance_norm(conv2d(x, p.kernel, 1, 1), p.gamma, p.beta, p.eps), p.slope);
}

LinearParams LinearParams::init(std::size_t in, std::size_t out, Rng& rng) {
  return {init_normal({in, out}, std::sqrt(2.0 / static_cast<double>(in)), rng), Tensor::zeros({out}, true)};
}

void LinearParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

Tensor linear(const Tensor& x, const LinearParams& p) { return add_row_bias(matmul(x, p.weight), p.bias); }

AttentionParams AttentionParams::init(std::size_t width, std::size_t heads, Rng& rng) {
  if (heads == 0 || width % heads != 0) {
    throw ShapeError("attention width " + std::to_string(width) + " is not divisible by " + std::to_string(heads) +
                     " heads");
  }
  const std::size_t d = width / heads;
  const double sd = 1.0 / std::sqrt(static_cast<double>(width));
  AttentionParams p;
  for (std::size_t l = 0; l < heads; ++l) {
    p.wq.push_back(init_normal({width, d}, sd, rng));
    p.wk.push_back(init_normal({width, d}, sd, rng));
    p.wv.push_back(init_normal({width, d}, sd, rng));
  }
  p.wo = init_normal({width, width}, sd, rng);
  p.bo = Tensor::zeros({width}, true);
  return p;
}

void AttentionParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  for (std::size_t l = 0; l < heads(); ++l) {
    const std::string h = prefix + ".h" + std::to_string(l);
    out.emplace_back(h + ".wq", wq[l]);
    out.emplace_back(h + ".wk", wk[l]);
    out.emplace_back(h + ".wv", wv[l]);
  }
  out.emplace_back(prefix + ".wo", wo);
  out.emplace_back(prefix + ".bo", bo);
}

Tensor attention(const Tensor& tokens, const AttentionParams& p) {
  if (tokens.ndim() != 2 || tokens.dim(1) != p.width()) {
    throw ShapeError("attention: tokens " + shape_str(tokens.shape()) + " do not have width " + std::to_string(p.width()));
  }
  const std::size_t d = p.width() / p.heads();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<Tensor> heads;
  heads.reserve(p.heads());
  for (std::size_t l = 0; l < p.heads(); ++l) {
    const Tensor q = matmul(tokens, p.wq[l]);
    const Tensor k = matmul(tokens, p.wk[l]);
    const Tensor v = matmul(tokens, p.wv[l]);
    const Tensor weights = softmax_rows(mul_scalar(matmul(q, transpose(k)), inv_sqrt_d));
    heads.push_back(matmul(weights, v));
  }
  return add_row_bias(matmul(concat_cols(heads), p.wo), p.bo);
}

Tensor mhsa(const Tensor& tokens, const AttentionParams& p) { return add(attention(tokens, p), tokens); }

MlpParams MlpParams::init(std::size_t width, Rng& rng) {
  return {LinearParams::init(width, 4 * width, rng), LinearParams::init(4 * width, width, rng)};
}

void MlpParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  fc1.collect(prefix + ".fc1", out);
  fc2.collect(prefix + ".fc2", out);
}

Tensor mlp(const Tensor& tokens, const MlpParams& p) { return linear(leaky_relu(linear(tokens, p.fc1), p.slope), p.fc2); }

TransformerParams TransformerParams::init(std::size_t width, std::size_t heads, Rng& rng) {
  TransformerParams p;
  p.ln1_gamma = Tensor::full({width}, 1.0, true);
  p.ln1_beta = Tensor::zeros({width}, true);
  p.ln2_gamma = Tensor::full({width}, 1.0, true);
  p.ln2_beta = Tensor::zeros({width}, true);
  p.attn = AttentionParams::init(width, heads, rng);
  p.mlp = MlpParams::init(width, rng);
  return p;
}

void TransformerParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.emplace_back(prefix + ".ln1.gamma", ln1_gamma);
  out.emplace_back(prefix + ".ln1.beta", ln1_beta);
  attn.collect(prefix + ".attn", out);
  out.emplace_back(prefix + ".ln2.gamma", ln2_gamma);
  out.emplace_back(prefix + ".ln2.beta", ln2_beta);
  mlp.collect(prefix + ".mlp", out);
}

Tensor transformer_block(const Tensor& tokens, const TransformerParams& p) {
  const Tensor x = add(tokens, attention(layer_norm_rows(tokens, p.ln1_gamma, p.ln1_beta, p.eps), p.attn));
  return add(x, mlp(layer_norm_rows(x, p.ln2_gamma, p.ln2_beta, p.eps), p.mlp));
}

HyperNetParams HyperNetParams::init(std::vector<std::size_t> channels, std::size_t hidden, Rng& rng) {
  HyperNetParams p;
  p.channels = std::move(channels);
  p.fc1 = LinearParams::init(1, hidden, rng);
  p.fc2 = LinearParams::init(hidden, hidden, rng);
  const std::size_t n = p.output_size();
  p.fc3 = {init_normal({hidden, n}, 0.01 / std::sqrt(static_cast<double>(hidden)), rng), Tensor::zeros({n}, true)};
  auto b = p.fc3.bias.mutable_values();
  std::size_t off = 0;
  for (auto c : p.channels) {
    for (std::size_t i = 0; i < c; ++i) b[off + i] = 1.0;
    off += 2 * c;
  }
  return p;
}

std::size_t HyperNetParams::output_size() const {
  return 2 * std::accumulate(channels.begin(), channels.end(), std::size_t{0});
}

void HyperNetParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  fc1.collect(prefix + ".fc1", out);
  fc2.collect(prefix + ".fc2", out);
  fc3.collect(prefix + ".fc3", out);
}

Tensor hypernet(double xi, const HyperNetParams& p) {
  const Tensor in({1, 1}, {xi});
  const Tensor h1 = leaky_relu(linear(in, p.fc1), p.slope);
  const Tensor h2 = leaky_relu(linear(h1, p.fc2), p.slope);
  return reshape(linear(h2, p.fc3), {p.output_size()});
}

std::vector<Modulation> split_modulations(const Tensor& raw, const std::vector<std::size_t>& channels) {
  const std::size_t total = 2 * std::accumulate(channels.begin(), channels.end(), std::size_t{0});
  if (raw.numel() != total) {
    throw ShapeError("hypernetwork output has " + std::to_string(raw.numel()) + " entries, expected " +
                     std::to_string(total));
  }
  std::vector<Modulation> mods;
  std::size_t off = 0;
  for (auto c : channels) {
    mods.push_back({slice(raw, off, c), slice(raw, off + c, c)});
    off += 2 * c;
  }
  return mods;
}

Tensor hypernet_modulate(const Tensor& g, const Tensor& gamma, const Tensor& beta) {
  return channel_affine(g, gamma, beta);
}

}  // namespace vhu
