// Model fixtures shared by the model tests and the acceptance binary.
#pragma once

#include <random>

#include "support/gradcheck.hpp"
#include "vhu/layers.hpp"
#include "vhu/loss.hpp"
#include "vhu/model.hpp"
#include "vhu/ops.hpp"

namespace vhu::testing {

inline VhuNetConfig reduced_config() {
  VhuNetConfig c;
  c.height = 16;
  c.width = 16;
  c.encoder_blocks = 2;
  c.base_channels = 8;
  c.heads = 8;
  c.transformer_blocks = 2;
  c.hypernet_hidden = 8;
  return c;
}

inline void fill(Tensor t, double v) {
  for (auto& x : t.mutable_values()) x = v;
}

// theta = 1, thresholds = 0, every transformer parameter 0.
inline void collapse_to_unet(VhuNet& net) {
  auto reset_block = [](ConvHtBlockParams& b) {
    fill(b.scaling.theta, 1.0);
    fill(b.threshold.t_raw, 0.0);
  };
  for (auto& b : net.encoder) reset_block(b);
  for (auto& d : net.decoder) reset_block(d.block);
  std::vector<NamedTensor> named;
  net.bottleneck.collect("b", named);
  for (auto& [n, t] : named) fill(t, 0.0);
}

// The same network with every Hadamard-domain step removed: two VGG blocks per
// stage, max pooling, skips, upsampling conv, modulation and the field head.
inline Tensor stripped_unet(const VhuNet& net, const Tensor& x) {
  const auto& cfg = net.config();
  const std::size_t n = cfg.encoder_blocks;
  std::vector<Tensor> skips;
  Tensor h = x;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    skips.push_back(vgg_block(vgg_block(h, net.encoder[j].vgg1), net.encoder[j].vgg2));
    h = max_pool2x2(skips.back());
  }
  h = vgg_block(vgg_block(h, net.encoder[n - 1].vgg1), net.encoder[n - 1].vgg2);
  const auto mods = split_modulations(hypernet(cfg.xi, net.hyper), cfg.decoder_channels());
  for (std::size_t l = 0; l < net.decoder.size(); ++l) {
    const auto& d = net.decoder[l];
    Tensor up = conv2d(upsample_nearest2x(h), d.up_kernel, 1, 1, d.up_bias);
    Tensor g = vgg_block(vgg_block(concat_channels(up, skips[n - 2 - l]), d.block.vgg1), d.block.vgg2);
    h = hypernet_modulate(g, mods[l].gamma, mods[l].beta);
  }
  return clamp(exp(conv2d(h, net.head_kernel, 1, 0, net.head_bias)), cfg.field_min, cfg.field_max);
}

// Moves thresholds off zero and theta off one so the check sees every branch
// of the Hadamard layers, and enlarges the head so the field is not ~1.
inline void perturb_for_gradcheck(VhuNet& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> theta(0.7, 1.3), t(0.02, 0.2), head(-0.5, 0.5);
  auto touch = [&](ConvHtBlockParams& b) {
    for (auto& v : b.scaling.theta.mutable_values()) v = theta(rng);
    for (auto& v : b.threshold.t_raw.mutable_values()) v = t(rng);
  };
  for (auto& b : net.encoder) touch(b);
  for (auto& d : net.decoder) touch(d.block);
  for (auto& v : net.bottleneck.threshold.t_raw.mutable_values()) v = t(rng);
  for (auto& v : net.head_kernel.mutable_values()) v = head(rng);
}

}  // namespace vhu::testing
