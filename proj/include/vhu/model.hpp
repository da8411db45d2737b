#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vhu/hadamard.hpp"
#include "vhu/layers.hpp"
#include "vhu/tensor.hpp"

namespace vhu {

/// Architecture hyperparameters. Stage j of the encoder runs at
/// (height >> j) x (width >> j) with base_channels * 2^j feature maps; the
/// decoder has encoder_blocks - 1 upsampling stages.
struct VhuNetConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t encoder_blocks = 3;
  std::size_t base_channels = 8;
  std::size_t heads = 8;
  std::size_t transformer_blocks = 2;
  std::size_t hypernet_hidden = 32;
  double xi = 0.1;
  double leaky_slope = kLeakySlope;
  double norm_eps = kNormEps;
  double field_min = 1e-3;
  double field_max = 1e3;

  // Six encoder stages at 256x256, 8..256 channels.
  static VhuNetConfig paper();
  // Three encoder stages at 32x32, 8/16/32 channels.
  static VhuNetConfig desk();

  std::size_t decoder_blocks() const { return encoder_blocks - 1; }
  std::size_t channels(std::size_t stage) const { return base_channels << stage; }
  std::size_t stage_height(std::size_t stage) const { return height >> stage; }
  std::size_t stage_width(std::size_t stage) const { return width >> stage; }
  // Decoder block l produces channels(encoder_blocks - 2 - l).
  std::vector<std::size_t> decoder_channels() const;

  // Throws ConfigError when a stage would lose the power-of-two property or
  // the bottleneck width is not divisible by the head count.
  void validate() const;

  std::map<std::string, std::string> to_map() const;
  static VhuNetConfig from_map(const std::map<std::string, std::string>& kv);
};

/// vgg -> vgg -> ht2d -> scale -> semi_soft -> (iht2d).
struct ConvHtBlockParams {
  VggBlockParams vgg1, vgg2;
  ScalingParams scaling;
  ThresholdParams threshold;

  static ConvHtBlockParams init(std::size_t c_in, std::size_t c_out, std::size_t height, std::size_t width,
                                const VhuNetConfig& cfg, Rng& rng);
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

// When given, `modulation` is applied to the VGG output before the transform.
Tensor conv_ht_block(const Tensor& x, const ConvHtBlockParams& p, bool apply_inverse,
                     const Modulation* modulation = nullptr);

/// Transformer stack over Hadamard-domain tokens, then semi-soft + inverse transform.
struct IhtrtbParams {
  std::vector<TransformerParams> blocks;
  ThresholdParams threshold;

  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

// [S,M,N] <-> [M*N, S]; position (m,n) becomes token m*N + n.
Tensor to_tokens(const Tensor& y);
Tensor from_tokens(const Tensor& tokens, std::size_t m, std::size_t n);

Tensor ihtrtb(const Tensor& y, const IhtrtbParams& p);

struct DecoderStageParams {
  Tensor up_kernel;  // [C_out, C_in, 3, 3] after nearest 2x upsampling
  Tensor up_bias;    // [C_out]
  ConvHtBlockParams block;
};

struct ForwardResult {
  Tensor field;   // [1,H,W], multiplicative inverse of the bias field
  Tensor latent;  // final encoder output, Hadamard domain
};

class VhuNet {
 public:
  static VhuNet init(const VhuNetConfig& config, std::uint64_t seed);

  const VhuNetConfig& config() const { return config_; }

  ForwardResult forward(const Tensor& x_norm) const;
  ForwardResult forward(const Tensor& x_norm, double xi) const;

  // Deterministic order; names follow encoder.block{i}.vgg{j}.kernel etc.
  std::vector<NamedTensor> named_parameters() const;
  std::vector<Tensor> parameters() const;
  // Copies values by name; throws DataError on a missing name or shape mismatch.
  void load_parameters(const std::vector<NamedTensor>& entries);

  std::vector<ConvHtBlockParams> encoder;
  IhtrtbParams bottleneck;
  std::vector<DecoderStageParams> decoder;
  HyperNetParams hyper;
  Tensor head_kernel;  // [1, C_0, 1, 1]
  Tensor head_bias;    // [1]

 private:
  VhuNetConfig config_;
};

/// Per-image min-max normalization to [0,1].
struct Normalization {
  double minimum = 0;
  double range = 1;

  // Throws DataError for a constant image.
  static Normalization of(const Tensor& x);
  Tensor apply(const Tensor& x) const;
  Tensor invert(const Tensor& x) const;
};

struct Correction {
  Tensor corrected;  // [1,H,W], original intensity scale
  Tensor field;      // [1,H,W]
};

/// normalize -> forward -> denormalize -> multiply by the scalar field.
Correction correct(const VhuNet& net, const Tensor& x_raw);

}  // namespace vhu
