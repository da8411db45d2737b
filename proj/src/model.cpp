#include "vhu/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vhu/ops.hpp"

namespace vhu {

VhuNetConfig VhuNetConfig::paper() {
  VhuNetConfig c;
  c.height = 256;
  c.width = 256;
  c.encoder_blocks = 6;
  c.base_channels = 8;
  return c;
}

VhuNetConfig VhuNetConfig::desk() { return VhuNetConfig{}; }

std::vector<std::size_t> VhuNetConfig::decoder_channels() const {
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < decoder_blocks(); ++l) out.push_back(channels(encoder_blocks - 2 - l));
  return out;
}

void VhuNetConfig::validate() const {
  if (encoder_blocks < 2) throw ConfigError("model needs at least two encoder blocks");
  if (base_channels == 0) throw ConfigError("base_channels must be positive");
  for (std::size_t j = 0; j < encoder_blocks; ++j) {
    const std::size_t h = stage_height(j), w = stage_width(j);
    if (!is_power_of_two(h) || !is_power_of_two(w) || (height >> j) << j != height || (width >> j) << j != width ||
        h < 2 || w < 2) {
      std::ostringstream os;
      os << "input " << height << "x" << width << " does not keep power-of-two extents >= 2 through " << encoder_blocks
         << " encoder stages";
      throw ConfigError(os.str());
    }
  }
  const std::size_t s = channels(encoder_blocks - 1);
  if (heads == 0 || s % heads != 0) {
    throw ConfigError("bottleneck width " + std::to_string(s) + " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  if (!(field_min > 0 && field_max > field_min)) throw ConfigError("field clamp range must satisfy 0 < min < max");
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::map<std::string, std::string> VhuNetConfig::to_map() const {
  return {{"height", std::to_string(height)},
          {"width", std::to_string(width)},
          {"encoder_blocks", std::to_string(encoder_blocks)},
          {"base_channels", std::to_string(base_channels)},
          {"heads", std::to_string(heads)},
          {"transformer_blocks", std::to_string(transformer_blocks)},
          {"hypernet_hidden", std::to_string(hypernet_hidden)},
          {"xi", fmt_double(xi)},
          {"leaky_slope", fmt_double(leaky_slope)},
          {"norm_eps", fmt_double(norm_eps)},
          {"field_min", fmt_double(field_min)},
          {"field_max", fmt_double(field_max)}};
}

VhuNetConfig VhuNetConfig::from_map(const std::map<std::string, std::string>& kv) {
  VhuNetConfig c;
  auto get_size = [&](const char* key, std::size_t& dst) {
    if (auto it = kv.find(key); it != kv.end()) {
      try {
        dst = std::stoul(it->second);
      } catch (const std::exception&) {
        throw ConfigError(std::string("model config: bad integer for ") + key + ": " + it->second);
      }
    }
  };
  auto get_double = [&](const char* key, double& dst) {
    if (auto it = kv.find(key); it != kv.end()) {
      try {
        dst = std::stod(it->second);
      } catch (const std::exception&) {
        throw ConfigError(std::string("model config: bad number for ") + key + ": " + it->second);
      }
    }
  };
  for (const auto& [k, v] : kv) {
    static const char* known[] = {"height", "width",     "encoder_blocks", "base_channels", "heads",     "transformer_blocks",
                                  "hypernet_hidden", "xi", "leaky_slope", "norm_eps", "field_min", "field_max"};
    if (std::find_if(std::begin(known), std::end(known), [&](const char* n) { return k == n; }) == std::end(known))
      throw ConfigError("model config: unknown key '" + k + "'");
  }
  get_size("height", c.height);
  get_size("width", c.width);
  get_size("encoder_blocks", c.encoder_blocks);
  get_size("base_channels", c.base_channels);
  get_size("heads", c.heads);
  get_size("transformer_blocks", c.transformer_blocks);
  get_size("hypernet_hidden", c.hypernet_hidden);
  get_double("xi", c.xi);
  get_double("leaky_slope", c.leaky_slope);
  get_double("norm_eps", c.norm_eps);
  get_double("field_min", c.field_min);
  get_double("field_max", c.field_max);
  c.validate();
  return c;
}

ConvHtBlockParams ConvHtBlockParams::init(std::size_t c_in, std::size_t c_out, std::size_t height, std::size_t width,
                                          const VhuNetConfig& cfg, Rng& rng) {
  ConvHtBlockParams p;
  p.vgg1 = VggBlockParams::init(c_in, c_out, rng);
  p.vgg2 = VggBlockParams::init(c_out, c_out, rng);
  for (auto* v : {&p.vgg1, &p.vgg2}) {
    v->slope = cfg.leaky_slope;
    v->eps = cfg.norm_eps;
  }
  p.scaling = ScalingParams::identity(height, width);
  p.threshold = ThresholdParams::zero(height, width);
  return p;
}

void ConvHtBlockParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  vgg1.collect(prefix + ".vgg0", out);
  vgg2.collect(prefix + ".vgg1", out);
  out.emplace_back(prefix + ".ht.theta", scaling.theta);
  out.emplace_back(prefix + ".ht.threshold", threshold.t_raw);
}

Tensor conv_ht_block(const Tensor& x, const ConvHtBlockParams& p, bool apply_inverse, const Modulation* modulation) {
  Tensor g = vgg_block(vgg_block(x, p.vgg1), p.vgg2);
  if (modulation) g = hypernet_modulate(g, modulation->gamma, modulation->beta);
  const auto plan = HadamardPlan::for_tensor(g);
  Tensor y = semi_soft(scale(ht2d(g, plan), p.scaling), p.threshold.effective());
  return apply_inverse ? iht2d(y, plan) : y;
}

void IhtrtbParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  for (std::size_t b = 0; b < blocks.size(); ++b) blocks[b].collect(prefix + ".tb" + std::to_string(b), out);
  out.emplace_back(prefix + ".threshold", threshold.t_raw);
}

Tensor to_tokens(const Tensor& y) {
  if (y.ndim() != 3) throw ShapeError("to_tokens: expected [S,M,N], got " + shape_str(y.shape()));
  return transpose(reshape(y, {y.dim(0), y.dim(1) * y.dim(2)}));
}

Tensor from_tokens(const Tensor& tokens, std::size_t m, std::size_t n) {
  if (tokens.ndim() != 2 || tokens.dim(0) != m * n) {
    throw ShapeError("from_tokens: " + shape_str(tokens.shape()) + " is not a sequence of " + std::to_string(m * n) +
                     " tokens");
  }
  return reshape(transpose(tokens), {tokens.dim(1), m, n});
}

Tensor ihtrtb(const Tensor& y, const IhtrtbParams& p) {
  if (y.ndim() != 3) throw ShapeError("ihtrtb: expected [S,M,N], got " + shape_str(y.shape()));
  Tensor tokens = to_tokens(y);
  for (const auto& block : p.blocks) tokens = transformer_block(tokens, block);
  const Tensor z = from_tokens(tokens, y.dim(1), y.dim(2));
  return iht2d(semi_soft(z, p.threshold.effective()));
}

VhuNet VhuNet::init(const VhuNetConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  VhuNet net;
  net.config_ = config;
  const std::size_t n = config.encoder_blocks;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t c_in = j == 0 ? 1 : config.channels(j - 1);
    net.encoder.push_back(ConvHtBlockParams::init(c_in, config.channels(j), config.stage_height(j),
                                                  config.stage_width(j), config, rng));
  }
  const std::size_t s = config.channels(n - 1);
  for (std::size_t b = 0; b < config.transformer_blocks; ++b) {
    auto tb = TransformerParams::init(s, config.heads, rng);
    tb.eps = config.norm_eps;
    tb.mlp.slope = config.leaky_slope;
    net.bottleneck.blocks.push_back(std::move(tb));
  }
  net.bottleneck.threshold = ThresholdParams::zero(config.stage_height(n - 1), config.stage_width(n - 1));
  for (std::size_t l = 0; l < config.decoder_blocks(); ++l) {
    const std::size_t stage = n - 2 - l;
    const std::size_t c_prev = config.channels(stage + 1), c = config.channels(stage);
    DecoderStageParams d;
    d.up_kernel = init_normal({c, c_prev, 3, 3}, std::sqrt(2.0 / static_cast<double>(9 * c_prev)), rng);
    d.up_bias = Tensor::zeros({c}, true);
    d.block = ConvHtBlockParams::init(2 * c, c, config.stage_height(stage), config.stage_width(stage), config, rng);
    net.decoder.push_back(std::move(d));
  }
  net.hyper = HyperNetParams::init(config.decoder_channels(), config.hypernet_hidden, rng);
  net.hyper.slope = config.leaky_slope;
  net.head_kernel = init_normal({1, config.channels(0), 1, 1}, 0.01 / std::sqrt(static_cast<double>(config.channels(0))), rng);
  net.head_bias = Tensor::zeros({1}, true);
  return net;
}

ForwardResult VhuNet::forward(const Tensor& x_norm) const { return forward(x_norm, config_.xi); }

ForwardResult VhuNet::forward(const Tensor& x_norm, double xi) const {
  const Shape expected{1, config_.height, config_.width};
  if (x_norm.shape() != expected) {
    throw ShapeError("model expects input " + shape_str(expected) + ", got " + shape_str(x_norm.shape()));
  }
  const std::size_t n = config_.encoder_blocks;
  std::vector<Tensor> skips;
  Tensor h = x_norm;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    skips.push_back(conv_ht_block(h, encoder[j], true));
    h = max_pool2x2(skips.back());
  }
  const Tensor latent = conv_ht_block(h, encoder[n - 1], false);
  h = ihtrtb(latent, bottleneck);

  const auto mods = split_modulations(hypernet(xi, hyper), config_.decoder_channels());
  for (std::size_t l = 0; l < decoder.size(); ++l) {
    const Tensor up = conv2d(upsample_nearest2x(h), decoder[l].up_kernel, 1, 1, decoder[l].up_bias);
    h = conv_ht_block(concat_channels(up, skips[n - 2 - l]), decoder[l].block, true, &mods[l]);
  }
  const Tensor logits = conv2d(h, head_kernel, 1, 0, head_bias);
  return {clamp(exp(logits), config_.field_min, config_.field_max), latent};
}

std::vector<NamedTensor> VhuNet::named_parameters() const {
  std::vector<NamedTensor> out;
  for (std::size_t j = 0; j < encoder.size(); ++j) encoder[j].collect("encoder.block" + std::to_string(j), out);
  bottleneck.collect("decoder.ihtrtb", out);
  for (std::size_t l = 0; l < decoder.size(); ++l) {
    const std::string p = "decoder.block" + std::to_string(l);
    out.emplace_back(p + ".up.kernel", decoder[l].up_kernel);
    out.emplace_back(p + ".up.bias", decoder[l].up_bias);
    decoder[l].block.collect(p, out);
  }
  hyper.collect("decoder.hypernet", out);
  out.emplace_back("head.kernel", head_kernel);
  out.emplace_back("head.bias", head_bias);
  return out;
}

std::vector<Tensor> VhuNet::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

void VhuNet::load_parameters(const std::vector<NamedTensor>& entries) {
  for (auto& [name, param] : named_parameters()) {
    auto it = std::find_if(entries.begin(), entries.end(), [&](const NamedTensor& e) { return e.first == name; });
    if (it == entries.end()) throw DataError("checkpoint is missing parameter '" + name + "'");
    if (it->second.shape() != param.shape()) {
      throw DataError("checkpoint parameter '" + name + "' has shape " + shape_str(it->second.shape()) + ", model expects " +
                      shape_str(param.shape()));
    }
    Tensor dst = param;
    std::copy(it->second.values().begin(), it->second.values().end(), dst.mutable_values().begin());
  }
}

Normalization Normalization::of(const Tensor& x) {
  const auto v = x.values();
  if (v.empty()) throw DataError("cannot normalize an empty image");
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (!(*hi > *lo)) throw DataError("cannot normalize a constant image (max == min)");
  return {*lo, *hi - *lo};
}

Tensor Normalization::apply(const Tensor& x) const { return mul_scalar(add_scalar(x, -minimum), 1.0 / range); }

Tensor Normalization::invert(const Tensor& x) const { return add_scalar(mul_scalar(x, range), minimum); }

Correction correct(const VhuNet& net, const Tensor& x_raw) {
  for (double v : x_raw.values())
    if (v < 0) throw DataError("raw intensities must be nonnegative");
  NoGradGuard no_grad;
  const auto norm = Normalization::of(x_raw);
  const Tensor field = net.forward(norm.apply(x_raw)).field;
  // denormalize(normalize(x)) is x itself; multiplying the raw buffer keeps a
  // unit field exact.
  return {mul(x_raw, field), field};
}

}  // namespace vhu
