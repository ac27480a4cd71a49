#include <algorithm>
#include <cmath>

#include "cpubone/arch.hpp"

namespace cpubone {

void AttentionSpec::validate() const {
  if (embed_channels == 0 || heads == 0)
    throw SpecError("attention needs embed_channels and heads >= 1");
  if (embed_channels % heads != 0)
    throw SpecError("attention embed_channels " + std::to_string(embed_channels) +
                    " not divisible by heads " + std::to_string(heads));
  if (downsample_factor != 2)
    throw SpecError("attention downsample_factor must be 2 (stride-2 depthwise reduction)");
  if (ffn_expansion == 0) throw SpecError("attention ffn_expansion must be >= 1");
}

std::vector<BlockConv> attention_convs(const AttentionSpec& spec) {
  spec.validate();
  const std::uint64_t c = spec.embed_channels;
  const std::uint64_t f = spec.ffn_expansion * c;
  return {
      {"qkv", ConvSpec{.c_in = c, .c_out = 3 * c}, Activation::None},
      {"qkv_down",
       ConvSpec{.c_in = 3 * c, .c_out = 3 * c, .kh = 3, .kw = 3, .stride = 2, .groups = 3 * c},
       Activation::None},
      {"proj", ConvSpec{.c_in = c, .c_out = c}, Activation::None},
      {"ffn_expand", ConvSpec{.c_in = c, .c_out = f}, Activation::Gelu},
      {"ffn_project", ConvSpec{.c_in = f, .c_out = c}, Activation::None},
  };
}

AttentionMacs attention_macs(const AttentionSpec& spec, std::uint64_t h, std::uint64_t w) {
  std::vector<BlockConv> convs = attention_convs(spec);
  const std::uint64_t rh = strided_extent(h, spec.downsample_factor);
  const std::uint64_t rw = strided_extent(w, spec.downsample_factor);
  AttentionMacs out;
  for (BlockConv& bc : convs) {
    const bool reduced = bc.role == "proj";
    const std::uint64_t ih = reduced ? rh : h;
    const std::uint64_t iw = reduced ? rw : w;
    apply_same_padding(bc.conv, ih, iw);
    out.convs += conv_macs(bc.conv, ih, iw);
  }
  const std::uint64_t tokens = rh * rw;
  // scores and weighted sum: heads * T * T * head_dim each
  out.matmuls = MacCount(tokens) * tokens * spec.embed_channels * 2;
  return out;
}

AttentionBlock::AttentionBlock(AttentionSpec spec, std::vector<ConvLayer> layers)
    : spec_(spec), layers_(std::move(layers)) {}

const ConvLayer& AttentionBlock::layer(const std::string& role) const {
  for (const ConvLayer& l : layers_)
    if (l.role == role) return l;
  throw std::out_of_range("attention block has no layer '" + role + "'");
}

std::uint64_t AttentionBlock::param_count() const {
  std::uint64_t n = 0;
  for (const ConvLayer& l : layers_) n += l.weights.weight.size() + l.weights.bias.size();
  return n;
}

AttentionBlock build_attention(const AttentionSpec& spec, std::uint64_t seed) {
  std::vector<ConvLayer> layers;
  std::uint64_t stream = seed;
  for (const BlockConv& bc : attention_convs(spec))
    layers.push_back(make_conv_layer(bc.role, bc.conv, bc.act, splitmix64(stream)));
  return AttentionBlock(spec, std::move(layers));
}

Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                    std::uint64_t heads, std::vector<float>* probs,
                                    MacCounter* counter) {
  const Shape4& s = q.shape();
  if (!(k.shape() == s) || !(v.shape() == s))
    throw ShapeError("q/k/v shapes differ: " + s.str() + " " + k.shape().str() + " " +
                     v.shape().str());
  if (heads == 0 || s.c % heads != 0)
    throw ShapeError("channels " + std::to_string(s.c) + " not divisible by heads " +
                     std::to_string(heads));
  const std::uint64_t hd = s.c / heads;
  const std::uint64_t t = s.h * s.w;
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
  Tensor out(s);
  std::vector<float> row(t);
  if (probs) probs->assign(s.n * heads * t * t, 0.0f);
  for (std::uint64_t n = 0; n < s.n; ++n) {
    for (std::uint64_t hh = 0; hh < heads; ++hh) {
      const std::uint64_t c0 = hh * hd;
      for (std::uint64_t i = 0; i < t; ++i) {
        float peak = -INFINITY;
        for (std::uint64_t j = 0; j < t; ++j) {
          float acc = 0.0f;
          for (std::uint64_t d = 0; d < hd; ++d)
            acc += q.plane(n, c0 + d)[i] * k.plane(n, c0 + d)[j];
          row[j] = acc * scale;
          peak = std::max(peak, row[j]);
        }
        float denom = 0.0f;
        for (std::uint64_t j = 0; j < t; ++j) {
          row[j] = std::exp(row[j] - peak);
          denom += row[j];
        }
        for (std::uint64_t j = 0; j < t; ++j) row[j] /= denom;
        if (probs)
          std::copy(row.begin(), row.end(),
                    probs->begin() + static_cast<std::ptrdiff_t>(((n * heads + hh) * t + i) * t));
        for (std::uint64_t d = 0; d < hd; ++d) {
          const float* vp = v.plane(n, c0 + d);
          float acc = 0.0f;
          for (std::uint64_t j = 0; j < t; ++j) acc += row[j] * vp[j];
          out.plane(n, c0 + d)[i] = acc;
        }
      }
    }
  }
  if (counter) counter->macs += 2 * s.n * heads * t * t * hd;
  return out;
}

namespace {

Tensor slice_channels(const Tensor& x, std::uint64_t begin, std::uint64_t count) {
  const Shape4& s = x.shape();
  Tensor out({s.n, count, s.h, s.w});
  const std::uint64_t plane = s.h * s.w;
  for (std::uint64_t n = 0; n < s.n; ++n)
    std::copy(x.plane(n, begin), x.plane(n, begin) + count * plane, out.plane(n, 0));
  return out;
}

void check_attention_input(const AttentionBlock& attn, const Tensor& input) {
  if (input.shape().c != attn.spec().embed_channels)
    throw ShapeError("attention over " + std::to_string(attn.spec().embed_channels) +
                     " channels got input " + input.shape().str());
}

// Shared dataflow; `conv` runs one layer with either kernel family.
template <typename RunConv>
Tensor mixer(const AttentionBlock& attn, const Tensor& input, RunConv conv, MacCounter* counter) {
  check_attention_input(attn, input);
  const std::uint64_t c = attn.spec().embed_channels;
  const Tensor reduced = conv(attn.layer("qkv_down"), conv(attn.layer("qkv"), input));
  const Tensor mixed =
      scaled_dot_product_attention(slice_channels(reduced, 0, c), slice_channels(reduced, c, c),
                                   slice_channels(reduced, 2 * c, c), attn.spec().heads,
                                   nullptr, counter);
  const Tensor projected = conv(attn.layer("proj"), mixed);
  Tensor out = crop_spatial(nearest_upsample(projected, attn.spec().downsample_factor),
                            input.shape().h, input.shape().w);
  add_inplace(out, input);
  return out;
}

template <typename RunConv>
Tensor ffn(const AttentionBlock& attn, const Tensor& x, RunConv conv) {
  Tensor out = conv(attn.layer("ffn_project"), conv(attn.layer("ffn_expand"), x));
  add_inplace(out, x);
  return out;
}

}  // namespace

Tensor attention_forward(const AttentionBlock& attn, const Tensor& input, unsigned threads) {
  auto run = [threads](const ConvLayer& l, const Tensor& x) { return l.forward(x, threads); };
  return mixer(attn, input, run, nullptr);
}

Tensor attention_forward_ref(const AttentionBlock& attn, const Tensor& input,
                             MacCounter* counter) {
  auto run = [counter](const ConvLayer& l, const Tensor& x) { return l.forward_ref(x, counter); };
  return mixer(attn, input, run, counter);
}

Tensor attention_block_forward(const AttentionBlock& attn, const Tensor& input,
                               unsigned threads) {
  auto run = [threads](const ConvLayer& l, const Tensor& x) { return l.forward(x, threads); };
  return ffn(attn, mixer(attn, input, run, nullptr), run);
}

Tensor attention_block_forward_ref(const AttentionBlock& attn, const Tensor& input,
                                   MacCounter* counter) {
  auto run = [counter](const ConvLayer& l, const Tensor& x) { return l.forward_ref(x, counter); };
  return ffn(attn, mixer(attn, input, run, counter), run);
}

}  // namespace cpubone
