#include "cpubone/blocks.hpp"

#include <cmath>
#include <sstream>

namespace cpubone {

std::string to_string(BlockVariant v) {
  switch (v) {
    case BlockVariant::MBConv: return "MBConv";
    case BlockVariant::GrMBConv: return "GrMBConv";
    case BlockVariant::FuMBConv: return "FuMBConv";
    case BlockVariant::GrFuMBConv: return "GrFuMBConv";
  }
  return "?";
}

BlockVariant block_variant_from_string(const std::string& name) {
  if (name == "MBConv") return BlockVariant::MBConv;
  if (name == "GrMBConv") return BlockVariant::GrMBConv;
  if (name == "FuMBConv") return BlockVariant::FuMBConv;
  if (name == "GrFuMBConv") return BlockVariant::GrFuMBConv;
  throw SpecError("unknown block variant '" + name +
                  "' (expected MBConv, GrMBConv, FuMBConv or GrFuMBConv)");
}

bool is_fused(BlockVariant v) {
  return v == BlockVariant::FuMBConv || v == BlockVariant::GrFuMBConv;
}

bool is_grouped(BlockVariant v) {
  return v == BlockVariant::GrMBConv || v == BlockVariant::GrFuMBConv;
}

std::string BlockSpec::str() const {
  std::ostringstream os;
  os << to_string(variant) << "{c_in=" << c_in << " c_out=" << c_out << " e=" << expansion
     << " k=" << kh << "x" << kw << " stride=" << stride << " groups=" << first_conv_groups()
     << (residual ? " residual" : "") << "}";
  return os.str();
}

void BlockSpec::validate() const {
  if (c_in == 0 || c_out == 0 || expansion == 0 || groups == 0)
    throw SpecError("block channels, expansion and groups must be >= 1: " + str());
  if (residual && (stride != 1 || c_in != c_out))
    throw SpecError("residual requires stride 1 and c_in == c_out: " + str());
  for (const BlockConv& bc : block_convs(*this)) bc.conv.validate();
}

std::vector<BlockConv> block_convs(const BlockSpec& spec) {
  const std::uint64_t mid = spec.mid_channels();
  std::vector<BlockConv> convs;
  if (is_fused(spec.variant)) {
    ConvSpec expand{.c_in = spec.c_in, .c_out = mid, .kh = spec.kh, .kw = spec.kw,
                    .stride = spec.stride, .groups = spec.first_conv_groups()};
    convs.push_back({"expand", expand, spec.act});
  } else {
    ConvSpec expand{.c_in = spec.c_in, .c_out = mid, .groups = spec.first_conv_groups()};
    ConvSpec dw{.c_in = mid, .c_out = mid, .kh = spec.kh, .kw = spec.kw,
                .stride = spec.stride, .groups = mid};
    convs.push_back({"expand", expand, spec.act});
    convs.push_back({"depthwise", dw, spec.act});
  }
  ConvSpec project{.c_in = mid, .c_out = spec.c_out};
  convs.push_back({"project", project, spec.proj_act});
  return convs;
}

std::uint64_t strided_extent(std::uint64_t extent, std::uint64_t stride) {
  return (extent + stride - 1) / stride;
}

MacCount block_macs(const BlockSpec& spec, std::uint64_t h, std::uint64_t w) {
  spec.validate();
  MacCount total;
  for (BlockConv& bc : block_convs(spec)) {
    apply_same_padding(bc.conv, h, w);
    total += conv_macs(bc.conv, h, w);
    const std::uint64_t nh = bc.conv.out_h(h);
    w = bc.conv.out_w(w);
    h = nh;
  }
  return total;
}

Tensor ConvLayer::forward(const Tensor& input, unsigned threads) const {
  const ConvSpec resolved = with_same_padding(conv, input.shape().h, input.shape().w);
  Tensor out = conv2d_fast(input, weights, resolved, threads);
  activation_inplace(out, act);
  return out;
}

Tensor ConvLayer::forward_ref(const Tensor& input, MacCounter* counter) const {
  const ConvSpec resolved = with_same_padding(conv, input.shape().h, input.shape().w);
  Tensor out = conv2d_ref(input, weights, resolved, counter);
  activation_inplace(out, act);
  return out;
}

ConvLayer make_conv_layer(std::string role, const ConvSpec& conv, Activation act,
                          std::uint64_t seed) {
  conv.validate();
  const std::uint64_t fan_in = conv.c_in / conv.groups * conv.kh * conv.kw;
  const float bound = std::sqrt(3.0f / static_cast<float>(fan_in));
  ConvWeights raw{random_uniform({conv.c_out, conv.c_in / conv.groups, conv.kh, conv.kw}, seed,
                                 -bound, bound),
                  {}};
  const std::vector<float> scale(conv.c_out, 1.0f);
  const std::vector<float> shift(conv.c_out, 0.0f);
  ConvSpec folded = conv;
  folded.has_bias = true;
  return ConvLayer{std::move(role), folded, fold_batchnorm(raw, scale, shift), act};
}

Block::Block(BlockSpec spec, std::vector<ConvLayer> layers)
    : spec_(spec), layers_(std::move(layers)) {}

std::uint64_t Block::param_count() const {
  std::uint64_t n = 0;
  for (const ConvLayer& l : layers_) n += l.weights.weight.size() + l.weights.bias.size();
  return n;
}

Block build_block(const BlockSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<ConvLayer> layers;
  std::uint64_t stream = seed;
  for (const BlockConv& bc : block_convs(spec))
    layers.push_back(make_conv_layer(bc.role, bc.conv, bc.act, splitmix64(stream)));
  return Block(spec, std::move(layers));
}

namespace {

void check_block_input(const Block& block, const Tensor& input) {
  if (input.shape().c != block.spec().c_in)
    throw ShapeError("block " + block.spec().str() + " got input " + input.shape().str());
}

}  // namespace

Tensor forward_block(const Block& block, const Tensor& input, unsigned threads) {
  check_block_input(block, input);
  Tensor x = block.layers().front().forward(input, threads);
  for (std::size_t i = 1; i < block.layers().size(); ++i)
    x = block.layers()[i].forward(x, threads);
  if (block.spec().residual) add_inplace(x, input);
  return x;
}

Tensor forward_block_ref(const Block& block, const Tensor& input, MacCounter* counter) {
  check_block_input(block, input);
  Tensor x = block.layers().front().forward_ref(input, counter);
  for (std::size_t i = 1; i < block.layers().size(); ++i)
    x = block.layers()[i].forward_ref(x, counter);
  if (block.spec().residual) add_inplace(x, input);
  return x;
}

}  // namespace cpubone
