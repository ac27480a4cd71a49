#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpubone/kernels.hpp"
#include "cpubone/mac_model.hpp"

namespace cpubone {

enum class BlockVariant { MBConv, GrMBConv, FuMBConv, GrFuMBConv };

std::string to_string(BlockVariant v);
BlockVariant block_variant_from_string(const std::string& name);
bool is_fused(BlockVariant v);
bool is_grouped(BlockVariant v);

struct BlockSpec {
  BlockVariant variant = BlockVariant::GrFuMBConv;
  std::uint64_t c_in = 64;
  std::uint64_t c_out = 64;
  std::uint64_t expansion = 4;
  std::uint64_t kh = 3;
  std::uint64_t kw = 3;
  std::uint64_t stride = 1;
  std::uint64_t groups = 2;  // first conv only, and only for Gr variants
  bool residual = false;
  Activation act = Activation::Gelu;        // after expansion / depthwise convs
  Activation proj_act = Activation::None;   // after the projection conv

  std::uint64_t mid_channels() const { return expansion * c_in; }
  std::uint64_t first_conv_groups() const { return is_grouped(variant) ? groups : 1; }

  /// Throws SpecError on divisibility violations, residual on a shape
  /// changing block, or unsupported kernel/stride.
  void validate() const;
  std::string str() const;
};

/// One convolution of a block. Padding is left at zero here and resolved
/// against the actual input extent with apply_same_padding.
struct BlockConv {
  std::string role;  // "expand", "depthwise", "project"
  ConvSpec conv;
  Activation act = Activation::None;
};

/// Constituent convolutions in dataflow order: fused variants have two
/// (k x k expansion, 1x1 projection), unfused three (1x1 expansion,
/// k x k depthwise, 1x1 projection). Stride sits on the k x k conv.
std::vector<BlockConv> block_convs(const BlockSpec& spec);

/// Sum of conv_macs over block_convs at an h x w input.
MacCount block_macs(const BlockSpec& spec, std::uint64_t h, std::uint64_t w);

/// Output extent of a block (or any same-padded conv chain) at stride s.
std::uint64_t strided_extent(std::uint64_t extent, std::uint64_t stride);

/// Convolution with weights and the activation applied after it.
struct ConvLayer {
  std::string role;
  ConvSpec conv;
  ConvWeights weights;
  Activation act = Activation::None;

  /// conv + activation, padding resolved for the input's extents.
  Tensor forward(const Tensor& input, unsigned threads) const;
  Tensor forward_ref(const Tensor& input, MacCounter* counter) const;
};

/// Seeded fan-in scaled uniform weights, U(-sqrt(3/fan_in), sqrt(3/fan_in)),
/// then an identity normalization folded in (unit scale, zero shift), so
/// every layer carries a zero bias.
ConvLayer make_conv_layer(std::string role, const ConvSpec& conv, Activation act,
                          std::uint64_t seed);

class Block {
 public:
  Block(BlockSpec spec, std::vector<ConvLayer> layers);

  const BlockSpec& spec() const { return spec_; }
  const std::vector<ConvLayer>& layers() const { return layers_; }
  std::uint64_t param_count() const;

 private:
  BlockSpec spec_;
  std::vector<ConvLayer> layers_;
};

Block build_block(const BlockSpec& spec, std::uint64_t seed);

/// Optimized kernels; residual added when the spec enables it.
Tensor forward_block(const Block& block, const Tensor& input, unsigned threads = 1);

/// Reference kernels with optional MAC instrumentation.
Tensor forward_block_ref(const Block& block, const Tensor& input, MacCounter* counter = nullptr);

}  // namespace cpubone
