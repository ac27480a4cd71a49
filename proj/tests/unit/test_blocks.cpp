#include <cmath>

#include <gtest/gtest.h>

#include "cpubone/blocks.hpp"
#include "oracles/naive_conv.hpp"

using namespace cpubone;

namespace {

BlockSpec spec_of(BlockVariant v, std::uint64_t c, std::uint64_t k = 3, std::uint64_t g = 2) {
  BlockSpec s;
  s.variant = v;
  s.c_in = s.c_out = c;
  s.kh = s.kw = k;
  s.groups = g;
  s.residual = true;
  return s;
}

const BlockVariant kAll[] = {BlockVariant::MBConv, BlockVariant::GrMBConv, BlockVariant::FuMBConv,
                             BlockVariant::GrFuMBConv};

}  // namespace

TEST(BlockVariant, Names) {
  for (BlockVariant v : kAll) EXPECT_EQ(block_variant_from_string(to_string(v)), v);
  EXPECT_THROW(block_variant_from_string("FusedMBConv"), SpecError);
  EXPECT_TRUE(is_fused(BlockVariant::GrFuMBConv));
  EXPECT_FALSE(is_fused(BlockVariant::GrMBConv));
  EXPECT_TRUE(is_grouped(BlockVariant::GrMBConv));
  EXPECT_FALSE(is_grouped(BlockVariant::FuMBConv));
}

TEST(BlockConvs, Structure) {
  const auto fused = block_convs(spec_of(BlockVariant::GrFuMBConv, 64));
  ASSERT_EQ(fused.size(), 2u);
  EXPECT_EQ(fused[0].conv.kh, 3u);
  EXPECT_EQ(fused[0].conv.groups, 2u);
  EXPECT_EQ(fused[0].conv.c_out, 256u);
  EXPECT_EQ(fused[1].conv.kh, 1u);
  EXPECT_EQ(fused[1].conv.groups, 1u);

  const auto unfused = block_convs(spec_of(BlockVariant::GrMBConv, 64));
  ASSERT_EQ(unfused.size(), 3u);
  EXPECT_EQ(unfused[0].conv.kh, 1u);
  EXPECT_EQ(unfused[0].conv.groups, 2u);
  EXPECT_TRUE(unfused[1].conv.is_depthwise());
  EXPECT_EQ(unfused[2].act, Activation::None);

  // Ungrouped variants ignore the groups field.
  EXPECT_EQ(block_convs(spec_of(BlockVariant::FuMBConv, 64, 3, 4))[0].conv.groups, 1u);
}

TEST(BlockSpec, Validation) {
  EXPECT_THROW(spec_of(BlockVariant::GrFuMBConv, 63).validate(), SpecError);
  EXPECT_NO_THROW(spec_of(BlockVariant::FuMBConv, 63).validate());
  BlockSpec s = spec_of(BlockVariant::MBConv, 32);
  s.stride = 2;
  EXPECT_THROW(s.validate(), SpecError);  // residual on a downsampler
  s.residual = false;
  EXPECT_NO_THROW(s.validate());
  s.expansion = 0;
  EXPECT_THROW(s.validate(), SpecError);
}

TEST(BlockMacs, ClosedFormsAtStrideOne) {
  for (std::uint64_t c : {32, 64, 128, 256, 512})
    for (std::uint64_t k : {2, 3}) {
      EXPECT_EQ(block_macs(spec_of(BlockVariant::GrFuMBConv, c, k), 14, 14).value(),
                oracle::fused_macs(c, 4, k, 196, 2));
      EXPECT_EQ(block_macs(spec_of(BlockVariant::FuMBConv, c, k), 14, 14).value(),
                oracle::fused_macs(c, 4, k, 196, 1));
      EXPECT_EQ(block_macs(spec_of(BlockVariant::GrMBConv, c, k), 14, 14).value(),
                oracle::mbconv_macs(c, 4, k, 196, 2));
      EXPECT_EQ(block_macs(spec_of(BlockVariant::MBConv, c, k), 14, 14).value(),
                oracle::mbconv_macs(c, 4, k, 196, 1));
    }
}

TEST(BlockMacs, FusedGroupingSavesFortyFivePercent) {
  for (std::uint64_t c : {32, 64, 128, 256, 512})
    EXPECT_EQ(ratio_of(block_macs(spec_of(BlockVariant::GrFuMBConv, c), 14, 14),
                       block_macs(spec_of(BlockVariant::FuMBConv, c), 14, 14)),
              Ratio(11, 20));
}

TEST(BlockForward, InstrumentedCountEqualsBlockMacs) {
  for (BlockVariant v : kAll)
    for (std::uint64_t k : {2, 3})
      for (std::uint64_t stride : {1, 2}) {
        BlockSpec s = spec_of(v, 16, k);
        s.stride = stride;
        s.residual = stride == 1;
        if (stride == 2) s.c_out = 32;
        const Block b = build_block(s, 3);
        MacCounter counter;
        const Tensor y = forward_block_ref(b, random_uniform({1, 16, 9, 9}, 1, -1, 1), &counter);
        EXPECT_EQ(counter.macs, block_macs(s, 9, 9).value()) << s.str();
        EXPECT_EQ(y.shape().h, strided_extent(9, stride));
      }
}

TEST(BlockForward, FastEqualsReference) {
  for (BlockVariant v : kAll) {
    const BlockSpec s = spec_of(v, 32);
    const Block b = build_block(s, 5);
    const Tensor x = random_uniform({1, 32, 14, 14}, 6, -1, 1);
    EXPECT_LE(max_rel_err(forward_block(b, x, 2), forward_block_ref(b, x)), 1e-4f) << s.str();
  }
}

TEST(BlockForward, ResidualIsAdded) {
  BlockSpec s = spec_of(BlockVariant::GrFuMBConv, 8);
  const Block with = build_block(s, 1);
  s.residual = false;
  const Block without = build_block(s, 1);
  const Tensor x = random_uniform({1, 8, 5, 5}, 2, -1, 1);
  Tensor expect = forward_block_ref(without, x);
  add_inplace(expect, x);
  EXPECT_EQ(forward_block_ref(with, x), expect);
}

TEST(BlockForward, WrongInputChannelsThrow) {
  const Block b = build_block(spec_of(BlockVariant::MBConv, 8), 1);
  EXPECT_THROW(forward_block(b, Tensor({1, 4, 5, 5})), ShapeError);
}

TEST(BuildBlock, SeededFanInInit) {
  const BlockSpec s = spec_of(BlockVariant::GrFuMBConv, 16);
  const Block a = build_block(s, 9);
  const Block b = build_block(s, 9);
  const Block c = build_block(s, 10);
  EXPECT_EQ(a.layers()[0].weights.weight, b.layers()[0].weights.weight);
  EXPECT_NE(a.layers()[0].weights.weight, c.layers()[0].weights.weight);
  for (const ConvLayer& l : a.layers()) {
    const float bound = std::sqrt(3.0f / (l.conv.c_in / l.conv.groups * l.conv.kh * l.conv.kw));
    for (float w : l.weights.weight.data()) EXPECT_LE(std::fabs(w), bound);
    EXPECT_EQ(l.weights.bias, std::vector<float>(l.conv.c_out, 0.0f));
  }
  // 16*64*9/2 + 64*16 weights, plus 64 + 16 folded biases.
  EXPECT_EQ(a.param_count(), 16u * 64 * 9 / 2 + 64 * 16 + 64 + 16);
}
