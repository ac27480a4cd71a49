#include <cmath>
#include <cstdio>

#include <gtest/gtest.h>

#include "cpubone/blocks.hpp"
#include "cpubone/mac_model.hpp"
#include "oracles/naive_conv.hpp"

using namespace cpubone;

TEST(Ratio, ReducesAndCompares) {
  const Ratio r(22, 40);
  EXPECT_EQ(r.numerator(), 11u);
  EXPECT_EQ(r.denominator(), 20u);
  EXPECT_EQ(r.str(), "11/20");
  EXPECT_EQ(Ratio(0, 5), Ratio(0, 1));
  EXPECT_TRUE(Ratio(1, 3) < Ratio(1, 2));
  EXPECT_THROW(Ratio(1, 0), std::invalid_argument);
}

TEST(ConvMacs, Formula) {
  EXPECT_EQ(conv_macs(3, 3, 64, 256, 14, 14, 2).value(), 9ull * 32 * 256 * 196);
  EXPECT_EQ(conv_macs(1, 1, 8, 8, 1, 1, 8).value(), 8u);
}

TEST(ConvMacs, DivisibilityErrorNamesBothDimensions) {
  try {
    conv_macs(3, 3, 63, 252, 14, 14, 2);
    FAIL();
  } catch (const SpecError& e) {
    EXPECT_NE(std::string(e.what()).find("Input channel dimension"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("output channel dimension"), std::string::npos);
  }
  EXPECT_THROW(conv_macs(3, 3, 64, 250, 14, 14, 4), SpecError);
  EXPECT_THROW(conv_macs(0, 3, 64, 64, 14, 14, 1), SpecError);
}

TEST(ConvMacs, OverflowIsReported) {
  EXPECT_THROW(conv_macs(3, 3, 1ull << 30, 1ull << 30, 1ull << 10, 1ull << 10, 1), SizeError);
  MacCount big(~0ull);
  EXPECT_THROW(big += MacCount(1), SizeError);
}

TEST(BlockFormulas, MatchClosedForms) {
  for (std::uint64_t c : {8, 32, 64, 128, 512})
    for (std::uint64_t k : {2, 3})
      for (std::uint64_t g : {1, 2, 4})
        for (std::uint64_t r : {7, 14}) {
          EXPECT_EQ(fumbconv_macs(c, 4, k, k, r, r, g).value(), oracle::fused_macs(c, 4, k, r * r, g));
          EXPECT_EQ(mbconv_macs(c, 4, k, k, r, r, g).value(), oracle::mbconv_macs(c, 4, k, r * r, g));
        }
}

TEST(BlockFormulas, Examples) {
  EXPECT_EQ(fumbconv_macs(64, 4, 3, 3, 14, 14, 2).value(), 17661952u);
  EXPECT_EQ(ratio_of(fumbconv_macs(128, 4, 3, 3, 14, 14, 2), fumbconv_macs(128, 4, 3, 3, 14, 14, 1)),
            Ratio(11, 20));
}

TEST(Ratios, GroupedFused) {
  EXPECT_EQ(grouped_fused_ratio(3, 3, 2, 4), Ratio(11, 20));
  EXPECT_EQ(grouped_fused_ratio(3, 3, 1, 4), Ratio(1, 1));
  EXPECT_EQ(grouped_fused_ratio(2, 2, 2, 4), Ratio(3, 5));
  EXPECT_THROW(grouped_fused_ratio(3, 3, 0, 4), SpecError);
}

TEST(Ratios, GroupedFusedIndependentOfChannelsAndExpansion) {
  for (std::uint64_t k : {1, 2, 3})
    for (std::uint64_t g : {1, 2, 4})
      for (std::uint64_t c : {16, 64, 256})
        for (std::uint64_t e : {1, 4, 6})
          EXPECT_EQ(ratio_of(fumbconv_macs(c, e, k, k, 7, 7, g), fumbconv_macs(c, e, k, k, 7, 7, 1)),
                    grouped_fused_ratio(k, k, g, e));
}

TEST(Ratios, KernelReduction) {
  EXPECT_EQ(kernel_reduction_ratio_grfused(1), Ratio(1, 2));
  EXPECT_EQ(kernel_reduction_ratio_grfused(2), Ratio(6, 11));
  EXPECT_EQ(conv_kernel_ratio(2, 2, 3, 3), Ratio(4, 9));
  for (std::uint64_t g : {1, 2, 4, 8})
    EXPECT_EQ(ratio_of(fumbconv_macs(64, 4, 2, 2, 14, 14, g), fumbconv_macs(64, 4, 3, 3, 14, 14, g)),
              kernel_reduction_ratio_grfused(g));
}

TEST(Ratios, GroupedMbconvListAndMean) {
  const std::uint64_t cs[] = {32, 64, 128, 256, 512};
  const char* want[] = {"78.1", "76.6", "75.8", "75.4", "75.2"};
  double sum = 0;
  for (int i = 0; i < 5; ++i) {
    const Ratio r = grouped_mbconv_ratio(cs[i]);
    EXPECT_EQ(r, ratio_of(mbconv_macs(cs[i], 4, 3, 3, 14, 14, 2), mbconv_macs(cs[i], 4, 3, 3, 14, 14, 1)));
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * r.value());
    EXPECT_STREQ(buf, want[i]);
    sum += 100.0 * r.value();
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f", sum / 5);
  EXPECT_STREQ(buf, "76.2");
}

TEST(Ratios, GroupedMbconvApproachesThreeQuarters) {
  Ratio prev = grouped_mbconv_ratio(1);
  for (std::uint64_t c = 2; c < 2048; c *= 2) {
    const Ratio r = grouped_mbconv_ratio(c);
    EXPECT_TRUE(r < prev);
    EXPECT_TRUE(Ratio(3, 4) < r);
    prev = r;
  }
}

TEST(LayerKind, Names) {
  EXPECT_EQ(to_string(LayerKind::Conv), "conv");
  EXPECT_EQ(to_string(LayerKind::AttentionMatmul), "attention_matmul");
  EXPECT_EQ(to_string(LayerKind::Linear), "linear");
}
