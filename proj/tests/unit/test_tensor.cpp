#include <cmath>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "cpubone/tensor.hpp"

using namespace cpubone;

TEST(Shape4, CountAndValidation) {
  EXPECT_EQ((Shape4{2, 3, 4, 5}.count()), 120u);
  EXPECT_THROW((Shape4{1, 0, 4, 4}.count()), ShapeError);
  EXPECT_THROW((Shape4{1u << 20, 1u << 20, 1u << 20, 1u << 20}.count()), SizeError);
  EXPECT_EQ((Shape4{1, 2, 3, 4}.str()), "(1, 2, 3, 4)");
}

TEST(Tensor, LayoutIsNchw) {
  Tensor t({2, 3, 4, 5});
  EXPECT_EQ(t.index(1, 2, 3, 4), t.size() - 1);
  EXPECT_EQ(t.index(0, 1, 0, 0), 20u);
  t.at(1, 0, 2, 1) = 7.0f;
  EXPECT_EQ(t.plane(1, 0)[2 * 5 + 1], 7.0f);
}

TEST(Tensor, DataLengthMustMatchShape) {
  EXPECT_THROW(Tensor({1, 1, 2, 2}, std::vector<float>(3)), ShapeError);
  EXPECT_NO_THROW(Tensor({1, 1, 2, 2}, std::vector<float>(4)));
}

TEST(Tensor, ZeroExtentRejected) { EXPECT_THROW(zeros({1, 1, 0, 3}), ShapeError); }

TEST(Rng, SplitmixMatchesPublishedSequence) {
  std::uint64_t s = 0;
  EXPECT_EQ(splitmix64(s), 0xe220a8397b1dcdafull);
  EXPECT_EQ(splitmix64(s), 0x6e789e6aa1b965f4ull);
}

// Frozen from an independent reimplementation of the generator.
TEST(Rng, XorshiftFrozenValues) {
  Xorshift64Star rng(42);
  EXPECT_EQ(rng.next(), 0x31b0ece7c4f697a2ull);
  EXPECT_EQ(rng.next(), 0x9008a3b1cb686f03ull);
  Xorshift64Star again(42);
  again.next();
  again.next();
  EXPECT_FLOAT_EQ(again.next_unit(), 0.48610609769821167f);
  EXPECT_FLOAT_EQ(again.next_unit(), 0.2711055278778076f);
}

TEST(RandomUniform, DeterministicAndInRange) {
  const Tensor a = random_uniform({1, 4, 16, 16}, 7, -2.0f, 3.0f);
  const Tensor b = random_uniform({1, 4, 16, 16}, 7, -2.0f, 3.0f);
  const Tensor c = random_uniform({1, 4, 16, 16}, 8, -2.0f, 3.0f);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  for (float v : a.data()) {
    EXPECT_GE(v, -2.0f);
    EXPECT_LT(v, 3.0f);
  }
  EXPECT_THROW(random_uniform({1, 1, 1, 1}, 0, 1.0f, 1.0f), std::invalid_argument);
}

TEST(RandomUniform, FirstValueFollowsGenerator) {
  const Tensor t = random_uniform({1, 1, 1, 2}, 42, 0.0f, 2.0f);
  EXPECT_FLOAT_EQ(t.data()[0], 2.0f * 0.194105863571167f);
  EXPECT_FLOAT_EQ(t.data()[1], 2.0f * 0.5626317858695984f);
}

TEST(MaxRelErr, Basics) {
  Tensor a({1, 1, 1, 3}, {1.0f, 2.0f, 0.0f});
  Tensor b({1, 1, 1, 3}, {1.0f, 2.2f, 0.0f});
  EXPECT_NEAR(max_rel_err(a, b), 0.2f / 2.2f, 1e-7);
  EXPECT_EQ(max_rel_err(a, a), 0.0f);
  Tensor nan({1, 1, 1, 3}, {1.0f, std::numeric_limits<float>::quiet_NaN(), 0.0f});
  EXPECT_TRUE(std::isinf(max_rel_err(a, nan)));
  EXPECT_THROW(max_rel_err(a, Tensor({1, 1, 3, 1})), ShapeError);
}

TEST(RawIo, RoundTripAndLittleEndianHeader) {
  const Tensor t = random_uniform({1, 2, 3, 4}, 1, -1.0f, 1.0f);
  std::stringstream ss;
  write_raw(ss, t);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 32u + 4u * t.size());
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2);  // c, low byte first
  EXPECT_EQ(read_raw(ss), t);
}

TEST(RawIo, TruncatedStreamThrows) {
  std::stringstream ss;
  write_raw(ss, Tensor({1, 1, 2, 2}));
  std::string cut = ss.str();
  cut.pop_back();
  std::stringstream in(cut);
  EXPECT_THROW(read_raw(in), ShapeError);
}
