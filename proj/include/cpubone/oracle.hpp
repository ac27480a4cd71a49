#pragma once

#include <cstdint>
#include <string>

#include "cpubone/kernels.hpp"

namespace cpubone {

/// One randomized convolution problem at desk sizes (channels <= 64,
/// extents <= 28).
struct ConvCase {
  ConvSpec spec;
  Shape4 input;
  std::uint64_t seed = 0;
};

ConvCase random_conv_case(Xorshift64Star& rng);

/// Grouped convolution computed as `groups` independent ungrouped reference
/// convolutions over channel slices, concatenated.
Tensor conv2d_group_split(const Tensor& input, const ConvWeights& weights, const ConvSpec& spec);

struct OracleReport {
  std::uint64_t cases = 0;
  std::uint64_t failures = 0;
  float worst_rel_err = 0;        // fast vs reference
  float worst_group_split_err = 0;
  std::uint64_t mac_mismatches = 0;
  std::string first_failure;      // spec and input shape of the first failing case

  bool passed() const { return failures == 0; }
};

inline constexpr float kOracleTolerance = 1e-4f;
inline constexpr float kGroupSplitTolerance = 1e-6f;

/// For each case: conv2d_fast vs conv2d_ref, group-split vs conv2d_fast, and
/// the instrumented MAC count vs conv_macs. `inject_fault` corrupts one output
/// element of every fast result (negative control).
OracleReport run_oracle_suite(std::uint64_t cases, std::uint64_t seed, bool inject_fault = false);

}  // namespace cpubone
