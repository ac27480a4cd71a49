#pragma once

// Exact multiply-accumulate calculus for convolutions, MBConv-family blocks
// and whole models. Everything here is integer arithmetic; ratios are kept
// as reduced fractions so comparisons never involve floating point.
//
// Normalization and activation costs are not counted. Bias adds are not
// counted either: one MAC is one scalar multiply folded into an accumulator.

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "cpubone/errors.hpp"

namespace cpubone {

struct ConvSpec;
struct ModelSpec;

class MacCount {
 public:
  constexpr MacCount() = default;
  constexpr explicit MacCount(std::uint64_t macs) : macs_(macs) {}

  constexpr std::uint64_t value() const { return macs_; }
  double millions() const { return static_cast<double>(macs_) / 1e6; }

  MacCount& operator+=(MacCount other);
  friend MacCount operator+(MacCount a, MacCount b) { return a += b; }
  friend MacCount operator*(MacCount a, std::uint64_t k);

  constexpr auto operator<=>(const MacCount&) const = default;

 private:
  std::uint64_t macs_ = 0;
};

/// Non-negative fraction in lowest terms, denominator > 0.
class Ratio {
 public:
  Ratio(std::uint64_t numerator, std::uint64_t denominator);

  std::uint64_t numerator() const { return num_; }
  std::uint64_t denominator() const { return den_; }
  double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  bool operator==(const Ratio&) const = default;
  bool operator<(const Ratio& other) const;

  std::string str() const;  // "11/20"

 private:
  std::uint64_t num_;
  std::uint64_t den_;
};

Ratio ratio_of(MacCount a, MacCount b);

/// kh * kw * c_in * c_out * h_out * w_out / groups.
/// Throws SpecError unless groups divides both c_in and c_out.
MacCount conv_macs(std::uint64_t kh, std::uint64_t kw, std::uint64_t c_in, std::uint64_t c_out,
                   std::uint64_t h_out, std::uint64_t w_out, std::uint64_t groups);

/// Same, for a concrete spec applied to an h_in x w_in input.
MacCount conv_macs(const ConvSpec& spec, std::uint64_t h_in, std::uint64_t w_in);

/// Fused MBConv, stride 1, c_out == c_in: k x k expansion conv (grouped)
/// into expansion * c_in channels, then 1x1 projection back to c_in.
MacCount fumbconv_macs(std::uint64_t c_in, std::uint64_t expansion, std::uint64_t kh,
                       std::uint64_t kw, std::uint64_t h, std::uint64_t w, std::uint64_t groups);

/// MBConv, stride 1, c_out == c_in: grouped 1x1 expansion, k x k depthwise,
/// 1x1 projection.
MacCount mbconv_macs(std::uint64_t c_in, std::uint64_t expansion, std::uint64_t kh,
                     std::uint64_t kw, std::uint64_t h, std::uint64_t w, std::uint64_t groups);

/// Grouped over ungrouped fused MBConv: (kh*kw/groups + 1) / (kh*kw + 1).
/// Independent of channel count and expansion.
Ratio grouped_fused_ratio(std::uint64_t kh, std::uint64_t kw, std::uint64_t groups,
                          std::uint64_t expansion);

/// GrMBConv (groups = 2) over MBConv at 3x3: (1.5 C + 9) / (2 C + 9).
Ratio grouped_mbconv_ratio(std::uint64_t c_in);

/// 2x2 over 3x3 fused MBConv with the same groups: (4 + groups) / (9 + groups).
Ratio kernel_reduction_ratio_grfused(std::uint64_t groups);

/// Plain convolution kernel-area ratio, e.g. (2,2) vs (3,3) -> 4/9.
Ratio conv_kernel_ratio(std::uint64_t kh, std::uint64_t kw, std::uint64_t base_kh,
                        std::uint64_t base_kw);

enum class LayerKind { Conv, AttentionMatmul, Linear };
std::string to_string(LayerKind kind);

struct LayerMacs {
  std::string name;
  LayerKind kind = LayerKind::Conv;
  MacCount macs;
};

struct ModelMacs {
  std::vector<LayerMacs> layers;
  MacCount total;
  MacCount conv_subtotal;  // LayerKind::Conv entries only
};

/// Layer-by-layer accounting of a model at input_h x input_w: stem, every
/// block convolution, attention convolutions and both attention matrix
/// products (heads * tokens^2 * head_dim each), and the classifier.
ModelMacs model_macs(const ModelSpec& model, std::uint64_t input_h, std::uint64_t input_w);

}  // namespace cpubone
