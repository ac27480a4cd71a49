#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpubone/tensor.hpp"

namespace cpubone {

/// One 2-D convolution. Padding is explicit per side so even kernels can pad
/// asymmetrically.
struct ConvSpec {
  std::uint64_t c_in = 1;
  std::uint64_t c_out = 1;
  std::uint64_t kh = 1;
  std::uint64_t kw = 1;
  std::uint64_t stride = 1;
  std::uint64_t pad_top = 0;
  std::uint64_t pad_left = 0;
  std::uint64_t pad_bottom = 0;
  std::uint64_t pad_right = 0;
  std::uint64_t groups = 1;
  bool has_bias = false;

  /// Throws SpecError unless groups | c_in, groups | c_out, stride in {1,2}
  /// and kh, kw in {1,2,3}.
  void validate() const;

  std::uint64_t out_h(std::uint64_t h) const;
  std::uint64_t out_w(std::uint64_t w) const;
  bool is_depthwise() const { return groups == c_in && groups == c_out; }

  bool operator==(const ConvSpec&) const = default;
  std::string str() const;
};

/// Padding that keeps output extents at ceil(extent / stride).
///
/// 3x3 pads 1 on every side. 2x2 at stride 1 pads bottom/right by one; at
/// stride 2 it pads nothing for even extents and bottom/right by one for odd
/// extents. 1x1 never pads.
void apply_same_padding(ConvSpec& spec, std::uint64_t in_h, std::uint64_t in_w);
ConvSpec with_same_padding(ConvSpec spec, std::uint64_t in_h, std::uint64_t in_w);

struct ConvWeights {
  Tensor weight;              // (c_out, c_in / groups, kh, kw)
  std::vector<float> bias;    // empty or length c_out

  void check(const ConvSpec& spec) const;
};

/// Counts scalar multiply-accumulates performed by conv2d_ref.
struct MacCounter {
  std::uint64_t macs = 0;
};

/// Direct seven-loop convolution over an explicitly zero-padded copy of the
/// input. Every tap, padded or not, is one multiply-accumulate, so an attached
/// counter ends at the analytical MAC count times the batch size.
Tensor conv2d_ref(const Tensor& input, const ConvWeights& weights, const ConvSpec& spec,
                  MacCounter* counter = nullptr);

/// Optimized convolution. Per group: patch matrix (im2col) then a
/// cache-blocked matrix multiply; depthwise specs use a direct loop instead.
/// Per output element the reduction runs in the same (channel, ky, kx) order
/// as conv2d_ref. threads > 1 splits output channels across workers.
Tensor conv2d_fast(const Tensor& input, const ConvWeights& weights, const ConvSpec& spec,
                   unsigned threads = 1);

/// Folds a per-output-channel affine (scale, shift) into the filters:
/// w'[o] = scale[o] * w[o], b'[o] = scale[o] * b[o] + shift[o].
ConvWeights fold_batchnorm(const ConvWeights& weights, std::span<const float> scale,
                           std::span<const float> shift);

enum class Activation { None, Relu, Gelu };

constexpr float kGeluTanhCoeff = 0.7978845608f;  // sqrt(2 / pi)

float apply_activation(float x, Activation kind);
Tensor activation(const Tensor& input, Activation kind);
void activation_inplace(Tensor& t, Activation kind);
std::string to_string(Activation kind);
Activation activation_from_string(const std::string& name);

/// Pixel replication: each input pixel becomes a factor x factor tile.
Tensor nearest_upsample(const Tensor& input, std::uint64_t factor);

/// Top-left window of the spatial plane, used to trim an upsampled map back
/// to an odd-sized original extent.
Tensor crop_spatial(const Tensor& input, std::uint64_t h, std::uint64_t w);

void add_inplace(Tensor& dst, const Tensor& src);

/// (n, c, h, w) -> (n, c, 1, 1) mean over the plane.
Tensor global_avg_pool(const Tensor& input);

// Matrix core of conv2d_fast, exposed for tests and benchmarking.
// C[m x n] += A[m x k] * B[k x n], all row-major with the given leading dims.
// The k-reduction for each C element runs in ascending order.
void gemm_accumulate(std::uint64_t m, std::uint64_t n, std::uint64_t k, const float* a,
                     std::uint64_t lda, const float* b, std::uint64_t ldb, float* c,
                     std::uint64_t ldc);

/// Tile sizes of the blocked matrix multiply.
struct GemmTiles {
  static constexpr std::uint64_t kM = 64;
  static constexpr std::uint64_t kN = 64;
  static constexpr std::uint64_t kK = 64;
};

}  // namespace cpubone
