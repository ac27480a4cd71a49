#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cpubone/errors.hpp"

namespace cpubone {

/// Extents of a dense N-C-H-W tensor. All extents are >= 1.
struct Shape4 {
  std::uint64_t n = 1;
  std::uint64_t c = 1;
  std::uint64_t h = 1;
  std::uint64_t w = 1;

  /// Throws SizeError when n*c*h*w overflows 64 bits, ShapeError on a zero extent.
  std::uint64_t count() const;
  void validate() const;

  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

/// Dense float32 tensor, always N-C-H-W, contiguous.
///
/// Linear index of (n, c, h, w) is ((n*C + c)*H + h)*W + w. There are no
/// strides or views: every kernel reads and writes this layout directly, and a
/// grouped convolution's channel slice is a contiguous range of planes.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape4 shape);
  Tensor(Shape4 shape, std::vector<float> data);

  const Shape4& shape() const { return shape_; }
  std::uint64_t size() const { return data_.size(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  float* raw() { return data_.data(); }
  const float* raw() const { return data_.data(); }

  std::uint64_t index(std::uint64_t n, std::uint64_t c, std::uint64_t h,
                      std::uint64_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  float& at(std::uint64_t n, std::uint64_t c, std::uint64_t h, std::uint64_t w) {
    return data_[index(n, c, h, w)];
  }
  float at(std::uint64_t n, std::uint64_t c, std::uint64_t h, std::uint64_t w) const {
    return data_[index(n, c, h, w)];
  }

  // Pointer to the H*W plane of channel c in batch n.
  float* plane(std::uint64_t n, std::uint64_t c) { return raw() + index(n, c, 0, 0); }
  const float* plane(std::uint64_t n, std::uint64_t c) const {
    return raw() + index(n, c, 0, 0);
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape4 shape_;
  std::vector<float> data_;
};

Tensor zeros(Shape4 shape);

/// Uniform fill in [lo, hi) from a splitmix64-seeded xorshift64* stream.
/// The sequence depends only on the seed, never on the platform RNG.
Tensor random_uniform(Shape4 shape, std::uint64_t seed, float lo, float hi);

/// max over elements of |a-b| / max(|a|, |b|, 1e-6).
float max_rel_err(const Tensor& a, const Tensor& b);

// Raw dump: four little-endian u64 extents (n, c, h, w) then little-endian
// f32 data. Used for diffing against other implementations.
void write_raw(std::ostream& out, const Tensor& t);
Tensor read_raw(std::istream& in);

/// Deterministic 64-bit generator shared by tensor init and weight init.
class Xorshift64Star {
 public:
  explicit Xorshift64Star(std::uint64_t seed);
  std::uint64_t next();
  /// Uniform in [0, 1) with 24 bits of resolution.
  float next_unit();

 private:
  std::uint64_t state_;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace cpubone
