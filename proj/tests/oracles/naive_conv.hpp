#pragma once

// Independent reference for tests: a plain double-precision convolution that
// handles padding by bounds checks instead of a padded copy, plus closed-form
// MAC counts written straight from the block definitions.

#include <cstdint>
#include <vector>

#include "cpubone/kernels.hpp"

namespace oracle {

inline cpubone::Tensor naive_conv(const cpubone::Tensor& x, const cpubone::ConvWeights& w,
                                  const cpubone::ConvSpec& s) {
  const auto& in = x.shape();
  const std::int64_t oh = (static_cast<std::int64_t>(in.h + s.pad_top + s.pad_bottom) -
                           static_cast<std::int64_t>(s.kh)) / static_cast<std::int64_t>(s.stride) + 1;
  const std::int64_t ow = (static_cast<std::int64_t>(in.w + s.pad_left + s.pad_right) -
                           static_cast<std::int64_t>(s.kw)) / static_cast<std::int64_t>(s.stride) + 1;
  cpubone::Tensor y({in.n, s.c_out, static_cast<std::uint64_t>(oh), static_cast<std::uint64_t>(ow)});
  const std::uint64_t cig = s.c_in / s.groups;
  const std::uint64_t cog = s.c_out / s.groups;
  for (std::uint64_t n = 0; n < in.n; ++n)
    for (std::uint64_t o = 0; o < s.c_out; ++o) {
      const std::uint64_t g = o / cog;
      for (std::int64_t oy = 0; oy < oh; ++oy)
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          double acc = w.bias.empty() ? 0.0 : w.bias[o];
          for (std::uint64_t i = 0; i < cig; ++i)
            for (std::uint64_t ky = 0; ky < s.kh; ++ky)
              for (std::uint64_t kx = 0; kx < s.kw; ++kx) {
                const std::int64_t iy = oy * static_cast<std::int64_t>(s.stride) +
                                        static_cast<std::int64_t>(ky) -
                                        static_cast<std::int64_t>(s.pad_top);
                const std::int64_t ix = ox * static_cast<std::int64_t>(s.stride) +
                                        static_cast<std::int64_t>(kx) -
                                        static_cast<std::int64_t>(s.pad_left);
                if (iy < 0 || ix < 0 || iy >= static_cast<std::int64_t>(in.h) ||
                    ix >= static_cast<std::int64_t>(in.w))
                  continue;
                acc += static_cast<double>(w.weight.at(o, i, ky, kx)) *
                       x.at(n, g * cig + i, static_cast<std::uint64_t>(iy),
                            static_cast<std::uint64_t>(ix));
              }
          y.at(n, o, static_cast<std::uint64_t>(oy), static_cast<std::uint64_t>(ox)) =
              static_cast<float>(acc);
        }
    }
  return y;
}

// Fused MBConv, stride 1: e*c^2*hw*(k^2/g + 1), evaluated as integers with
// the division applied to the channel factor.
inline std::uint64_t fused_macs(std::uint64_t c, std::uint64_t e, std::uint64_t k,
                                std::uint64_t hw, std::uint64_t g) {
  return e * c * hw * (k * k * (c / g) + c);
}

// MBConv, stride 1: e*c*hw*(c/g + k^2 + c).
inline std::uint64_t mbconv_macs(std::uint64_t c, std::uint64_t e, std::uint64_t k,
                                 std::uint64_t hw, std::uint64_t g) {
  return e * c * hw * (c / g + k * k + c);
}

}  // namespace oracle
