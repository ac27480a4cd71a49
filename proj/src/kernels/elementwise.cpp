#include <algorithm>
#include <cmath>

#include "cpubone/kernels.hpp"

namespace cpubone {

float apply_activation(float x, Activation kind) {
  switch (kind) {
    case Activation::Relu:
      return x > 0.0f ? x : 0.0f;
    case Activation::Gelu: {
      const float inner = kGeluTanhCoeff * (x + 0.044715f * x * x * x);
      return 0.5f * x * (1.0f + std::tanh(inner));
    }
    case Activation::None:
      break;
  }
  return x;
}

void activation_inplace(Tensor& t, Activation kind) {
  if (kind == Activation::None) return;
  for (float& v : t.data()) v = apply_activation(v, kind);
}

Tensor activation(const Tensor& input, Activation kind) {
  Tensor out = input;
  activation_inplace(out, kind);
  return out;
}

std::string to_string(Activation kind) {
  switch (kind) {
    case Activation::Relu: return "relu";
    case Activation::Gelu: return "gelu";
    case Activation::None: break;
  }
  return "none";
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "gelu") return Activation::Gelu;
  if (name == "none") return Activation::None;
  throw SpecError("unknown activation '" + name + "' (expected relu, gelu or none)");
}

Tensor nearest_upsample(const Tensor& input, std::uint64_t factor) {
  if (factor < 1) throw SpecError("upsample factor must be >= 1");
  const Shape4& s = input.shape();
  Tensor out({s.n, s.c, s.h * factor, s.w * factor});
  const std::uint64_t ow = s.w * factor;
  for (std::uint64_t n = 0; n < s.n; ++n) {
    for (std::uint64_t c = 0; c < s.c; ++c) {
      const float* src = input.plane(n, c);
      float* dst = out.plane(n, c);
      for (std::uint64_t y = 0; y < s.h * factor; ++y) {
        const float* srow = src + (y / factor) * s.w;
        float* drow = dst + y * ow;
        for (std::uint64_t x = 0; x < ow; ++x) drow[x] = srow[x / factor];
      }
    }
  }
  return out;
}

Tensor crop_spatial(const Tensor& input, std::uint64_t h, std::uint64_t w) {
  const Shape4& s = input.shape();
  if (h > s.h || w > s.w)
    throw ShapeError("crop " + std::to_string(h) + "x" + std::to_string(w) +
                     " larger than input " + s.str());
  if (h == s.h && w == s.w) return input;
  Tensor out({s.n, s.c, h, w});
  for (std::uint64_t n = 0; n < s.n; ++n)
    for (std::uint64_t c = 0; c < s.c; ++c)
      for (std::uint64_t y = 0; y < h; ++y) {
        const float* src = input.plane(n, c) + y * s.w;
        std::copy(src, src + w, out.plane(n, c) + y * w);
      }
  return out;
}

void add_inplace(Tensor& dst, const Tensor& src) {
  if (dst.shape() != src.shape())
    throw ShapeError("add: shape mismatch " + dst.shape().str() + " vs " + src.shape().str());
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

Tensor global_avg_pool(const Tensor& input) {
  const Shape4& s = input.shape();
  Tensor out({s.n, s.c, 1, 1});
  const std::uint64_t hw = s.h * s.w;
  for (std::uint64_t n = 0; n < s.n; ++n)
    for (std::uint64_t c = 0; c < s.c; ++c) {
      const float* p = input.plane(n, c);
      double sum = 0.0;
      for (std::uint64_t i = 0; i < hw; ++i) sum += p[i];
      out.at(n, c, 0, 0) = static_cast<float>(sum / static_cast<double>(hw));
    }
  return out;
}

}  // namespace cpubone
