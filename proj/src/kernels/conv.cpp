#include <algorithm>
#include <sstream>
#include <thread>
#include <vector>

#include "cpubone/kernels.hpp"

namespace cpubone {

void ConvSpec::validate() const {
  if (c_in == 0 || c_out == 0 || groups == 0)
    throw SpecError("convolution channels and groups must be >= 1: " + str());
  if (c_in % groups != 0 || c_out % groups != 0)
    throw SpecError(
        "Input channel dimension and output channel dimension must both be divisible by "
        "groups: " +
        str());
  if (stride != 1 && stride != 2) throw SpecError("stride must be 1 or 2: " + str());
  if (kh < 1 || kh > 3 || kw < 1 || kw > 3)
    throw SpecError("kernel extents must be in {1,2,3}: " + str());
}

std::uint64_t ConvSpec::out_h(std::uint64_t h) const {
  const std::uint64_t padded = h + pad_top + pad_bottom;
  if (padded < kh) throw ShapeError("input height too small for kernel: " + str());
  return (padded - kh) / stride + 1;
}

std::uint64_t ConvSpec::out_w(std::uint64_t w) const {
  const std::uint64_t padded = w + pad_left + pad_right;
  if (padded < kw) throw ShapeError("input width too small for kernel: " + str());
  return (padded - kw) / stride + 1;
}

std::string ConvSpec::str() const {
  std::ostringstream os;
  os << "conv{c_in=" << c_in << " c_out=" << c_out << " k=" << kh << "x" << kw
     << " stride=" << stride << " pad=(" << pad_top << "," << pad_left << "," << pad_bottom
     << "," << pad_right << ") groups=" << groups << (has_bias ? " bias" : "") << "}";
  return os.str();
}

namespace {

void same_padding_axis(std::uint64_t k, std::uint64_t stride, std::uint64_t extent,
                       std::uint64_t& before, std::uint64_t& after) {
  switch (k) {
    case 1:
      before = after = 0;
      break;
    case 3:
      before = after = 1;
      break;
    case 2:
      before = 0;
      after = (stride == 1 || extent % 2 == 1) ? 1 : 0;
      break;
    default:
      throw SpecError("no same-padding rule for kernel extent " + std::to_string(k));
  }
}

}  // namespace

void apply_same_padding(ConvSpec& spec, std::uint64_t in_h, std::uint64_t in_w) {
  same_padding_axis(spec.kh, spec.stride, in_h, spec.pad_top, spec.pad_bottom);
  same_padding_axis(spec.kw, spec.stride, in_w, spec.pad_left, spec.pad_right);
}

ConvSpec with_same_padding(ConvSpec spec, std::uint64_t in_h, std::uint64_t in_w) {
  apply_same_padding(spec, in_h, in_w);
  return spec;
}

void ConvWeights::check(const ConvSpec& spec) const {
  spec.validate();
  const Shape4 expect{spec.c_out, spec.c_in / spec.groups, spec.kh, spec.kw};
  if (weight.shape() != expect)
    throw ShapeError("weight shape " + weight.shape().str() + " does not match " +
                     spec.str() + ", expected " + expect.str());
  if (spec.has_bias ? bias.size() != spec.c_out : !bias.empty())
    throw ShapeError("bias length " + std::to_string(bias.size()) + " inconsistent with " +
                     spec.str());
}

namespace {

void check_input(const Tensor& input, const ConvSpec& spec) {
  if (input.shape().c != spec.c_in)
    throw ShapeError("input has " + std::to_string(input.shape().c) + " channels, " +
                     spec.str() + " expects " + std::to_string(spec.c_in));
}

// Zero-padded copy of one batch item: (c, h + pt + pb, w + pl + pr).
std::vector<float> padded_copy(const Tensor& input, std::uint64_t n, const ConvSpec& spec,
                               std::uint64_t& ph, std::uint64_t& pw) {
  const Shape4& s = input.shape();
  ph = s.h + spec.pad_top + spec.pad_bottom;
  pw = s.w + spec.pad_left + spec.pad_right;
  std::vector<float> buf(s.c * ph * pw, 0.0f);
  for (std::uint64_t c = 0; c < s.c; ++c) {
    const float* src = input.plane(n, c);
    for (std::uint64_t y = 0; y < s.h; ++y) {
      float* dst = buf.data() + (c * ph + y + spec.pad_top) * pw + spec.pad_left;
      std::copy(src + y * s.w, src + (y + 1) * s.w, dst);
    }
  }
  return buf;
}

}  // namespace

Tensor conv2d_ref(const Tensor& input, const ConvWeights& weights, const ConvSpec& spec,
                  MacCounter* counter) {
  weights.check(spec);
  check_input(input, spec);
  const Shape4& s = input.shape();
  const std::uint64_t oh = spec.out_h(s.h);
  const std::uint64_t ow = spec.out_w(s.w);
  const std::uint64_t cin_g = spec.c_in / spec.groups;
  const std::uint64_t cout_g = spec.c_out / spec.groups;
  Tensor out({s.n, spec.c_out, oh, ow});
  const float* wt = weights.weight.raw();
  std::uint64_t macs = 0;

  for (std::uint64_t n = 0; n < s.n; ++n) {
    std::uint64_t ph = 0, pw = 0;
    const std::vector<float> in = padded_copy(input, n, spec, ph, pw);
    for (std::uint64_t g = 0; g < spec.groups; ++g) {
      for (std::uint64_t oc = g * cout_g; oc < (g + 1) * cout_g; ++oc) {
        for (std::uint64_t y = 0; y < oh; ++y) {
          for (std::uint64_t x = 0; x < ow; ++x) {
            float acc = 0.0f;
            for (std::uint64_t ic = 0; ic < cin_g; ++ic) {
              const std::uint64_t c = g * cin_g + ic;
              for (std::uint64_t ky = 0; ky < spec.kh; ++ky) {
                for (std::uint64_t kx = 0; kx < spec.kw; ++kx) {
                  const float wv = wt[((oc * cin_g + ic) * spec.kh + ky) * spec.kw + kx];
                  const float xv =
                      in[(c * ph + y * spec.stride + ky) * pw + x * spec.stride + kx];
                  acc += wv * xv;
                  ++macs;
                }
              }
            }
            if (spec.has_bias) acc += weights.bias[oc];
            out.at(n, oc, y, x) = acc;
          }
        }
      }
    }
  }
  if (counter) counter->macs += macs;
  return out;
}

ConvWeights fold_batchnorm(const ConvWeights& weights, std::span<const float> scale,
                           std::span<const float> shift) {
  const std::uint64_t c_out = weights.weight.shape().n;
  if (scale.size() != c_out || shift.size() != c_out)
    throw ShapeError("fold_batchnorm: scale/shift length must equal c_out = " +
                     std::to_string(c_out));
  if (!weights.bias.empty() && weights.bias.size() != c_out)
    throw ShapeError("fold_batchnorm: bias length must equal c_out");
  ConvWeights out = weights;
  const std::uint64_t per_filter = weights.weight.size() / c_out;
  float* w = out.weight.raw();
  out.bias.assign(c_out, 0.0f);
  for (std::uint64_t o = 0; o < c_out; ++o) {
    for (std::uint64_t i = 0; i < per_filter; ++i) w[o * per_filter + i] *= scale[o];
    const float old_bias = weights.bias.empty() ? 0.0f : weights.bias[o];
    out.bias[o] = scale[o] * old_bias + shift[o];
  }
  return out;
}

}  // namespace cpubone
