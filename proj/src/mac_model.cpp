#include "cpubone/mac_model.hpp"

#include <numeric>

#include "cpubone/kernels.hpp"

namespace cpubone {

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) throw SizeError("MAC count overflows 64 bits");
  return out;
}

void require_positive(std::uint64_t v, const char* what) {
  if (v == 0) throw SpecError(std::string(what) + " must be >= 1");
}

}  // namespace

MacCount& MacCount::operator+=(MacCount other) {
  if (__builtin_add_overflow(macs_, other.macs_, &macs_))
    throw SizeError("MAC count overflows 64 bits");
  return *this;
}

MacCount operator*(MacCount a, std::uint64_t k) { return MacCount(checked_mul(a.macs_, k)); }

Ratio::Ratio(std::uint64_t numerator, std::uint64_t denominator) {
  if (denominator == 0) throw std::invalid_argument("ratio denominator must be > 0");
  const std::uint64_t g = std::gcd(numerator, denominator);
  num_ = numerator / (g == 0 ? 1 : g);
  den_ = denominator / (g == 0 ? 1 : g);
}

bool Ratio::operator<(const Ratio& other) const {
  return static_cast<unsigned __int128>(num_) * other.den_ <
         static_cast<unsigned __int128>(other.num_) * den_;
}

std::string Ratio::str() const { return std::to_string(num_) + "/" + std::to_string(den_); }

Ratio ratio_of(MacCount a, MacCount b) { return Ratio(a.value(), b.value()); }

MacCount conv_macs(std::uint64_t kh, std::uint64_t kw, std::uint64_t c_in, std::uint64_t c_out,
                   std::uint64_t h_out, std::uint64_t w_out, std::uint64_t groups) {
  require_positive(kh, "kernel height");
  require_positive(kw, "kernel width");
  require_positive(c_in, "input channels");
  require_positive(c_out, "output channels");
  require_positive(h_out, "output height");
  require_positive(w_out, "output width");
  require_positive(groups, "groups");
  if (c_in % groups != 0 || c_out % groups != 0)
    throw SpecError("Input channel dimension (" + std::to_string(c_in) +
                    ") and output channel dimension (" + std::to_string(c_out) +
                    ") must both be divisible by groups (" + std::to_string(groups) + ")");
  // Divide before multiplying the spatial terms: c_in / groups is exact.
  std::uint64_t m = checked_mul(kh, kw);
  m = checked_mul(m, c_in / groups);
  m = checked_mul(m, c_out);
  m = checked_mul(m, h_out);
  m = checked_mul(m, w_out);
  return MacCount(m);
}

MacCount conv_macs(const ConvSpec& spec, std::uint64_t h_in, std::uint64_t w_in) {
  spec.validate();
  return conv_macs(spec.kh, spec.kw, spec.c_in, spec.c_out, spec.out_h(h_in), spec.out_w(w_in),
                   spec.groups);
}

MacCount fumbconv_macs(std::uint64_t c_in, std::uint64_t expansion, std::uint64_t kh,
                       std::uint64_t kw, std::uint64_t h, std::uint64_t w, std::uint64_t groups) {
  require_positive(expansion, "expansion");
  const std::uint64_t mid = checked_mul(expansion, c_in);
  return conv_macs(kh, kw, c_in, mid, h, w, groups) + conv_macs(1, 1, mid, c_in, h, w, 1);
}

MacCount mbconv_macs(std::uint64_t c_in, std::uint64_t expansion, std::uint64_t kh,
                     std::uint64_t kw, std::uint64_t h, std::uint64_t w, std::uint64_t groups) {
  require_positive(expansion, "expansion");
  const std::uint64_t mid = checked_mul(expansion, c_in);
  return conv_macs(1, 1, c_in, mid, h, w, groups) + conv_macs(kh, kw, mid, mid, h, w, mid) +
         conv_macs(1, 1, mid, c_in, h, w, 1);
}

Ratio grouped_fused_ratio(std::uint64_t kh, std::uint64_t kw, std::uint64_t groups,
                          std::uint64_t expansion) {
  require_positive(kh, "kernel height");
  require_positive(kw, "kernel width");
  require_positive(groups, "groups");
  require_positive(expansion, "expansion");
  // (area / g + 1) / (area + 1) == (area + g) / (g * (area + 1))
  const std::uint64_t area = kh * kw;
  return Ratio(area + groups, checked_mul(groups, area + 1));
}

Ratio grouped_mbconv_ratio(std::uint64_t c_in) {
  require_positive(c_in, "input channels");
  // (1.5 C + 9) / (2 C + 9), scaled by 2.
  return Ratio(checked_mul(3, c_in) + 18, checked_mul(4, c_in) + 18);
}

Ratio kernel_reduction_ratio_grfused(std::uint64_t groups) {
  require_positive(groups, "groups");
  return Ratio(4 + groups, 9 + groups);
}

Ratio conv_kernel_ratio(std::uint64_t kh, std::uint64_t kw, std::uint64_t base_kh,
                        std::uint64_t base_kw) {
  require_positive(kh, "kernel height");
  require_positive(kw, "kernel width");
  require_positive(base_kh, "base kernel height");
  require_positive(base_kw, "base kernel width");
  return Ratio(kh * kw, base_kh * base_kw);
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::AttentionMatmul: return "attention_matmul";
    case LayerKind::Linear: return "linear";
    case LayerKind::Conv: break;
  }
  return "conv";
}

}  // namespace cpubone
