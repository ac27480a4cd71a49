#include "cpubone/oracle.hpp"

#include <algorithm>
#include <sstream>

#include "cpubone/mac_model.hpp"

namespace cpubone {

namespace {

std::uint64_t pick(Xorshift64Star& rng, std::uint64_t lo, std::uint64_t hi) {
  return lo + rng.next() % (hi - lo + 1);
}

}  // namespace

ConvCase random_conv_case(Xorshift64Star& rng) {
  ConvCase c;
  ConvSpec& s = c.spec;
  s.kh = pick(rng, 1, 3);
  s.kw = rng.next() % 4 == 0 ? pick(rng, 1, 3) : s.kh;
  s.stride = pick(rng, 1, 2);
  switch (rng.next() % 4) {
    case 0: s.groups = 1; break;
    case 1: s.groups = 2; break;
    case 2: s.groups = 4; break;
    default: s.groups = 0; break;  // depthwise, set below
  }
  if (s.groups == 0) {
    s.c_in = s.c_out = s.groups = pick(rng, 1, 64);
  } else {
    s.c_in = s.groups * pick(rng, 1, 64 / s.groups);
    s.c_out = s.groups * pick(rng, 1, 64 / s.groups);
  }
  s.has_bias = rng.next() % 2 == 0;
  c.input = {pick(rng, 1, 2), s.c_in, pick(rng, 1, 28), pick(rng, 1, 28)};
  if (rng.next() % 2 == 0) {
    apply_same_padding(s, c.input.h, c.input.w);
  } else {
    s.pad_top = pick(rng, 0, s.kh - 1);
    s.pad_bottom = pick(rng, 0, s.kh - 1);
    s.pad_left = pick(rng, 0, s.kw - 1);
    s.pad_right = pick(rng, 0, s.kw - 1);
  }
  // Tiny planes can end up smaller than the kernel; grow them.
  c.input.h = std::max(c.input.h, s.kh);
  c.input.w = std::max(c.input.w, s.kw);
  c.seed = rng.next();
  return c;
}

Tensor conv2d_group_split(const Tensor& input, const ConvWeights& weights, const ConvSpec& spec) {
  spec.validate();
  weights.check(spec);
  const Shape4& in = input.shape();
  const std::uint64_t gi = spec.c_in / spec.groups;
  const std::uint64_t go = spec.c_out / spec.groups;
  ConvSpec sub = spec;
  sub.c_in = gi;
  sub.c_out = go;
  sub.groups = 1;
  const std::uint64_t oh = spec.out_h(in.h);
  const std::uint64_t ow = spec.out_w(in.w);
  Tensor out({in.n, spec.c_out, oh, ow});
  const std::uint64_t wsize = gi * spec.kh * spec.kw;
  for (std::uint64_t g = 0; g < spec.groups; ++g) {
    Tensor x({in.n, gi, in.h, in.w});
    for (std::uint64_t n = 0; n < in.n; ++n)
      std::copy(input.plane(n, g * gi), input.plane(n, g * gi) + gi * in.h * in.w, x.plane(n, 0));
    ConvWeights w{Tensor({go, gi, spec.kh, spec.kw}), {}};
    std::copy(weights.weight.raw() + g * go * wsize, weights.weight.raw() + (g + 1) * go * wsize,
              w.weight.raw());
    if (!weights.bias.empty())
      w.bias.assign(weights.bias.begin() + static_cast<std::ptrdiff_t>(g * go),
                    weights.bias.begin() + static_cast<std::ptrdiff_t>((g + 1) * go));
    const Tensor y = conv2d_ref(x, w, sub);
    for (std::uint64_t n = 0; n < in.n; ++n)
      std::copy(y.plane(n, 0), y.plane(n, 0) + go * oh * ow, out.plane(n, g * go));
  }
  return out;
}

OracleReport run_oracle_suite(std::uint64_t cases, std::uint64_t seed, bool inject_fault) {
  if (cases == 0) throw SpecError("oracle suite needs at least one case");
  OracleReport report;
  Xorshift64Star rng(seed);
  for (std::uint64_t i = 0; i < cases; ++i) {
    const ConvCase c = random_conv_case(rng);
    const ConvSpec& s = c.spec;
    std::uint64_t stream = c.seed;
    const Tensor x = random_uniform(c.input, splitmix64(stream), -1.0f, 1.0f);
    ConvWeights w{random_uniform({s.c_out, s.c_in / s.groups, s.kh, s.kw}, splitmix64(stream),
                                 -1.0f, 1.0f),
                  {}};
    if (s.has_bias) {
      const Tensor b = random_uniform({1, s.c_out, 1, 1}, splitmix64(stream), -1.0f, 1.0f);
      w.bias.assign(b.data().begin(), b.data().end());
    }
    MacCounter counter;
    const Tensor ref = conv2d_ref(x, w, s, &counter);
    Tensor fast = conv2d_fast(x, w, s, 1 + static_cast<unsigned>(i % 3));
    if (inject_fault) fast.raw()[fast.size() / 2] += 1.0f;
    const Tensor split = conv2d_group_split(x, w, s);

    const float err = max_rel_err(fast, ref);
    const float split_err = max_rel_err(split, fast);
    const std::uint64_t expected =
        conv_macs(s, c.input.h, c.input.w).value() * c.input.n;
    report.worst_rel_err = std::max(report.worst_rel_err, err);
    report.worst_group_split_err = std::max(report.worst_group_split_err, split_err);
    const bool mac_ok = counter.macs == expected;
    if (!mac_ok) ++report.mac_mismatches;
    ++report.cases;
    if (err > kOracleTolerance || split_err > kGroupSplitTolerance || !mac_ok) {
      ++report.failures;
      if (report.first_failure.empty()) {
        std::ostringstream os;
        os << "case " << i << ": " << s.str() << " input " << c.input.str() << " rel_err "
           << err << " group_split_err " << split_err << " macs " << counter.macs << " vs "
           << expected;
        report.first_failure = os.str();
      }
    }
  }
  return report;
}

}  // namespace cpubone
