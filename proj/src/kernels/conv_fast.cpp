#include <algorithm>
#include <thread>
#include <vector>

#include "cpubone/kernels.hpp"

namespace cpubone {

namespace {

constexpr std::uint64_t kRowBlock = 4;

// Rows [m0, m0 + rows) of one tile, rows <= kRowBlock, cols <= GemmTiles::kN.
// Accumulators live in a local block so the compiler keeps them in vector
// registers; each column is an independent lane, reduced over k in order.
template <std::uint64_t Rows>
void micro_kernel(std::uint64_t cols, std::uint64_t k0, std::uint64_t k1, const float* a,
                  std::uint64_t lda, const float* b, std::uint64_t ldb, float* c,
                  std::uint64_t ldc) {
  alignas(64) float acc[Rows][GemmTiles::kN];
  for (std::uint64_t r = 0; r < Rows; ++r)
    for (std::uint64_t j = 0; j < cols; ++j) acc[r][j] = c[r * ldc + j];
  for (std::uint64_t kk = k0; kk < k1; ++kk) {
    const float* brow = b + kk * ldb;
    for (std::uint64_t r = 0; r < Rows; ++r) {
      const float av = a[r * lda + kk];
      float* accr = acc[r];
      for (std::uint64_t j = 0; j < cols; ++j) accr[j] += av * brow[j];
    }
  }
  for (std::uint64_t r = 0; r < Rows; ++r)
    for (std::uint64_t j = 0; j < cols; ++j) c[r * ldc + j] = acc[r][j];
}

void rows_kernel(std::uint64_t rows, std::uint64_t cols, std::uint64_t k0, std::uint64_t k1,
                 const float* a, std::uint64_t lda, const float* b, std::uint64_t ldb, float* c,
                 std::uint64_t ldc) {
  switch (rows) {
    case 4: micro_kernel<4>(cols, k0, k1, a, lda, b, ldb, c, ldc); break;
    case 3: micro_kernel<3>(cols, k0, k1, a, lda, b, ldb, c, ldc); break;
    case 2: micro_kernel<2>(cols, k0, k1, a, lda, b, ldb, c, ldc); break;
    default: micro_kernel<1>(cols, k0, k1, a, lda, b, ldb, c, ldc); break;
  }
}

}  // namespace

void gemm_accumulate(std::uint64_t m, std::uint64_t n, std::uint64_t k, const float* a,
                     std::uint64_t lda, const float* b, std::uint64_t ldb, float* c,
                     std::uint64_t ldc) {
  // k-blocks outermost and ascending: every C element sees its products in
  // index order regardless of the m/n tiling.
  for (std::uint64_t k0 = 0; k0 < k; k0 += GemmTiles::kK) {
    const std::uint64_t k1 = std::min(k, k0 + GemmTiles::kK);
    for (std::uint64_t m0 = 0; m0 < m; m0 += GemmTiles::kM) {
      const std::uint64_t m1 = std::min(m, m0 + GemmTiles::kM);
      for (std::uint64_t n0 = 0; n0 < n; n0 += GemmTiles::kN) {
        const std::uint64_t cols = std::min(n, n0 + GemmTiles::kN) - n0;
        for (std::uint64_t r = m0; r < m1; r += kRowBlock) {
          const std::uint64_t rows = std::min(kRowBlock, m1 - r);
          rows_kernel(rows, cols, k0, k1, a + r * lda, lda, b + n0, ldb, c + r * ldc + n0, ldc);
        }
      }
    }
  }
}

namespace {

// Patch matrix for one group: row (ic, ky, kx), column (oy, ox).
void im2col(const Tensor& input, std::uint64_t n, std::uint64_t c0, std::uint64_t cin_g,
            const ConvSpec& spec, std::uint64_t oh, std::uint64_t ow, std::vector<float>& cols) {
  const Shape4& s = input.shape();
  const std::uint64_t p = oh * ow;
  cols.assign(cin_g * spec.kh * spec.kw * p, 0.0f);
  for (std::uint64_t ic = 0; ic < cin_g; ++ic) {
    const float* src = input.plane(n, c0 + ic);
    for (std::uint64_t ky = 0; ky < spec.kh; ++ky) {
      for (std::uint64_t kx = 0; kx < spec.kw; ++kx) {
        float* row = cols.data() + ((ic * spec.kh + ky) * spec.kw + kx) * p;
        for (std::uint64_t y = 0; y < oh; ++y) {
          const std::int64_t iy = static_cast<std::int64_t>(y * spec.stride + ky) -
                                  static_cast<std::int64_t>(spec.pad_top);
          if (iy < 0 || iy >= static_cast<std::int64_t>(s.h)) continue;
          const float* srow = src + iy * s.w;
          float* drow = row + y * ow;
          for (std::uint64_t x = 0; x < ow; ++x) {
            const std::int64_t ix = static_cast<std::int64_t>(x * spec.stride + kx) -
                                    static_cast<std::int64_t>(spec.pad_left);
            if (ix >= 0 && ix < static_cast<std::int64_t>(s.w)) drow[x] = srow[ix];
          }
        }
      }
    }
  }
}

template <typename Fn>
void parallel_rows(std::uint64_t rows, unsigned threads, Fn&& fn) {
  const std::uint64_t workers = std::max<std::uint64_t>(1, std::min<std::uint64_t>(threads, rows));
  if (workers == 1) {
    fn(0, rows);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::uint64_t chunk = (rows + workers - 1) / workers;
  for (std::uint64_t w = 0; w < workers; ++w) {
    const std::uint64_t r0 = w * chunk;
    const std::uint64_t r1 = std::min(rows, r0 + chunk);
    if (r0 >= r1) break;
    pool.emplace_back([&fn, r0, r1] { fn(r0, r1); });
  }
  for (auto& t : pool) t.join();
}

void depthwise_direct(const Tensor& input, const ConvWeights& weights, const ConvSpec& spec,
                      Tensor& out, unsigned threads) {
  const Shape4& s = input.shape();
  const std::uint64_t oh = out.shape().h;
  const std::uint64_t ow = out.shape().w;
  const std::uint64_t ph = s.h + spec.pad_top + spec.pad_bottom;
  const std::uint64_t pw = s.w + spec.pad_left + spec.pad_right;
  const float* wt = weights.weight.raw();

  for (std::uint64_t n = 0; n < s.n; ++n) {
    parallel_rows(spec.c_out, threads, [&](std::uint64_t c0, std::uint64_t c1) {
      std::vector<float> pad(ph * pw);
      for (std::uint64_t c = c0; c < c1; ++c) {
        std::fill(pad.begin(), pad.end(), 0.0f);
        const float* src = input.plane(n, c);
        for (std::uint64_t y = 0; y < s.h; ++y)
          std::copy(src + y * s.w, src + (y + 1) * s.w,
                    pad.data() + (y + spec.pad_top) * pw + spec.pad_left);
        float* dst = out.plane(n, c);
        std::fill(dst, dst + oh * ow, 0.0f);
        const float* wc = wt + c * spec.kh * spec.kw;
        for (std::uint64_t ky = 0; ky < spec.kh; ++ky) {
          for (std::uint64_t kx = 0; kx < spec.kw; ++kx) {
            const float wv = wc[ky * spec.kw + kx];
            for (std::uint64_t y = 0; y < oh; ++y) {
              const float* prow = pad.data() + (y * spec.stride + ky) * pw + kx;
              float* drow = dst + y * ow;
              if (spec.stride == 1) {
                for (std::uint64_t x = 0; x < ow; ++x) drow[x] += wv * prow[x];
              } else {
                for (std::uint64_t x = 0; x < ow; ++x) drow[x] += wv * prow[x * spec.stride];
              }
            }
          }
        }
        if (spec.has_bias) {
          const float b = weights.bias[c];
          for (std::uint64_t i = 0; i < oh * ow; ++i) dst[i] += b;
        }
      }
    });
  }
}

}  // namespace

Tensor conv2d_fast(const Tensor& input, const ConvWeights& weights, const ConvSpec& spec,
                   unsigned threads) {
  weights.check(spec);
  if (input.shape().c != spec.c_in)
    throw ShapeError("input has " + std::to_string(input.shape().c) + " channels, " +
                     spec.str() + " expects " + std::to_string(spec.c_in));
  const Shape4& s = input.shape();
  const std::uint64_t oh = spec.out_h(s.h);
  const std::uint64_t ow = spec.out_w(s.w);
  Tensor out({s.n, spec.c_out, oh, ow});

  if (spec.is_depthwise()) {
    depthwise_direct(input, weights, spec, out, threads);
    return out;
  }

  const std::uint64_t cin_g = spec.c_in / spec.groups;
  const std::uint64_t cout_g = spec.c_out / spec.groups;
  const std::uint64_t k = cin_g * spec.kh * spec.kw;
  const std::uint64_t p = oh * ow;
  const bool pointwise = spec.kh == 1 && spec.kw == 1 && spec.stride == 1 &&
                         spec.pad_top + spec.pad_left + spec.pad_bottom + spec.pad_right == 0;
  std::vector<float> cols;

  for (std::uint64_t n = 0; n < s.n; ++n) {
    for (std::uint64_t g = 0; g < spec.groups; ++g) {
      const float* b = nullptr;
      if (pointwise) {
        b = input.plane(n, g * cin_g);  // channel planes already form the K x P matrix
      } else {
        im2col(input, n, g * cin_g, cin_g, spec, oh, ow, cols);
        b = cols.data();
      }
      const float* a = weights.weight.raw() + g * cout_g * k;
      float* c = out.plane(n, g * cout_g);
      parallel_rows(cout_g, threads, [&](std::uint64_t r0, std::uint64_t r1) {
        gemm_accumulate(r1 - r0, p, k, a + r0 * k, k, b, p, c + r0 * p, p);
      });
      if (spec.has_bias) {
        for (std::uint64_t o = 0; o < cout_g; ++o) {
          const float bv = weights.bias[g * cout_g + o];
          float* row = c + o * p;
          for (std::uint64_t i = 0; i < p; ++i) row[i] += bv;
        }
      }
    }
  }
  return out;
}

}  // namespace cpubone
