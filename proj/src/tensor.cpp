#include "cpubone/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace cpubone {

namespace {

bool mul_overflows(std::uint64_t a, std::uint64_t b, std::uint64_t& out) {
  return __builtin_mul_overflow(a, b, &out);
}

void put_u64_le(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t get_u64_le(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8))
    throw ShapeError("raw tensor stream truncated in header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void Shape4::validate() const {
  if (n == 0 || c == 0 || h == 0 || w == 0)
    throw ShapeError("tensor extents must be >= 1, got " + str());
}

std::uint64_t Shape4::count() const {
  validate();
  std::uint64_t total = 0;
  if (mul_overflows(n, c, total) || mul_overflows(total, h, total) ||
      mul_overflows(total, w, total))
    throw SizeError("element count of " + str() + " overflows 64 bits");
  return total;
}

std::string Shape4::str() const {
  std::ostringstream os;
  os << "(" << n << ", " << c << ", " << h << ", " << w << ")";
  return os.str();
}

Tensor::Tensor(Shape4 shape) : shape_(shape) {
  const std::uint64_t count = shape.count();
  if (count > std::numeric_limits<std::size_t>::max() / sizeof(float))
    throw SizeError("tensor " + shape.str() + " exceeds addressable memory");
  data_.assign(count, 0.0f);
}

Tensor::Tensor(Shape4 shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape.count())
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape.str());
}

Tensor zeros(Shape4 shape) { return Tensor(shape); }

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Xorshift64Star::Xorshift64Star(std::uint64_t seed) {
  std::uint64_t sm = seed;
  state_ = splitmix64(sm);
  if (state_ == 0) state_ = 0x9E3779B97F4A7C15ull;  // xorshift must not start at zero
}

std::uint64_t Xorshift64Star::next() {
  state_ ^= state_ >> 12;
  state_ ^= state_ << 25;
  state_ ^= state_ >> 27;
  return state_ * 0x2545F4914F6CDD1Dull;
}

float Xorshift64Star::next_unit() {
  return static_cast<float>(next() >> 40) * 0x1.0p-24f;
}

Tensor random_uniform(Shape4 shape, std::uint64_t seed, float lo, float hi) {
  if (!(lo < hi)) throw std::invalid_argument("random_uniform requires lo < hi");
  Tensor t(shape);
  Xorshift64Star rng(seed);
  const float span = hi - lo;
  const float top = std::nextafter(hi, lo);
  for (float& v : t.data()) {
    float x = lo + span * rng.next_unit();
    v = x < hi ? x : top;
  }
  return t;
}

float max_rel_err(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError("max_rel_err shape mismatch: " + a.shape().str() + " vs " +
                     b.shape().str());
  constexpr float kEps = 1e-6f;
  float worst = 0.0f;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const float denom = std::max({std::fabs(da[i]), std::fabs(db[i]), kEps});
    const float err = std::fabs(da[i] - db[i]) / denom;
    if (std::isnan(err)) return std::numeric_limits<float>::infinity();
    worst = std::max(worst, err);
  }
  return worst;
}

void write_raw(std::ostream& out, const Tensor& t) {
  const Shape4& s = t.shape();
  put_u64_le(out, s.n);
  put_u64_le(out, s.c);
  put_u64_le(out, s.h);
  put_u64_le(out, s.w);
  for (float v : t.data()) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    unsigned char bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), 4);
  }
}

Tensor read_raw(std::istream& in) {
  Shape4 s;
  s.n = get_u64_le(in);
  s.c = get_u64_le(in);
  s.h = get_u64_le(in);
  s.w = get_u64_le(in);
  Tensor t(s);
  for (float& v : t.data()) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4))
      throw ShapeError("raw tensor stream truncated in payload");
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
    v = std::bit_cast<float>(bits);
  }
  return t;
}

}  // namespace cpubone
