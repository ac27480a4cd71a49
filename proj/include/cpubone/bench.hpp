#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cpubone/arch.hpp"
#include "cpubone/blocks.hpp"

namespace cpubone {

struct BenchConfig {
  std::uint64_t warmup_iters = 20;
  std::uint64_t measure_iters = 100;
  std::uint64_t repeats = 5;
  unsigned threads = 1;
  std::uint64_t batch = 1;

  /// Throws SpecError unless batch == 1, measure_iters >= 10, repeats >= 1
  /// and threads >= 1.
  void validate() const;
};

struct LatencyStats {
  double median_ms = 0;  // median of per-repeat medians
  double mean_ms = 0;    // over every measured iteration
  double min_ms = 0;
  double stddev_ms = 0;
  bool timer_warning = false;  // clock resolution coarser than 1% of the median
};

/// Times `forward(input)`: warmups, then `repeats` rounds of `measure_iters`
/// timed calls on the steady clock.
LatencyStats time_subject(const std::function<void(const Tensor&)>& forward, const Tensor& input,
                          const BenchConfig& cfg);

/// Smallest observable tick of the steady clock, in milliseconds.
double timer_resolution_ms();

struct BenchResult {
  std::string subject_id;
  std::string variant;
  std::uint64_t channels = 0;
  std::uint64_t resolution = 0;
  std::uint64_t kernel = 0;
  std::uint64_t groups = 1;
  MacCount macs;
  // NaN when not measured (skipped points, transcribed reference rows).
  double latency_median_ms = 0;
  double latency_mean_ms = 0;
  double latency_min_ms = 0;
  double latency_stddev_ms = 0;
  double macps_mmacs_per_ms = 0;
  bool skipped = false;
  std::string skip_reason;
  bool timer_warning = false;
};

/// (macs / 1e6) / median_ms. Every emitted result carries exactly this value.
double macps(MacCount macs, double median_ms);

/// "GrFuMBConv_c64_r14_k3_g2"
std::string subject_id(const std::string& variant, std::uint64_t channels,
                       std::uint64_t resolution, std::uint64_t kernel, std::uint64_t groups);

/// Block at h x w with residual when shape-preserving. Weights and input are
/// seeded, so the work is identical between runs.
BenchResult bench_block(const BlockSpec& spec, std::uint64_t h, std::uint64_t w,
                        const BenchConfig& cfg);

/// Stride-1 depthwise k x k convolution over `channels` at res x res.
BenchResult bench_depthwise(std::uint64_t channels, std::uint64_t resolution,
                            std::uint64_t kernel, const BenchConfig& cfg);

BenchResult bench_model(const ModelSpec& spec, std::uint64_t resolution, const BenchConfig& cfg);

/// Sweep axes. Ungrouped variants (MBConv, FuMBConv, DWConv) ignore `groups`
/// and appear once per (resolution, kernel, channel).
struct SweepGrid {
  std::string name;
  std::vector<std::string> variants;
  std::vector<std::uint64_t> channels;
  std::vector<std::uint64_t> resolutions;
  std::vector<std::uint64_t> kernels;
  std::vector<std::uint64_t> groups;
  std::uint64_t expansion = 4;

  void validate() const;
};

struct SweepPoint {
  std::string variant;
  std::uint64_t channels;
  std::uint64_t resolution;
  std::uint64_t kernel;
  std::uint64_t groups;
};

/// Points in variant, resolution, kernel, groups, channel order.
std::vector<SweepPoint> sweep_points(const SweepGrid& grid);

SweepGrid load_grid(const std::string& path);
SweepGrid parse_grid(const std::string& json_text);

/// One result per point. Divisibility violations become skipped results.
/// Progress lines go to `progress` when non-null.
std::vector<BenchResult> run_sweep(const SweepGrid& grid, const BenchConfig& cfg,
                                   std::ostream* progress = nullptr);

/// Percent change of mean MACpS, grouped vs ungrouped, over the non-skipped
/// rows of each variant. Throws std::invalid_argument on a missing series.
double group_delta(std::span<const BenchResult> results, const std::string& grouped_variant,
                   const std::string& ungrouped_variant);

/// Integer-percent label, truncated toward zero with the sign kept:
/// -16.9 -> "-16%", -0.5 -> "-0%", 5.2 -> "+5%", 0 -> "0%".
std::string format_delta(double percent);

extern const char* const kResultsCsvHeader;

void write_results_csv(std::ostream& out, std::span<const BenchResult> results);
/// Accepts '#' comment lines and empty numeric fields (read as NaN).
std::vector<BenchResult> read_results_csv(std::istream& in);
std::vector<BenchResult> load_results_csv(const std::string& path);

}  // namespace cpubone
