#include "cpubone/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cpubone {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kWeightSeed = 0x5eed0001;
constexpr std::uint64_t kInputSeed = 0x5eed0002;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

BenchResult measured(std::string variant, std::uint64_t channels, std::uint64_t resolution,
                     std::uint64_t kernel, std::uint64_t groups, MacCount macs,
                     const LatencyStats& stats) {
  BenchResult r;
  r.subject_id = subject_id(variant, channels, resolution, kernel, groups);
  r.variant = std::move(variant);
  r.channels = channels;
  r.resolution = resolution;
  r.kernel = kernel;
  r.groups = groups;
  r.macs = macs;
  r.latency_median_ms = stats.median_ms;
  r.latency_mean_ms = stats.mean_ms;
  r.latency_min_ms = stats.min_ms;
  r.latency_stddev_ms = stats.stddev_ms;
  r.macps_mmacs_per_ms = cpubone::macps(macs, stats.median_ms);
  r.timer_warning = stats.timer_warning;
  return r;
}

}  // namespace

void BenchConfig::validate() const {
  if (batch != 1) throw SpecError("batch must be 1 (latency is measured at batch size 1)");
  if (measure_iters < 10) throw SpecError("measure_iters must be >= 10");
  if (repeats < 1) throw SpecError("repeats must be >= 1");
  if (threads < 1) throw SpecError("threads must be >= 1");
}

double timer_resolution_ms() {
  auto best = Clock::duration::max();
  for (int i = 0; i < 64; ++i) {
    const auto t0 = Clock::now();
    auto t1 = Clock::now();
    while (t1 == t0) t1 = Clock::now();
    best = std::min(best, t1 - t0);
  }
  return std::chrono::duration<double, std::milli>(best).count();
}

LatencyStats time_subject(const std::function<void(const Tensor&)>& forward, const Tensor& input,
                          const BenchConfig& cfg) {
  cfg.validate();
  for (std::uint64_t i = 0; i < cfg.warmup_iters; ++i) forward(input);
  std::vector<double> all;
  std::vector<double> medians;
  all.reserve(cfg.repeats * cfg.measure_iters);
  std::vector<double> round(cfg.measure_iters);
  for (std::uint64_t r = 0; r < cfg.repeats; ++r) {
    for (std::uint64_t i = 0; i < cfg.measure_iters; ++i) {
      const auto t0 = Clock::now();
      forward(input);
      const auto t1 = Clock::now();
      round[i] = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    all.insert(all.end(), round.begin(), round.end());
    medians.push_back(median_of(round));
  }
  LatencyStats s;
  s.median_ms = median_of(medians);
  s.min_ms = *std::min_element(all.begin(), all.end());
  double sum = 0;
  for (double v : all) sum += v;
  s.mean_ms = sum / static_cast<double>(all.size());
  double sq = 0;
  for (double v : all) sq += (v - s.mean_ms) * (v - s.mean_ms);
  s.stddev_ms = std::sqrt(sq / static_cast<double>(all.size()));
  s.timer_warning = timer_resolution_ms() > 0.01 * s.median_ms;
  return s;
}

double macps(MacCount macs, double median_ms) {
  return static_cast<double>(macs.value()) / 1e6 / median_ms;
}

std::string subject_id(const std::string& variant, std::uint64_t channels,
                       std::uint64_t resolution, std::uint64_t kernel, std::uint64_t groups) {
  return variant + "_c" + std::to_string(channels) + "_r" + std::to_string(resolution) + "_k" +
         std::to_string(kernel) + "_g" + std::to_string(groups);
}

BenchResult bench_block(const BlockSpec& spec, std::uint64_t h, std::uint64_t w,
                        const BenchConfig& cfg) {
  cfg.validate();
  const MacCount macs = block_macs(spec, h, w);
  const Block block = build_block(spec, kWeightSeed);
  const Tensor input = random_uniform({1, spec.c_in, h, w}, kInputSeed, -1.0f, 1.0f);
  const unsigned threads = cfg.threads;
  const LatencyStats stats = time_subject(
      [&](const Tensor& x) { (void)forward_block(block, x, threads); }, input, cfg);
  return measured(to_string(spec.variant), spec.c_in, h, spec.kh, spec.first_conv_groups(), macs,
                  stats);
}

BenchResult bench_depthwise(std::uint64_t channels, std::uint64_t resolution,
                            std::uint64_t kernel, const BenchConfig& cfg) {
  cfg.validate();
  const ConvSpec conv = with_same_padding(
      ConvSpec{.c_in = channels, .c_out = channels, .kh = kernel, .kw = kernel,
               .groups = channels},
      resolution, resolution);
  const MacCount macs = conv_macs(conv, resolution, resolution);
  const ConvWeights weights{
      random_uniform({channels, 1, kernel, kernel}, kWeightSeed, -1.0f, 1.0f), {}};
  const Tensor input = random_uniform({1, channels, resolution, resolution}, kInputSeed, -1.0f,
                                      1.0f);
  const unsigned threads = cfg.threads;
  const LatencyStats stats = time_subject(
      [&](const Tensor& x) { (void)conv2d_fast(x, weights, conv, threads); }, input, cfg);
  return measured("DWConv", channels, resolution, kernel, channels, macs, stats);
}

BenchResult bench_model(const ModelSpec& spec, std::uint64_t resolution, const BenchConfig& cfg) {
  cfg.validate();
  const MacCount macs = model_macs(spec, resolution, resolution).total;
  const Model model = build_model(spec, kWeightSeed);
  const Tensor input = random_uniform({1, 3, resolution, resolution}, kInputSeed, -1.0f, 1.0f);
  const unsigned threads = cfg.threads;
  const LatencyStats stats = time_subject(
      [&](const Tensor& x) { (void)forward_model(model, x, threads); }, input, cfg);
  BenchResult r = measured(spec.variant, spec.stages.back().channels, resolution, 0, spec.groups,
                           macs, stats);
  r.subject_id = spec.variant + "_r" + std::to_string(resolution);
  return r;
}

namespace {

bool is_known_variant(const std::string& v) {
  return v == "MBConv" || v == "GrMBConv" || v == "FuMBConv" || v == "GrFuMBConv" ||
         v == "DWConv";
}

bool variant_uses_groups(const std::string& v) { return v == "GrMBConv" || v == "GrFuMBConv"; }

}  // namespace

void SweepGrid::validate() const {
  for (const std::string& v : variants)
    if (!is_known_variant(v))
      throw SpecError("grid '" + name + "': unknown variant '" + v +
                      "' (expected MBConv, GrMBConv, FuMBConv, GrFuMBConv or DWConv)");
  auto positive = [this](const std::vector<std::uint64_t>& xs, const char* axis) {
    for (std::uint64_t x : xs)
      if (x == 0) throw SpecError("grid '" + name + "': " + axis + " values must be >= 1");
  };
  positive(channels, "channels");
  positive(resolutions, "resolutions");
  positive(kernels, "kernels");
  positive(groups, "groups");
  if (expansion == 0) throw SpecError("grid '" + name + "': expansion must be >= 1");
  const bool grouped = std::any_of(variants.begin(), variants.end(), variant_uses_groups);
  if (grouped && groups.empty())
    throw SpecError("grid '" + name + "': grouped variants need a groups list");
}

std::vector<SweepPoint> sweep_points(const SweepGrid& grid) {
  grid.validate();
  std::vector<SweepPoint> points;
  for (const std::string& v : grid.variants) {
    const std::vector<std::uint64_t> gs =
        variant_uses_groups(v) ? grid.groups : std::vector<std::uint64_t>{0};
    for (std::uint64_t r : grid.resolutions)
      for (std::uint64_t k : grid.kernels)
        for (std::uint64_t g : gs)
          for (std::uint64_t c : grid.channels) {
            const std::uint64_t groups = v == "DWConv" ? c : (g == 0 ? 1 : g);
            points.push_back({v, c, r, k, groups});
          }
  }
  return points;
}

SweepGrid parse_grid(const std::string& json_text) {
  SweepGrid g;
  try {
    const nlohmann::json j = nlohmann::json::parse(json_text);
    g.name = j.value("name", std::string("grid"));
    g.variants = j.at("variants").get<std::vector<std::string>>();
    g.channels = j.at("channels").get<std::vector<std::uint64_t>>();
    g.resolutions = j.at("resolutions").get<std::vector<std::uint64_t>>();
    g.kernels = j.value("kernels", std::vector<std::uint64_t>{3});
    g.groups = j.value("groups", std::vector<std::uint64_t>{2});
    g.expansion = j.value("expansion", std::uint64_t{4});
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("invalid sweep grid: ") + e.what());
  }
  g.validate();
  return g;
}

SweepGrid load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot read sweep grid '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_grid(ss.str());
}

std::vector<BenchResult> run_sweep(const SweepGrid& grid, const BenchConfig& cfg,
                                   std::ostream* progress) {
  cfg.validate();
  const std::vector<SweepPoint> points = sweep_points(grid);
  std::vector<BenchResult> out;
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const SweepPoint& p = points[i];
    BenchResult r;
    try {
      if (p.variant == "DWConv") {
        r = bench_depthwise(p.channels, p.resolution, p.kernel, cfg);
      } else {
        BlockSpec spec;
        spec.variant = block_variant_from_string(p.variant);
        spec.c_in = spec.c_out = p.channels;
        spec.expansion = grid.expansion;
        spec.kh = spec.kw = p.kernel;
        spec.groups = p.groups;
        spec.residual = true;
        spec.validate();
        r = bench_block(spec, p.resolution, p.resolution, cfg);
      }
    } catch (const SpecError& e) {
      r = BenchResult{};
      r.subject_id = subject_id(p.variant, p.channels, p.resolution, p.kernel, p.groups);
      r.variant = p.variant;
      r.channels = p.channels;
      r.resolution = p.resolution;
      r.kernel = p.kernel;
      r.groups = p.groups;
      r.latency_median_ms = r.latency_mean_ms = r.latency_min_ms = r.latency_stddev_ms = kNaN;
      r.macps_mmacs_per_ms = kNaN;
      r.skipped = true;
      r.skip_reason = e.what();
    }
    if (progress) {
      *progress << "[" << (i + 1) << "/" << points.size() << "] " << r.subject_id;
      if (r.skipped)
        *progress << " skipped: " << r.skip_reason;
      else
        *progress << " median " << r.latency_median_ms << " ms, " << r.macps_mmacs_per_ms
                  << " MMACs/ms" << (r.timer_warning ? " (coarse timer)" : "");
      *progress << "\n";
    }
    out.push_back(std::move(r));
  }
  return out;
}

double group_delta(std::span<const BenchResult> results, const std::string& grouped_variant,
                   const std::string& ungrouped_variant) {
  auto mean_of = [&](const std::string& v) {
    double sum = 0;
    std::size_t n = 0;
    for (const BenchResult& r : results)
      if (r.variant == v && !r.skipped) {
        sum += r.macps_mmacs_per_ms;
        ++n;
      }
    if (n == 0) throw std::invalid_argument("no results for series '" + v + "'");
    return sum / static_cast<double>(n);
  };
  const double grouped = mean_of(grouped_variant);
  const double ungrouped = mean_of(ungrouped_variant);
  return 100.0 * (grouped - ungrouped) / ungrouped;
}

std::string format_delta(double percent) {
  const long whole = static_cast<long>(std::trunc(std::fabs(percent)));
  if (percent < 0) return "-" + std::to_string(whole) + "%";
  if (percent > 0) return "+" + std::to_string(whole) + "%";
  return "0%";
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

const char* const kResultsCsvHeader =
    "subject_id,variant,channels,resolution,kernel,groups,macs,latency_median_ms,"
    "latency_mean_ms,latency_stddev_ms,macps_mmacs_per_ms,skipped,skip_reason";

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw SpecError("unterminated quote in CSV line: " + line);
  fields.push_back(std::move(cur));
  return fields;
}

std::uint64_t parse_u64(const std::string& s, const char* column) {
  if (s.empty()) return 0;
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw SpecError(std::string("bad integer in column ") + column + ": '" + s + "'");
  return v;
}

double parse_double(const std::string& s, const char* column) {
  if (s.empty()) return kNaN;
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw SpecError(std::string("bad number in column ") + column + ": '" + s + "'");
  return v;
}

}  // namespace

void write_results_csv(std::ostream& out, std::span<const BenchResult> results) {
  out << kResultsCsvHeader << "\n";
  for (const BenchResult& r : results) {
    out << csv_field(r.subject_id) << ',' << csv_field(r.variant) << ',' << r.channels << ','
        << r.resolution << ',' << r.kernel << ',' << r.groups << ',' << r.macs.value() << ','
        << csv_number(r.latency_median_ms) << ',' << csv_number(r.latency_mean_ms) << ','
        << csv_number(r.latency_stddev_ms) << ',' << csv_number(r.macps_mmacs_per_ms) << ','
        << (r.skipped ? "true" : "false") << ',' << csv_field(r.skip_reason) << "\n";
  }
}

std::vector<BenchResult> read_results_csv(std::istream& in) {
  std::vector<BenchResult> out;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != kResultsCsvHeader) throw SpecError("unexpected CSV header: " + line);
      header_seen = true;
      continue;
    }
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 13)
      throw SpecError("expected 13 CSV fields, got " + std::to_string(f.size()) + ": " + line);
    BenchResult r;
    r.subject_id = f[0];
    r.variant = f[1];
    r.channels = parse_u64(f[2], "channels");
    r.resolution = parse_u64(f[3], "resolution");
    r.kernel = parse_u64(f[4], "kernel");
    r.groups = parse_u64(f[5], "groups");
    r.macs = MacCount(parse_u64(f[6], "macs"));
    r.latency_median_ms = parse_double(f[7], "latency_median_ms");
    r.latency_mean_ms = parse_double(f[8], "latency_mean_ms");
    r.latency_min_ms = kNaN;
    r.latency_stddev_ms = parse_double(f[9], "latency_stddev_ms");
    r.macps_mmacs_per_ms = parse_double(f[10], "macps_mmacs_per_ms");
    if (f[11] != "true" && f[11] != "false")
      throw SpecError("skipped must be true or false: '" + f[11] + "'");
    r.skipped = f[11] == "true";
    r.skip_reason = f[12];
    out.push_back(std::move(r));
  }
  if (!header_seen) throw SpecError("CSV has no header line");
  return out;
}

std::vector<BenchResult> load_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot read results CSV '" + path + "'");
  return read_results_csv(in);
}

}  // namespace cpubone
