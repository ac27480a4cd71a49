// cpubone: MAC accounting, sweeps, model build/inference, oracle checks and
// table rendering from the command line.
//
// Exit codes: 0 success, 1 verification failure, 2 usage or spec error.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include "CLI11.hpp"
#include "json.hpp"

#include "cpubone/arch.hpp"
#include "cpubone/bench.hpp"
#include "cpubone/oracle.hpp"
#include "cpubone/report.hpp"

#ifndef CPUBONE_DATA_DIR
#define CPUBONE_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace cpubone;

namespace {

constexpr int kOk = 0;
constexpr int kVerifyFailed = 1;
constexpr int kUsage = 2;

fs::path data_dir() { return CPUBONE_DATA_DIR; }

fs::path reference_dir() {
  if (const char* env = std::getenv("CPUBONE_REFERENCE_DIR"); env && *env) return env;
  return data_dir() / "reference";
}

// A bare name falls back to the shipped directory.
// Existing paths win; otherwise look in the shipped directory, with or
// without the file extension.
std::string resolve(const std::string& path, const fs::path& shipped, const char* ext) {
  if (fs::exists(path)) return path;
  for (const fs::path& alt : {shipped / path, shipped / (path + ext)})
    if (fs::exists(alt)) return alt.string();
  return path;
}

struct ModelFlags {
  std::string variant;
  std::string spec_path;
  std::optional<std::uint64_t> groups;
  bool plain_mbconv = false;
  bool kernel3 = false;

  void add(CLI::App* cmd) {
    auto* v = cmd->add_option("--variant", variant, "CPUBone variant: B0, B1, B2 or B3");
    auto* s = cmd->add_option("--spec", spec_path, "model spec JSON");
    v->excludes(s);
    cmd->add_option("--groups-override", groups, "ablation: first-conv groups everywhere");
    cmd->add_flag("--plain-mbconv", plain_mbconv, "ablation: ungrouped MBConv in every stage");
    cmd->add_flag("--kernel3", kernel3, "ablation: 3x3 kernels in every stage");
  }

  bool given() const { return !variant.empty() || !spec_path.empty(); }

  ModelSpec spec() const {
    ModelSpec base = spec_path.empty()
                         ? cpubone_spec(variant)
                         : load_model_spec(resolve(spec_path, data_dir() / "models", ".json"));
    AblationMods mods{groups, plain_mbconv, kernel3};
    return mods.empty() ? base : ablation_spec(base, mods);
  }
};

struct BenchFlags {
  BenchConfig cfg;

  void add(CLI::App* cmd) {
    cmd->add_option("--warmup", cfg.warmup_iters, "warmup iterations")->capture_default_str();
    cmd->add_option("--iters", cfg.measure_iters, "timed iterations per repeat (>= 10)")
        ->capture_default_str();
    cmd->add_option("--repeats", cfg.repeats, "repeats; the median of repeat medians is reported")
        ->capture_default_str();
    cmd->add_option("--threads", cfg.threads, "intra-op threads")->capture_default_str();
  }
};

std::string with_commas(std::uint64_t v) {
  std::string s = std::to_string(v);
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
  return s;
}

// ---------------------------------------------------------------------------

struct MacsCmd {
  ModelFlags model;
  std::string block;
  std::uint64_t c = 64, e = 4, k = 3, g = 2, stride = 1, res = 224;
  bool json = false;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("macs", "per-layer and total MACs of a model or one block");
    model.add(cmd);
    cmd->add_option("--block", block, "block variant: MBConv, GrMBConv, FuMBConv, GrFuMBConv");
    cmd->add_option("--c", c, "block channels")->capture_default_str();
    cmd->add_option("--e", e, "block expansion")->capture_default_str();
    cmd->add_option("--k", k, "block kernel size")->capture_default_str();
    cmd->add_option("--g", g, "block groups")->capture_default_str();
    cmd->add_option("--stride", stride, "block stride")->capture_default_str();
    cmd->add_option("--resolution,--res", res, "input resolution")->capture_default_str();
    cmd->add_flag("--json", json, "machine-readable output");
    cmd->callback([this] { throw CLI::RuntimeError(run()); });
  }

  int run() {
    if (block.empty() == !model.given())
      throw SpecError("macs needs exactly one of --variant, --spec or --block");
    if (!block.empty()) {
      BlockSpec spec;
      spec.variant = block_variant_from_string(block);
      spec.c_in = spec.c_out = c;
      spec.expansion = e;
      spec.kh = spec.kw = k;
      spec.groups = g;
      spec.stride = stride;
      spec.residual = stride == 1;
      const MacCount total = block_macs(spec, res, res);
      if (json) {
        nlohmann::json j{{"block", spec.str()}, {"resolution", res}, {"macs", total.value()}};
        nlohmann::json layers = nlohmann::json::array();
        std::uint64_t h = res, w = res;
        for (BlockConv& bc : block_convs(spec)) {
          apply_same_padding(bc.conv, h, w);
          layers.push_back({{"name", bc.role}, {"macs", conv_macs(bc.conv, h, w).value()}});
          const std::uint64_t nh = bc.conv.out_h(h);
          w = bc.conv.out_w(w);
          h = nh;
        }
        j["layers"] = layers;
        std::cout << j.dump(2) << "\n";
      } else {
        std::cout << spec.str() << " @ " << res << "x" << res << "\n";
        std::cout << "total " << with_commas(total.value()) << " MACs ("
                  << total.millions() << " M)\n";
      }
      return kOk;
    }
    const ModelSpec spec = model.spec();
    const ModelMacs m = model_macs(spec, res, res);
    if (json) {
      nlohmann::json layers = nlohmann::json::array();
      for (const LayerMacs& l : m.layers)
        layers.push_back({{"name", l.name}, {"kind", to_string(l.kind)}, {"macs", l.macs.value()}});
      std::cout << nlohmann::json{{"variant", spec.variant},
                                  {"resolution", res},
                                  {"total", m.total.value()},
                                  {"conv_subtotal", m.conv_subtotal.value()},
                                  {"layers", layers}}
                       .dump(2)
                << "\n";
    } else {
      for (const LayerMacs& l : m.layers)
        std::cout << l.name << "\t" << to_string(l.kind) << "\t" << l.macs.value() << "\n";
      std::cout << "conv subtotal " << with_commas(m.conv_subtotal.value()) << " MACs\n";
      std::cout << "total " << with_commas(m.total.value()) << " MACs (" << m.total.millions()
                << " M) for " << spec.variant << " @ " << res << "x" << res << "\n";
    }
    return kOk;
  }
};

struct SweepCmd {
  std::string grid;
  std::string out;
  BenchFlags bench;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("sweep", "benchmark every point of a sweep grid");
    cmd->add_option("--grid", grid, "grid JSON (bare names resolve to data/grids)")->required();
    cmd->add_option("--out", out, "results CSV (stdout when omitted)");
    bench.add(cmd);
    cmd->callback([this] { throw CLI::RuntimeError(run()); });
  }

  int run() {
    bench.cfg.validate();
    const SweepGrid g = load_grid(resolve(grid, data_dir() / "grids", ".json"));
    const std::vector<BenchResult> results = run_sweep(g, bench.cfg, &std::cerr);
    std::size_t skipped = 0;
    for (const BenchResult& r : results) skipped += r.skipped;
    if (out.empty()) {
      write_results_csv(std::cout, results);
    } else {
      std::ofstream os(out);
      if (!os) throw SpecError("cannot write '" + out + "'");
      write_results_csv(os, results);
    }
    std::cerr << results.size() << " points, " << skipped << " skipped\n";
    return kOk;
  }
};

struct BuildCmd {
  ModelFlags model;
  std::string out;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("build", "resolve a model spec, print its layer plan");
    model.add(cmd);
    cmd->add_option("--out", out, "write the resolved spec as JSON");
    cmd->callback([this] { throw CLI::RuntimeError(run()); });
  }

  int run() {
    if (!model.given()) throw SpecError("build needs --variant or --spec");
    const ModelSpec spec = model.spec();
    std::cout << spec.variant << ": stem " << stem_conv(spec).str() << "\n";
    for (const UnitPlan& u : plan_units(spec)) {
      std::cout << "  " << u.name << "  ";
      if (const auto* b = std::get_if<BlockSpec>(&u.unit))
        std::cout << b->str() << "\n";
      else {
        const auto& a = std::get<AttentionSpec>(u.unit);
        std::cout << "attention{C=" << a.embed_channels << " heads=" << a.heads << "}\n";
      }
    }
    std::cout << "  classifier " << classifier_conv(spec).str() << "\n";
    for (const std::string& v : cpubone_rule_violations(spec))
      std::cout << "note: " << v << "\n";
    const Model m = build_model(spec, 0);
    std::cout << "parameters " << with_commas(m.param_count()) << "\n";
    if (!out.empty()) save_model_spec(spec, out);
    return kOk;
  }
};

struct InferCmd {
  ModelFlags model;
  std::uint64_t res = 224;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool ref = false;
  std::string dump;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("infer", "one forward pass on a seeded random image");
    model.add(cmd);
    cmd->add_option("--resolution,--res", res, "input resolution")->capture_default_str();
    cmd->add_option("--seed", seed, "weight and input seed")->capture_default_str();
    cmd->add_option("--threads", threads, "intra-op threads")->capture_default_str();
    cmd->add_flag("--ref", ref, "use reference kernels and count MACs");
    cmd->add_option("--dump", dump, "write logits as a raw tensor file");
    cmd->callback([this] { throw CLI::RuntimeError(run()); });
  }

  int run() {
    if (!model.given()) throw SpecError("infer needs --variant or --spec");
    if (threads < 1) throw SpecError("threads must be >= 1");
    const ModelSpec spec = model.spec();
    const Model m = build_model(spec, seed);
    const Tensor x = random_uniform({1, 3, res, res}, seed + 1, -1.0f, 1.0f);
    MacCounter counter;
    const auto t0 = std::chrono::steady_clock::now();
    const Tensor y = ref ? forward_model_ref(m, x, &counter) : forward_model(m, x, threads);
    const auto t1 = std::chrono::steady_clock::now();
    bool finite = true;
    for (float v : y.data()) finite = finite && std::isfinite(v);
    std::vector<std::uint64_t> order(y.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t top = std::min<std::size_t>(5, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                      [&](auto a, auto b) { return y.raw()[a] > y.raw()[b]; });
    std::cout << spec.variant << " logits " << y.shape().str() << " in "
              << std::chrono::duration<double, std::milli>(t1 - t0).count() << " ms\n";
    std::cout << "top-" << top << ":";
    for (std::size_t i = 0; i < top; ++i) std::cout << " " << order[i] << "=" << y.raw()[order[i]];
    std::cout << "\n";
    if (ref) {
      const std::uint64_t expected = model_macs(spec, res, res).total.value();
      std::cout << "counted " << with_commas(counter.macs) << " MACs, model_macs "
                << with_commas(expected) << "\n";
      if (counter.macs != expected) return kVerifyFailed;
    }
    if (!dump.empty()) {
      std::ofstream os(dump, std::ios::binary);
      if (!os) throw SpecError("cannot write '" + dump + "'");
      write_raw(os, y);
    }
    if (!finite) {
      std::cout << "non-finite logits\n";
      return kVerifyFailed;
    }
    return kOk;
  }
};

struct OracleCmd {
  std::uint64_t cases = 200;
  std::uint64_t seed = 1;
  bool fault = false;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "check-oracle", "randomized fast-vs-reference and MAC-counter equivalence suite");
    cmd->add_option("--cases", cases, "number of random convolutions")->capture_default_str();
    cmd->add_option("--seed", seed, "case generator seed")->capture_default_str();
    cmd->add_flag("--inject-fault", fault, "corrupt fast-kernel outputs (negative control)");
    cmd->callback([this] { throw CLI::RuntimeError(run()); });
  }

  int run() {
    if (cases < 1) throw SpecError("--cases must be >= 1");
    const OracleReport r = run_oracle_suite(cases, seed, fault);
    std::cout << r.cases << " cases, " << r.failures << " failures\n";
    std::cout << "worst rel err " << r.worst_rel_err << " (tolerance " << kOracleTolerance << ")\n";
    std::cout << "worst group-split err " << r.worst_group_split_err << " (tolerance "
              << kGroupSplitTolerance << ")\n";
    std::cout << "MAC counter mismatches " << r.mac_mismatches << "\n";
    if (!r.passed()) {
      std::cout << "FAILED " << r.first_failure << "\n";
      return kVerifyFailed;
    }
    return kOk;
  }
};

struct ReportCmd {
  std::string results;
  std::string layout = "grouping";
  std::string format = "markdown";
  std::string out;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("report", "render results into a table");
    cmd->add_option("--results", results, "results CSV (bare names resolve to the reference dir)")
        ->required();
    cmd->add_option("--layout", layout, "grouping, depthwise, fused or models")
        ->capture_default_str();
    cmd->add_option("--format", format, "markdown or csv")->capture_default_str();
    cmd->add_option("--out", out, "output file (stdout when omitted)");
    cmd->callback([this] { throw CLI::RuntimeError(run()); });
  }

  int run() {
    const TableLayout l = table_layout_from_string(layout);
    const ReportFormat f = report_format_from_string(format);
    const std::vector<BenchResult> rows = load_results_csv(resolve(results, reference_dir(), ".csv"));
    const std::string text = render(rows, l, f);
    if (out.empty()) {
      std::cout << text;
    } else {
      std::ofstream os(out);
      if (!os) throw SpecError("cannot write '" + out + "'");
      os << text;
    }
    return kOk;
  }
};

struct CompareCmd {
  std::string results;
  std::string reference;
  std::string layout = "grouping";
  bool verbose = false;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "compare", "cell-wise MACpS ratios and winner agreement against a reference table");
    cmd->add_option("--results", results, "measured results CSV")->required();
    cmd->add_option("--reference", reference, "reference CSV (bare names resolve to the "
                                              "reference dir, see CPUBONE_REFERENCE_DIR)")
        ->required();
    cmd->add_option("--layout", layout, "grouping, depthwise or fused")->capture_default_str();
    cmd->add_flag("--verbose", verbose, "print every cell");
    cmd->callback([this] { throw CLI::RuntimeError(run()); });
  }

  int run() {
    const TableLayout l = table_layout_from_string(layout);
    const auto measured = load_results_csv(resolve(results, reference_dir(), ".csv"));
    const auto ref = load_results_csv(resolve(reference, reference_dir(), ".csv"));
    const Comparison c = compare_to_reference(measured, ref, l);
    if (verbose)
      for (const CellComparison& cell : c.cells)
        std::cout << cell.subject_id << "\t" << cell.measured << "\t" << cell.reference << "\t"
                  << cell.ratio << (cell.winner_agrees ? "" : "\twinner differs") << "\n";
    std::cout << c.summary() << "\n";
    std::cout << "(informational: the reference was measured on different hardware)\n";
    return kOk;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cpubone: grouped/fused MBConv MAC calculus, kernels and benchmarks"};
  app.require_subcommand(1);
  MacsCmd macs;
  SweepCmd sweep;
  BuildCmd build;
  InferCmd infer;
  OracleCmd oracle;
  ReportCmd report;
  CompareCmd compare;
  macs.add(app);
  sweep.add(app);
  build.add(app);
  infer.add(app);
  oracle.add(app);
  report.add(app);
  compare.add(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::RuntimeError& done) {
    return done.get_exit_code();
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  } catch (const SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kOk;
}
