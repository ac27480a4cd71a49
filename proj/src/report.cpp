#include "cpubone/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace cpubone {

std::string to_string(TableLayout layout) {
  switch (layout) {
    case TableLayout::Grouping: return "grouping";
    case TableLayout::DepthwiseKernel: return "depthwise";
    case TableLayout::FusedKernel: return "fused";
    case TableLayout::ModelMacs: return "models";
  }
  return "?";
}

TableLayout table_layout_from_string(const std::string& name) {
  if (name == "grouping") return TableLayout::Grouping;
  if (name == "depthwise") return TableLayout::DepthwiseKernel;
  if (name == "fused") return TableLayout::FusedKernel;
  if (name == "models") return TableLayout::ModelMacs;
  throw SpecError("unknown layout '" + name + "' (expected grouping, depthwise, fused or models)");
}

ReportFormat report_format_from_string(const std::string& name) {
  if (name == "markdown" || name == "md") return ReportFormat::Markdown;
  if (name == "csv") return ReportFormat::Csv;
  throw SpecError("unknown format '" + name + "' (expected markdown or csv)");
}

namespace {

int decimals_for(TableLayout layout) {
  return layout == TableLayout::DepthwiseKernel || layout == TableLayout::FusedKernel ? 2 : 1;
}

std::string fixed(double v, int decimals) {
  if (std::isnan(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// Winner comparisons use the value as printed, so a printed tie is a tie.
long long rendered_units(double v, int decimals) {
  return std::llround(v * std::pow(10.0, decimals));
}

class Index {
 public:
  explicit Index(std::span<const BenchResult> results) : results_(results) {}

  const BenchResult* find(const std::string& variant, std::uint64_t c, std::uint64_t r,
                          std::uint64_t k, std::uint64_t g) const {
    for (const BenchResult& x : results_)
      if (x.variant == variant && x.channels == c && x.resolution == r && x.kernel == k &&
          x.groups == g && !x.skipped)
        return &x;
    return nullptr;
  }

  const BenchResult& require(const std::string& variant, std::uint64_t c, std::uint64_t r,
                             std::uint64_t k, std::uint64_t g) const {
    const BenchResult* x = find(variant, c, r, k, g);
    if (!x)
      throw SpecError("results do not cover the layout: missing " +
                      subject_id(variant, c, r, k, g));
    return *x;
  }

  template <typename Pred>
  std::set<std::uint64_t> axis(Pred pred, std::uint64_t BenchResult::*field) const {
    std::set<std::uint64_t> out;
    for (const BenchResult& x : results_)
      if (pred(x)) out.insert(x.*field);
    return out;
  }

 private:
  std::span<const BenchResult> results_;
};

double mean_macps(const std::vector<const BenchResult*>& cells, std::size_t begin,
                  std::size_t end) {
  double sum = 0;
  for (std::size_t i = begin; i < end; ++i) sum += cells[i]->macps_mmacs_per_ms;
  return sum / static_cast<double>(end - begin);
}

// Bold the larger printed value of each pair, both on a tie.
void mark_pair(TableRow& a, TableRow& b, int decimals) {
  auto pick = [&](std::size_t i, double va, double vb) {
    const long long ua = rendered_units(va, decimals);
    const long long ub = rendered_units(vb, decimals);
    a.bold[i] = ua >= ub;
    b.bold[i] = ub >= ua;
  };
  for (std::size_t i = 0; i < a.cells.size(); ++i)
    pick(i, a.cells[i]->macps_mmacs_per_ms, b.cells[i]->macps_mmacs_per_ms);
}

void mark_pair_with_avgs(TableRow& a, TableRow& b, int decimals) {
  mark_pair(a, b, decimals);
  for (std::size_t j = 0; j < a.avgs.size(); ++j) {
    const long long ua = rendered_units(a.avgs[j], decimals);
    const long long ub = rendered_units(b.avgs[j], decimals);
    a.bold[a.cells.size() + j] = ua >= ub;
    b.bold[a.cells.size() + j] = ub >= ua;
  }
}

std::string res_title(std::uint64_t r) { return std::to_string(r) + "x" + std::to_string(r); }

std::set<std::uint64_t> single_kernel(const Index& idx, const std::vector<std::string>& variants,
                                      const char* layout) {
  auto in_layout = [&](const BenchResult& x) {
    return std::find(variants.begin(), variants.end(), x.variant) != variants.end();
  };
  std::set<std::uint64_t> ks = idx.axis(in_layout, &BenchResult::kernel);
  if (ks.size() > 1) throw SpecError(std::string(layout) + " layout needs a single kernel size");
  return ks;
}

std::vector<TableSection> grouping_table(std::span<const BenchResult> results) {
  const Index idx(results);
  const std::vector<std::string> variants = {"MBConv", "GrMBConv", "FuMBConv", "GrFuMBConv"};
  const std::set<std::uint64_t> ks = single_kernel(idx, variants, "grouping");
  if (ks.empty()) throw SpecError("results do not cover the grouping layout: no block rows");
  const std::uint64_t k = *ks.begin();
  for (const std::string& v : variants) {
    auto of_v = [&](const BenchResult& x) { return x.variant == v; };
    if (idx.axis(of_v, &BenchResult::channels).empty())
      throw SpecError("results do not cover the grouping layout: no " + v + " rows");
  }
  auto in_layout = [&](const BenchResult& x) {
    return std::find(variants.begin(), variants.end(), x.variant) != variants.end();
  };
  auto grouped = [](const BenchResult& x) {
    return x.variant == "GrMBConv" || x.variant == "GrFuMBConv";
  };
  const std::set<std::uint64_t> channels = idx.axis(in_layout, &BenchResult::channels);
  const std::set<std::uint64_t> resolutions = idx.axis(in_layout, &BenchResult::resolution);
  const std::set<std::uint64_t> groups = idx.axis(grouped, &BenchResult::groups);

  std::vector<TableSection> out;
  for (std::uint64_t r : resolutions) {
    for (std::uint64_t g : groups) {
      TableSection s;
      s.title = res_title(r) + ", groups=" + std::to_string(g);
      s.resolution = r;
      s.groups = g;
      s.columns.assign(channels.begin(), channels.end());
      s.split = s.columns.size();
      for (const std::string& v : variants) {
        TableRow row;
        row.label = v;
        const std::uint64_t vg = (v == "GrMBConv" || v == "GrFuMBConv") ? g : 1;
        for (std::uint64_t c : channels) row.cells.push_back(&idx.require(v, c, r, k, vg));
        row.avgs = {mean_macps(row.cells, 0, row.cells.size())};
        row.bold.assign(row.cells.size() + 1, false);
        s.rows.push_back(std::move(row));
      }
      for (std::size_t i = 0; i < 4; i += 2) {
        mark_pair(s.rows[i], s.rows[i + 1], 1);
        s.rows[i + 1].delta =
            100.0 * (s.rows[i + 1].avgs[0] - s.rows[i].avgs[0]) / s.rows[i].avgs[0];
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<TableSection> depthwise_table(std::span<const BenchResult> results) {
  const Index idx(results);
  auto dw = [](const BenchResult& x) { return x.variant == "DWConv"; };
  const std::set<std::uint64_t> channels = idx.axis(dw, &BenchResult::channels);
  const std::set<std::uint64_t> resolutions = idx.axis(dw, &BenchResult::resolution);
  if (channels.empty()) throw SpecError("results do not cover the depthwise layout: no DWConv rows");
  std::vector<TableSection> out;
  for (std::uint64_t r : resolutions) {
    TableSection s;
    s.title = res_title(r);
    s.resolution = r;
    s.columns.assign(channels.begin(), channels.end());
    s.split = s.columns.size();
    for (const auto& [label, k] : {std::pair{"nmk", 3}, std::pair{"smk", 2}}) {
      TableRow row;
      row.label = label;
      for (std::uint64_t c : channels)
        row.cells.push_back(&idx.require("DWConv", c, r, static_cast<std::uint64_t>(k), c));
      row.avgs = {mean_macps(row.cells, 0, row.cells.size())};
      row.bold.assign(row.cells.size() + 1, false);
      s.rows.push_back(std::move(row));
    }
    mark_pair_with_avgs(s.rows[0], s.rows[1], 2);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TableSection> fused_table(std::span<const BenchResult> results) {
  const Index idx(results);
  auto fused = [](const BenchResult& x) {
    return x.variant == "FuMBConv" || x.variant == "GrFuMBConv";
  };
  auto grfu = [](const BenchResult& x) { return x.variant == "GrFuMBConv"; };
  auto fu = [](const BenchResult& x) { return x.variant == "FuMBConv"; };
  if (idx.axis(fu, &BenchResult::channels).empty() || idx.axis(grfu, &BenchResult::channels).empty())
    throw SpecError("results do not cover the fused layout: needs FuMBConv and GrFuMBConv rows");
  const std::set<std::uint64_t> channels = idx.axis(fused, &BenchResult::channels);
  const std::set<std::uint64_t> resolutions = idx.axis(fused, &BenchResult::resolution);
  const std::set<std::uint64_t> groups = idx.axis(grfu, &BenchResult::groups);
  std::vector<TableSection> out;
  for (std::uint64_t r : resolutions) {
    for (std::uint64_t g : groups) {
      TableSection s;
      s.title = res_title(r) + ", groups=" + std::to_string(g);
      s.resolution = r;
      s.groups = g;
      s.columns.assign(channels.begin(), channels.end());
      s.columns.insert(s.columns.end(), channels.begin(), channels.end());
      s.split = channels.size();
      for (const auto& [label, k] : {std::pair{"nmk", 3}, std::pair{"smk", 2}}) {
        const auto kk = static_cast<std::uint64_t>(k);
        TableRow row;
        row.label = label;
        for (std::uint64_t c : channels) row.cells.push_back(&idx.require("FuMBConv", c, r, kk, 1));
        for (std::uint64_t c : channels)
          row.cells.push_back(&idx.require("GrFuMBConv", c, r, kk, g));
        row.avgs = {mean_macps(row.cells, 0, s.split),
                    mean_macps(row.cells, s.split, row.cells.size())};
        row.bold.assign(row.cells.size() + 2, false);
        s.rows.push_back(std::move(row));
      }
      mark_pair_with_avgs(s.rows[0], s.rows[1], 2);
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<TableSection> model_table(std::span<const BenchResult> results) {
  TableSection s;
  s.title = "models";
  for (const BenchResult& x : results) {
    if (x.skipped) continue;
    TableRow row;
    row.label = x.variant;
    row.cells = {&x};
    row.bold = {false};
    s.rows.push_back(std::move(row));
  }
  if (s.rows.empty()) throw SpecError("results do not cover the models layout: no rows");
  return {s};
}

std::string cell_text(double v, bool bold, int decimals) {
  const std::string t = fixed(v, decimals);
  return bold ? "**" + t + "**" : t;
}

std::string markdown(const std::vector<TableSection>& sections, TableLayout layout) {
  const int d = decimals_for(layout);
  std::ostringstream os;
  if (layout == TableLayout::ModelMacs) {
    os << "| Model | Resolution | MMACs | Median (ms) | MMACs/ms |\n";
    os << "|---|---:|---:|---:|---:|\n";
    for (const TableRow& row : sections.front().rows) {
      const BenchResult& x = *row.cells.front();
      os << "| " << row.label << " | " << res_title(x.resolution) << " | "
         << fixed(x.macs.millions(), 1) << " | " << fixed(x.latency_median_ms, 2) << " | "
         << fixed(x.macps_mmacs_per_ms, 1) << " |\n";
    }
    return os.str();
  }
  bool first = true;
  for (const TableSection& s : sections) {
    if (!first) os << "\n";
    first = false;
    os << "### " << s.title << "\n\n";
    const char* kind = layout == TableLayout::Grouping ? "Variant" : "Type";
    os << "| " << kind;
    if (layout == TableLayout::FusedKernel) {
      for (std::size_t i = 0; i < s.columns.size(); ++i) {
        if (i == s.split) os << " | Fu Avg.";
        os << " | " << (i < s.split ? "Fu " : "GrFu ") << s.columns[i];
      }
      os << " | GrFu Avg. |\n";
    } else {
      for (std::uint64_t c : s.columns) os << " | " << c;
      os << " | Avg. |\n";
    }
    os << "|---";
    for (std::size_t i = 0; i < s.columns.size() + s.rows.front().avgs.size(); ++i) os << "|---:";
    os << "|\n";
    for (const TableRow& row : s.rows) {
      os << "| " << row.label;
      const std::size_t n = row.cells.size();
      for (std::size_t i = 0; i < n; ++i) {
        if (layout == TableLayout::FusedKernel && i == s.split)
          os << " | " << cell_text(row.avgs[0], row.bold[n], d);
        os << " | " << cell_text(row.cells[i]->macps_mmacs_per_ms, row.bold[i], d);
      }
      const std::size_t last = row.avgs.size() - 1;
      os << " | " << cell_text(row.avgs[last], row.bold[n + last], d);
      if (row.delta) os << " (" << format_delta(*row.delta) << ")";
      os << " |\n";
    }
  }
  return os.str();
}

}  // namespace

std::vector<TableSection> build_table(std::span<const BenchResult> results, TableLayout layout) {
  switch (layout) {
    case TableLayout::Grouping: return grouping_table(results);
    case TableLayout::DepthwiseKernel: return depthwise_table(results);
    case TableLayout::FusedKernel: return fused_table(results);
    case TableLayout::ModelMacs: return model_table(results);
  }
  throw SpecError("unknown layout");
}

std::string render(std::span<const BenchResult> results, TableLayout layout, ReportFormat format) {
  const std::vector<TableSection> sections = build_table(results, layout);
  if (format == ReportFormat::Markdown) return markdown(sections, layout);
  std::vector<BenchResult> rows;
  std::set<const BenchResult*> seen;
  for (const TableSection& s : sections)
    for (const TableRow& row : s.rows)
      for (const BenchResult* x : row.cells)
        if (seen.insert(x).second) rows.push_back(*x);
  std::ostringstream os;
  write_results_csv(os, rows);
  return os.str();
}

std::string Comparison::summary() const {
  std::ostringstream os;
  os << "winner agreement " << winner_agreements << "/" << cells.size();
  if (!cells.empty()) {
    double lo = cells.front().ratio;
    double hi = lo;
    double log_sum = 0;
    for (const CellComparison& c : cells) {
      lo = std::min(lo, c.ratio);
      hi = std::max(hi, c.ratio);
      log_sum += std::log(c.ratio);
    }
    os << " (" << fixed(100.0 * agreement_fraction(), 1) << "%), measured/reference ratio "
       << "min " << fixed(lo, 3) << ", max " << fixed(hi, 3) << ", geomean "
       << fixed(std::exp(log_sum / static_cast<double>(cells.size())), 3);
  }
  return os.str();
}

Comparison compare_to_reference(std::span<const BenchResult> measured,
                            std::span<const BenchResult> reference, TableLayout layout) {
  if (layout == TableLayout::ModelMacs)
    throw SpecError("compare needs a paired layout (grouping, depthwise or fused)");
  const std::vector<TableSection> m = build_table(measured, layout);
  const std::vector<TableSection> r = build_table(reference, layout);
  auto mismatch = [](const std::string& what) {
    throw SpecError("measured and reference grids differ: " + what);
  };
  if (m.size() != r.size()) mismatch("section count");
  Comparison out;
  for (std::size_t s = 0; s < m.size(); ++s) {
    if (m[s].title != r[s].title) mismatch(m[s].title + " vs " + r[s].title);
    if (m[s].columns != r[s].columns) mismatch("columns of " + m[s].title);
    for (std::size_t i = 0; i < m[s].rows.size(); ++i) {
      const TableRow& mr = m[s].rows[i];
      const TableRow& rr = r[s].rows[i];
      for (std::size_t c = 0; c < mr.cells.size(); ++c) {
        CellComparison cell;
        cell.subject_id = mr.cells[c]->subject_id;
        cell.measured = mr.cells[c]->macps_mmacs_per_ms;
        cell.reference = rr.cells[c]->macps_mmacs_per_ms;
        cell.ratio = cell.measured / cell.reference;
        cell.winner_agrees = mr.bold[c] == rr.bold[c];
        out.winner_agreements += cell.winner_agrees;
        out.cells.push_back(std::move(cell));
      }
    }
  }
  return out;
}

}  // namespace cpubone
