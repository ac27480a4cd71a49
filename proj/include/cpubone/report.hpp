#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpubone/bench.hpp"

namespace cpubone {

enum class TableLayout { Grouping, DepthwiseKernel, FusedKernel, ModelMacs };
enum class ReportFormat { Markdown, Csv };

std::string to_string(TableLayout layout);
TableLayout table_layout_from_string(const std::string& name);  // grouping, depthwise, fused, models
ReportFormat report_format_from_string(const std::string& name);  // markdown, csv

struct TableRow {
  std::string label;  // variant, or nmk / smk
  std::vector<const BenchResult*> cells;
  std::vector<double> avgs;     // one per column half; none for ModelMacs
  std::optional<double> delta;  // grouped rows of the Grouping layout
  std::vector<bool> bold;       // per cell, then per average
};

/// One block of rows sharing a resolution (and groups value). The fused
/// kernel layout splits its columns into an ungrouped half and a grouped half
/// (`columns` lists both halves in order, `split` is the first grouped index).
struct TableSection {
  std::string title;
  std::uint64_t resolution = 0;
  std::uint64_t groups = 0;
  std::vector<std::uint64_t> columns;
  std::size_t split = 0;
  std::vector<TableRow> rows;
};

/// Groups results into the layout's sections. Throws SpecError when a row is
/// missing a cell the layout requires.
std::vector<TableSection> build_table(std::span<const BenchResult> results, TableLayout layout);

/// Markdown: MACpS at 1 decimal (2 for the kernel tables), bold winners per
/// cell pair, ties bold on both sides. CSV: the rows the layout uses, in
/// layout order, in the results CSV schema.
std::string render(std::span<const BenchResult> results, TableLayout layout, ReportFormat format);

struct CellComparison {
  std::string subject_id;
  double measured = 0;
  double reference = 0;
  double ratio = 0;
  bool winner_agrees = false;
};

struct Comparison {
  std::vector<CellComparison> cells;
  std::size_t winner_agreements = 0;

  double agreement_fraction() const {
    return cells.empty() ? 0.0 : static_cast<double>(winner_agreements) / cells.size();
  }
  std::string summary() const;
};

/// Cell-wise MACpS ratio measured / reference and whether each cell's bold
/// status matches. Informational: different hardware. Throws SpecError when
/// the two sets do not cover the same cells.
Comparison compare_to_reference(std::span<const BenchResult> measured,
                            std::span<const BenchResult> reference, TableLayout layout);

}  // namespace cpubone
