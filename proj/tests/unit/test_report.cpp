#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "cpubone/report.hpp"

using namespace cpubone;

namespace {

std::vector<BenchResult> reference(const std::string& name) {
  return load_results_csv(std::string(CPUBONE_DATA_DIR) + "/reference/" + name + ".csv");
}

BenchResult cell(const std::string& v, std::uint64_t c, std::uint64_t k, std::uint64_t g, double m) {
  BenchResult r;
  r.variant = v;
  r.channels = c;
  r.resolution = 7;
  r.kernel = k;
  r.groups = g;
  r.subject_id = subject_id(v, c, 7, k, g);
  r.macps_mmacs_per_ms = m;
  return r;
}

}  // namespace

TEST(Layout, Names) {
  for (TableLayout l : {TableLayout::Grouping, TableLayout::DepthwiseKernel, TableLayout::FusedKernel,
                        TableLayout::ModelMacs})
    EXPECT_EQ(table_layout_from_string(to_string(l)), l);
  EXPECT_THROW(table_layout_from_string("table9"), SpecError);
  EXPECT_EQ(report_format_from_string("csv"), ReportFormat::Csv);
  EXPECT_THROW(report_format_from_string("html"), SpecError);
}

TEST(GroupingTable, Pi5AveragesAndDeltas) {
  const auto rs = reference("grouping_pi5");
  const auto sections = build_table(rs, TableLayout::Grouping);
  ASSERT_EQ(sections.size(), 1u);
  const TableSection& s = sections[0];
  EXPECT_EQ(s.title, "14x14, groups=2");
  EXPECT_EQ(s.columns, (std::vector<std::uint64_t>{32, 64, 128, 256, 512}));
  ASSERT_EQ(s.rows.size(), 4u);
  const double avgs[] = {19.02, 15.80, 36.70, 36.52};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(s.rows[i].avgs[0], avgs[i], 0.05) << s.rows[i].label;
  EXPECT_FALSE(s.rows[0].delta);
  ASSERT_TRUE(s.rows[1].delta);
  EXPECT_EQ(format_delta(*s.rows[1].delta), "-16%");
  EXPECT_EQ(format_delta(*s.rows[3].delta), "-0%");

  const std::string md = render(rs, TableLayout::Grouping, ReportFormat::Markdown);
  EXPECT_NE(md.find("### 14x14, groups=2"), std::string::npos);
  EXPECT_NE(md.find("15.8 (-16%)"), std::string::npos);
  EXPECT_NE(md.find("(-0%)"), std::string::npos);
}

TEST(GroupingTable, AverageMatchesRenderedCells) {
  for (const char* name : {"grouping_pi5", "grouping_pixel4", "grouping_snapdragon8", "grouping_titanrtx"}) {
    const auto rs = reference(name);
    const auto sections = build_table(rs, TableLayout::Grouping);
    for (const TableRow& row : sections[0].rows) {
      double sum = 0;
      for (const BenchResult* c : row.cells) sum += std::round(c->macps_mmacs_per_ms * 10) / 10;
      EXPECT_NEAR(row.avgs[0], sum / row.cells.size(), 0.05) << name << " " << row.label;
    }
  }
}

TEST(GroupingTable, MultipleResolutionsAndGroups) {
  auto g2 = reference("grouping_pi5_resolutions_g2");
  const auto g4 = reference("grouping_pi5_resolutions_g4");
  std::vector<BenchResult> both = g2;
  for (const BenchResult& r : g4)
    if (r.groups == 4) both.push_back(r);
  const auto s2 = build_table(g2, TableLayout::Grouping);
  const auto sb = build_table(both, TableLayout::Grouping);
  EXPECT_EQ(sb.size(), 2 * s2.size());
  EXPECT_EQ(sb[1].groups, 4u);
}

TEST(Table, ReferenceMacsAreExact) {
  for (const char* name : {"grouping_pi5", "fused_kernel_pi5", "grouping_pi5_resolutions_g4"})
    for (const BenchResult& r : reference(name)) {
      BlockSpec b;
      b.variant = block_variant_from_string(r.variant);
      b.c_in = b.c_out = r.channels;
      b.kh = b.kw = r.kernel;
      b.groups = r.groups;
      b.residual = true;
      EXPECT_EQ(r.macs, block_macs(b, r.resolution, r.resolution)) << r.subject_id;
    }
  for (const BenchResult& r : reference("depthwise_kernel_pi5"))
    EXPECT_EQ(r.macs.value(), r.kernel * r.kernel * r.channels * r.resolution * r.resolution);
}

TEST(Table, MissingCellThrows) {
  auto rs = reference("grouping_pi5");
  rs.erase(rs.begin() + 7);
  try {
    build_table(rs, TableLayout::Grouping);
    FAIL() << "expected SpecError";
  } catch (const SpecError& e) {
    EXPECT_NE(std::string(e.what()).find("missing GrMBConv_c128_r14_k3_g2"), std::string::npos);
  }
  EXPECT_THROW(build_table(std::vector<BenchResult>{}, TableLayout::DepthwiseKernel), SpecError);
  EXPECT_THROW(build_table(reference("grouping_pi5"), TableLayout::FusedKernel), SpecError);
  EXPECT_THROW(build_table(std::vector<BenchResult>{}, TableLayout::ModelMacs), SpecError);
}

TEST(Table, TiesBoldBothSides) {
  const std::vector<BenchResult> rs = {cell("DWConv", 128, 3, 128, 0.754), cell("DWConv", 128, 2, 128, 0.751),
                                       cell("DWConv", 256, 3, 256, 0.70), cell("DWConv", 256, 2, 256, 0.80)};
  const TableSection s = build_table(rs, TableLayout::DepthwiseKernel)[0];
  // 0.754 and 0.751 both print as 0.75
  EXPECT_TRUE(s.rows[0].bold[0]);
  EXPECT_TRUE(s.rows[1].bold[0]);
  EXPECT_FALSE(s.rows[0].bold[1]);
  EXPECT_TRUE(s.rows[1].bold[1]);
  const std::string md = render(rs, TableLayout::DepthwiseKernel, ReportFormat::Markdown);
  EXPECT_NE(md.find("| nmk | **0.75** | 0.70 |"), std::string::npos) << md;
}

TEST(Table, FusedLayoutHasTwoHalves) {
  const auto rs = reference("fused_kernel_pi5");
  const auto sections = build_table(rs, TableLayout::FusedKernel);
  ASSERT_FALSE(sections.empty());
  const TableSection& s = sections[0];
  EXPECT_EQ(s.split * 2, s.columns.size());
  for (const TableRow& row : s.rows) {
    EXPECT_EQ(row.avgs.size(), 2u);
    EXPECT_EQ(row.bold.size(), row.cells.size() + 2);
    EXPECT_EQ(row.cells[0]->variant, "FuMBConv");
    EXPECT_EQ(row.cells[s.split]->variant, "GrFuMBConv");
  }
  const std::string md = render(rs, TableLayout::FusedKernel, ReportFormat::Markdown);
  EXPECT_NE(md.find("Fu Avg."), std::string::npos);
  EXPECT_NE(md.find("GrFu Avg."), std::string::npos);
}

TEST(Render, CsvRoundTripAndDeterminism) {
  for (const auto& [name, layout] :
       {std::pair{"grouping_pi5", TableLayout::Grouping}, std::pair{"depthwise_kernel_titanrtx", TableLayout::DepthwiseKernel},
        std::pair{"fused_kernel_titanrtx", TableLayout::FusedKernel}}) {
    const auto rs = reference(name);
    const std::string csv = render(rs, layout, ReportFormat::Csv);
    std::istringstream in(csv);
    const auto back = read_results_csv(in);
    EXPECT_EQ(back.size(), rs.size()) << name;
    EXPECT_EQ(render(back, layout, ReportFormat::Csv), csv) << name;
    EXPECT_EQ(render(back, layout, ReportFormat::Markdown), render(rs, layout, ReportFormat::Markdown));
  }
}

TEST(Render, ModelTable) {
  BenchResult r;
  r.variant = "B0";
  r.subject_id = "B0_r224";
  r.resolution = 224;
  r.macs = MacCount(523778944);
  r.latency_median_ms = 20.0;
  r.macps_mmacs_per_ms = macps(r.macs, 20.0);
  const std::string md = render(std::vector<BenchResult>{r}, TableLayout::ModelMacs, ReportFormat::Markdown);
  EXPECT_NE(md.find("| B0 | 224x224 | 523.8 | 20.00 | 26.2 |"), std::string::npos) << md;
}

TEST(Compare, SelfAndCrossDevice) {
  const auto pi5 = reference("grouping_pi5");
  const Comparison self = compare_to_reference(pi5, pi5, TableLayout::Grouping);
  EXPECT_EQ(self.cells.size(), 20u);
  EXPECT_EQ(self.winner_agreements, 20u);
  for (const CellComparison& c : self.cells) EXPECT_EQ(c.ratio, 1.0);
  EXPECT_NE(self.summary().find("20/20"), std::string::npos);

  const Comparison cross = compare_to_reference(reference("grouping_pixel4"), pi5, TableLayout::Grouping);
  EXPECT_LT(cross.agreement_fraction(), 1.0);
  EXPECT_GT(cross.agreement_fraction(), 0.0);

  EXPECT_THROW(compare_to_reference(pi5, pi5, TableLayout::ModelMacs), SpecError);
  EXPECT_THROW(compare_to_reference(pi5, reference("grouping_pi5_resolutions_g2"), TableLayout::Grouping),
               SpecError);
}
