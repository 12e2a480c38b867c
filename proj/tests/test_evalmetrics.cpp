#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "nbm/evalmetrics.hpp"

using namespace nbm;

namespace {

struct ExprField {
  expr::Expression e;
  double value(const Vec3& p) const { return e.evaluate(p); }
};

ProblemSpec problem() {
  ProblemSpec p;
  p.level_set = LevelSet::analytic("sqrt(x^2+y^2+z^2)-0.5");
  return p;
}

}  // namespace

TEST(EvalMetrics, ExactFieldHasZeroError) {
  const auto em = expr::parse("exp(z)");
  const auto ep = expr::parse("cos(x)*sin(y)");
  const auto pb = problem();
  struct Piecewise {
    const ProblemSpec& p;
    const expr::Expression& em;
    const expr::Expression& ep;
    double value(const Vec3& x) const { return p.level_set.side(x) == Side::Minus ? em(x) : ep(x); }
  } field{pb, em, ep};
  const auto n = evaluate_errors(field, pb, em, ep, 8);
  EXPECT_EQ(n.rmse, 0.0);
  EXPECT_EQ(n.linf, 0.0);
}

TEST(EvalMetrics, ConstantOffsetError) {
  const auto zero = expr::parse("0");
  const ExprField f{expr::parse("0.25")};
  const auto n = evaluate_errors(f, problem(), zero, zero, 4);
  EXPECT_NEAR(n.rmse, 0.25, 1e-15);
  EXPECT_NEAR(n.linf, 0.25, 1e-15);
}

TEST(EvalMetrics, ConvergenceOrder) {
  EXPECT_NEAR(convergence_order(1.04e-1, 2.0e-2), 2.378, 1e-3);
  EXPECT_NEAR(convergence_order(1.0, 0.7579), 0.400, 1e-3);
  EXPECT_DOUBLE_EQ(convergence_order(0.3, 0.1), -convergence_order(0.1, 0.3));
  EXPECT_THROW(convergence_order(0.0, 1.0), NonPositiveError);
  EXPECT_THROW(convergence_order(1.0, -1.0), NonPositiveError);
}

TEST(EvalMetrics, ReportTable) {
  std::vector<ErrorReport> rows(2);
  rows[0].resolution = 8;
  rows[0].rmse = 0.4;
  rows[0].linf = 1.0;
  rows[1].resolution = 16;
  rows[1].rmse = 0.1;
  rows[1].linf = 0.5;
  fill_orders(rows);
  EXPECT_DOUBLE_EQ(*rows[1].order_rmse, 2.0);
  EXPECT_DOUBLE_EQ(*rows[1].order_linf, 1.0);
  const auto csv = format_report_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "N,rmse,order_rmse,linf,order_linf,sec_per_epoch,epochs");
  EXPECT_NE(csv.find("\n8,0.40000000000000002,,1,,0,0\n"), std::string::npos);
}

TEST(EvalMetrics, VtkLayout) {
  const auto pb = problem();
  const ExprField f{expr::parse("x")};
  const auto vtk = format_vtk(sample_field(f, pb, 2), pb.domain, 2);
  EXPECT_NE(vtk.find("DIMENSIONS 3 3 3\n"), std::string::npos);
  EXPECT_NE(vtk.find("POINT_DATA 27\n"), std::string::npos);
  const auto u = vtk.find("SCALARS u double 1\nLOOKUP_TABLE default\n");
  const auto phi = vtk.find("SCALARS phi double 1\n");
  ASSERT_NE(u, std::string::npos);
  ASSERT_NE(phi, std::string::npos);
  std::istringstream body(vtk.substr(u, phi - u));
  std::string line;
  std::getline(body, line);
  std::getline(body, line);
  std::vector<double> vals;
  while (std::getline(body, line)) vals.push_back(std::stod(line));
  ASSERT_EQ(vals.size(), 27u);
  EXPECT_EQ(vals[0], -1.0);  // x fastest
  EXPECT_EQ(vals[1], 0.0);
  EXPECT_EQ(vals[2], 1.0);
}

TEST(EvalMetrics, FieldCsvRoundTrip) {
  const auto pb = problem();
  const ExprField f{expr::parse("sin(x)*exp(y)+z/3")};
  const auto samples = sample_field(f, pb, 3);
  const auto back = parse_field_csv(format_field_csv(samples));
  ASSERT_EQ(back.size(), samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].u, samples[i].u);
    EXPECT_EQ(back[i].phi, samples[i].phi);
    EXPECT_EQ(back[i].point.z, samples[i].point.z);
  }
  EXPECT_THROW(parse_field_csv("a,b\n"), IoError);
}

TEST(EvalMetrics, ExportWritesBothFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "nbm_export_test";
  std::filesystem::remove_all(dir);
  const ExprField f{expr::parse("1")};
  export_field(f, problem(), 2, dir / "field");
  EXPECT_TRUE(std::filesystem::exists(dir / "field.vtk"));
  EXPECT_TRUE(std::filesystem::exists(dir / "field.csv"));
  std::filesystem::remove_all(dir);
}

TEST(EvalMetrics, JumpProbeSeesDiscontinuity) {
  const auto pb = problem();
  struct Step {
    const LevelSet& ls;
    double value(const Vec3& p) const { return ls.side(p) == Side::Minus ? 0.0 : 2.0; }
  } step{pb.level_set};
  EXPECT_NEAR(interface_jump_probe(step, pb.level_set, pb.domain, 0.01), 2.0, 1e-15);
  const ExprField smooth{expr::parse("x")};
  EXPECT_LT(interface_jump_probe(smooth, pb.level_set, pb.domain, 0.01), 0.021);
}
