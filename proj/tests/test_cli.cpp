// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "shapeuq/cli.hpp"
#include "shapeuq/errors.hpp"

using namespace shapeuq;
namespace fs = std::filesystem;

namespace
{

fs::path scratch(const std::string &name)
{
  const fs::path dir = fs::temp_directory_path() / ("shapeuq_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(std::vector<std::string> args)
{
  args.insert(args.begin(), "shapeuq");
  std::vector<const char *> argv;
  for (const auto &a : args)
    argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::vector<std::vector<std::string>> read_csv(const fs::path &path)
{
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line))
  {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
      cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

void write_file(const fs::path &path, const std::string &text)
{
  std::ofstream(path) << text;
}

std::string expect_config_error(const std::string &text)
{
  try
  {
    parse_config(text);
  }
  catch (const ConfigError &e)
  {
    return e.what();
  }
  ADD_FAILURE() << "no ConfigError for: " << text;
  return {};
}

}  // namespace

TEST(Config, DefaultAmplitudes)
{
  const auto t = default_amplitudes();
  ASSERT_EQ(t.size(), 9u);
  EXPECT_DOUBLE_EQ(t.front(), 1.0 / 32);
  EXPECT_DOUBLE_EQ(t.back(), 0.5);
  EXPECT_DOUBLE_EQ(t[1], std::pow(2.0, -4.5));
}

TEST(Config, RoundTrip)
{
  RunConfig c;
  c.width = 1.25;
  c.height = 0.1 + 0.2;
  c.degree = 3;
  c.spans = 7;
  c.deformation = "axis_scaling 0 1; bump 1 0.3";
  c.t = 0.123456789012345;
  c.t_grid = {0.01, 1.0 / 3.0, 0.7};
  c.clusters = 2;
  c.samples = 17;
  c.seed = 18446744073709551615ull;
  c.threads = 3;
  c.out = "some/dir";
  c.dump_matrices = true;
  c.field_cluster = 1;
  c.field_grid = 4;
  const std::string text = dump_config(c);
  EXPECT_EQ(parse_config(text), c);
  EXPECT_EQ(dump_config(parse_config(text)), text);
  EXPECT_EQ(parse_config(""), RunConfig{});
}

TEST(Config, CommentsWhitespaceAndOverrides)
{
  const RunConfig c = parse_config("# cavity\n  spans = 4   # coarse\n\nt=0.2\n");
  EXPECT_EQ(c.spans, 4);
  EXPECT_EQ(c.t, 0.2);
  RunConfig d = c;
  apply_setting(d, "spans=6");
  EXPECT_EQ(d.spans, 6);
  EXPECT_THROW(apply_setting(d, "spans"), ConfigError);
}

TEST(Config, Errors)
{
  EXPECT_NE(expect_config_error("colour = red\n").find("unknown configuration key 'colour'"), std::string::npos);
  EXPECT_NE(expect_config_error("spans = 4\nt = abc\n").find("config:2:"), std::string::npos);
  EXPECT_NE(expect_config_error("spans = 2.5\n").find("not an integer"), std::string::npos);
  EXPECT_NE(expect_config_error("dump_matrices = maybe\n").find("not a boolean"), std::string::npos);
}

TEST(Config, Validation)
{
  RunConfig c;
  EXPECT_NO_THROW(validate(c, Command::converge));
  c.t = 1.0;
  EXPECT_THROW(validate(c, Command::uq), ConfigError);
  c.t = 0.0;
  EXPECT_NO_THROW(validate(c, Command::uq));
  c.samples = 1;
  EXPECT_THROW(validate(c, Command::mc), ConfigError);
  c = RunConfig{};
  c.t_grid = {0.1, 0.2, 0.3};
  try
  {
    validate(c, Command::converge);
    FAIL();
  }
  catch (const ConfigError &e)
  {
    EXPECT_STREQ(e.what(), "need ≥ 4 amplitudes");
  }
  c.t_grid = {0.1, 0.3, 0.2, 0.4};
  EXPECT_THROW(validate(c, Command::converge), ConfigError);
  c.t_grid = {0.1, 0.2, 0.3, 1.0};
  EXPECT_THROW(validate(c, Command::converge), ConfigError);
  c = RunConfig{};
  c.deformation_file = "/nonexistent/modes.txt";
  EXPECT_THROW(validate(c, Command::solve), ConfigError);
  c = RunConfig{};
  c.geometry = "sphere";
  EXPECT_THROW(validate(c, Command::solve), ConfigError);
}

TEST(Problem, AnalyticBaselineOnlyForSingleAxisStretch)
{
  RunConfig c;
  c.spans = 2;
  c.width = 1.0;
  c.height = 0.8;
  const Problem p = build_problem(c);
  ASSERT_TRUE(p.analytic.has_value());
  EXPECT_EQ(p.analytic->kind, ScalingKind::width);
  EXPECT_EQ(p.analytic->b, 0.8);
  c.deformation = "axis_scaling 1 0.5";
  const Problem q = build_problem(c);
  ASSERT_TRUE(q.analytic.has_value());
  EXPECT_EQ(q.analytic->kind, ScalingKind::height);
  EXPECT_EQ(q.analytic->factor, 0.5);
  c.deformation = "axis_scaling 0 1; bump 0 0.1";
  EXPECT_FALSE(build_problem(c).analytic.has_value());
  EXPECT_THROW(parse_catalog_modes("wobble 1"), ConfigError);
  EXPECT_THROW(parse_catalog_modes("axis_scaling 2 1"), ConfigError);
}

TEST(Files, PatchAndDeformationFilesMatchBuiltins)
{
  const fs::path dir = scratch("files");
  write_file(dir / "square.patch",
             "# bilinear unit square\n"
             "degree 1 1\nknots_x 0 0 1 1\nknots_y 0 0 1 1\npoints\n"
             "0 0\n1 0\n0 1\n1 1\n");
  write_file(dir / "modes.txt", "closed_form axis_scaling 0 1\nspline 0 0 1 0 0 0 1 0\n");
  RunConfig c;
  c.geometry = "patch";
  c.patch_file = (dir / "square.patch").string();
  c.deformation_file = (dir / "modes.txt").string();
  c.spans = 4;
  const Problem p = build_problem(c);
  EXPECT_EQ(p.field.size(), 2);
  EXPECT_FALSE(p.analytic.has_value());
  for (double x : {0.1, 0.6})
    for (double y : {0.3, 0.9})
    {
      const Vec2 xh(x, y);
      const auto g = p.geometry.evaluate(xh);
      EXPECT_LT((g.point - xh).norm(), 1e-15);
      const auto a = p.field.mode(0).evaluate(xh, g);
      const auto b = p.field.mode(1).evaluate(xh, g);
      EXPECT_LT((a.value - b.value).norm(), 1e-14);
      EXPECT_LT((a.jacobian - b.jacobian).norm(), 1e-14);
    }
  write_file(dir / "bad.txt", "spline 1 2 3\n");
  EXPECT_THROW(read_deformation((dir / "bad.txt").string(), p.geometry), ConfigError);
  write_file(dir / "bad.patch", "degree 1 1\nknots_x 0 0 1 1\n");
  EXPECT_THROW(read_patch((dir / "bad.patch").string()), ConfigError);
}

TEST(Run, SolveWritesSpectrum)
{
  const fs::path dir = scratch("solve");
  ASSERT_EQ(run({"solve", "--set", "spans=8", "--set", "clusters=3", "--set", "dump_matrices=true", "--out", dir.string()}), 0);
  const auto rows = read_csv(dir / "spectrum.csv");
  ASSERT_EQ(rows.size(), 1u + 5u);  // clusters of multiplicity 2, 1, 2
  EXPECT_EQ(rows[0], (std::vector<std::string>{"index", "lambda", "freq_hz", "multiplicity"}));
  EXPECT_EQ(rows[1][0], "0");
  EXPECT_EQ(rows[1][3], "2");
  EXPECT_EQ(rows[3][3], "1");
  EXPECT_NEAR(std::stod(rows[1][1]), 9.8696, 1e-3);
  EXPECT_TRUE(fs::exists(dir / "K0.csv"));
  EXPECT_TRUE(fs::exists(dir / "M0.csv"));
}

TEST(Run, UqVarianceScalesWithSquaredAmplitude)
{
  const fs::path dir = scratch("uq");
  const std::vector<std::string> base{"--set", "spans=8", "--set", "clusters=3", "--set", "field_grid=3"};
  auto uq_at = [&](const std::string &t, const std::string &sub)
  {
    std::vector<std::string> args{"uq", "--out", (dir / sub).string(), "--set", "t=" + t};
    args.insert(args.end(), base.begin(), base.end());
    EXPECT_EQ(run(args), 0);
    return read_csv(dir / sub / "summary.csv");
  };
  const auto zero = uq_at("0", "t0");
  const auto a = uq_at("0.05", "a");
  const auto b = uq_at("0.1", "b");
  ASSERT_EQ(a.size(), 6u);
  EXPECT_EQ(a[0], (std::vector<std::string>{"cluster_id", "lambda_ref", "freq_ref_hz", "var_lambda", "t", "M"}));
  for (std::size_t r = 1; r < a.size(); r++)
  {
    EXPECT_EQ(std::stod(zero[r][3]), 0.0);
    EXPECT_NEAR(std::stod(b[r][3]), 4 * std::stod(a[r][3]), 1e-12 * std::max(1.0, std::stod(b[r][3])));
    EXPECT_EQ(a[r][5], "1");
  }
  EXPECT_NEAR(std::stod(b[1][3]), 1.2988, 2e-3);
  const auto field = read_csv(dir / "b" / "variance_field.csv");
  EXPECT_EQ(field.size(), 1u + 9u);
  EXPECT_EQ(field[0], (std::vector<std::string>{"x", "y", "var_Ex", "var_Ey", "var_magnitude"}));
}

TEST(Run, MonteCarloAndConvergenceOutputs)
{
  const fs::path dir = scratch("mc");
  ASSERT_EQ(run({"mc", "--out", dir.string(), "--set", "spans=4", "--set", "clusters=2", "--set", "samples=6",
                 "--set", "seed=9"}),
            0);
  const auto mc = read_csv(dir / "mc.csv");
  ASSERT_EQ(mc.size(), 1u + 3u);
  EXPECT_EQ(mc[0].size(), 9u);
  EXPECT_EQ(mc[1][6], "6");
  EXPECT_EQ(mc[1][7], "0");
  EXPECT_EQ(mc[1][8], "9");
  ASSERT_EQ(run({"converge", "--out", dir.string(), "--set", "spans=4", "--set", "clusters=2",
                 "--set", "t_grid=0.05,0.1,0.2,0.4"}),
            0);
  const auto conv = read_csv(dir / "convergence.csv");
  ASSERT_EQ(conv.size(), 1u + 8u);
  EXPECT_EQ(conv[1][4], "analytic");
}

TEST(Run, ExitCodes)
{
  const fs::path dir = scratch("codes");
  EXPECT_EQ(run({"solve", "--bogus"}), 2);
  EXPECT_EQ(run({}), 2);
  EXPECT_EQ(run({"converge", "--out", dir.string(), "--set", "t_grid=0.1"}), 2);
  EXPECT_EQ(run({"solve", "--out", dir.string(), "--set", "deformation_file=/nonexistent/v.txt"}), 2);
  EXPECT_EQ(run({"solve", "--config", "/nonexistent/run.cfg"}), 2);
  EXPECT_EQ(run({"solve", "--set", "spans=x"}), 2);
  EXPECT_EQ(run({"uq", "--set", "t=-0.5"}), 2);
  // Most samples fold the map at this amplitude.
  EXPECT_EQ(run({"mc", "--out", dir.string(), "--set", "spans=2", "--set", "clusters=1", "--set",
                 "deformation=axis_scaling 0 2", "--set", "t=0.9", "--set", "samples=20"}),
            1);
  // More clusters than the discrete space has.
  EXPECT_EQ(run({"solve", "--out", dir.string(), "--set", "spans=1", "--set", "clusters=50"}), 1);
}

TEST(Run, DumpConfigPrintsEffectiveSettings)
{
  const fs::path dir = scratch("dump");
  write_file(dir / "run.cfg", "spans = 5\nt = 0.3\n");
  testing::internal::CaptureStdout();
  const int code = run({"uq", "--config", (dir / "run.cfg").string(), "--set", "seed=4", "--dump-config"});
  const std::string out = testing::internal::GetCapturedStdout();
  EXPECT_EQ(code, 0);
  const RunConfig c = parse_config(out);
  EXPECT_EQ(c.spans, 5);
  EXPECT_EQ(c.t, 0.3);
  EXPECT_EQ(c.seed, 4u);
  EXPECT_FALSE(fs::exists(dir / "summary.csv"));
}
