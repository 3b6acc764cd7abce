// SPDX-License-Identifier: Apache-2.0

#include "shapeuq/cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/os.h>

#include "shapeuq/eigensolver.hpp"
#include "shapeuq/errors.hpp"
#include "shapeuq/sensitivity.hpp"

namespace shapeuq
{

std::vector<double> default_amplitudes()
{
  std::vector<double> t;
  for (int k = 0; k <= 8; k++)
  {
    t.push_back(std::pow(2.0, -5.0 + 0.5 * k));
  }
  return t;
}

namespace
{

std::string trim(const std::string &s)
{
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos)
  {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string &s, char sep)
{
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep))
  {
    out.push_back(trim(item));
  }
  return out;
}

std::vector<std::string> tokens(const std::string &s)
{
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w)
  {
    out.push_back(w);
  }
  return out;
}

bool try_double(const std::string &s, double &v)
{
  const char *end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  return ec == std::errc() && p == end;
}

double parse_double(const std::string &key, const std::string &s)
{
  double v = 0.0;
  if (!try_double(trim(s), v))
  {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, s));
  }
  return v;
}

template <typename Int>
Int parse_int(const std::string &key, const std::string &s)
{
  const std::string x = trim(s);
  Int v{};
  auto [p, ec] = std::from_chars(x.data(), x.data() + x.size(), v);
  if (ec != std::errc() || p != x.data() + x.size())
  {
    throw ConfigError(fmt::format("{}: '{}' is not an integer", key, s));
  }
  return v;
}

bool parse_bool(const std::string &key, const std::string &s)
{
  const std::string x = trim(s);
  if (x == "true" || x == "1" || x == "yes")
  {
    return true;
  }
  if (x == "false" || x == "0" || x == "no")
  {
    return false;
  }
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, s));
}

std::string number(double v) { return fmt::format("{:.17g}", v); }

std::string read_file(const std::string &path, const std::string &what)
{
  std::ifstream in(path);
  if (!in)
  {
    throw ConfigError(fmt::format("cannot open {} '{}'", what, path));
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string strip_comment(const std::string &line)
{
  const auto h = line.find('#');
  return h == std::string::npos ? line : line.substr(0, h);
}

}  // namespace

void apply_setting(RunConfig &c, const std::string &key_value)
{
  const auto eq = key_value.find('=');
  if (eq == std::string::npos)
  {
    throw ConfigError(fmt::format("expected key=value, got '{}'", key_value));
  }
  const std::string key = trim(key_value.substr(0, eq));
  const std::string value = trim(key_value.substr(eq + 1));
  if (key == "geometry")
    c.geometry = value;
  else if (key == "width")
    c.width = parse_double(key, value);
  else if (key == "height")
    c.height = parse_double(key, value);
  else if (key == "patch_file")
    c.patch_file = value;
  else if (key == "degree")
    c.degree = parse_int<int>(key, value);
  else if (key == "spans")
    c.spans = parse_int<int>(key, value);
  else if (key == "deformation")
    c.deformation = value;
  else if (key == "deformation_file")
    c.deformation_file = value;
  else if (key == "t")
    c.t = parse_double(key, value);
  else if (key == "t_grid")
  {
    c.t_grid.clear();
    if (!value.empty())
    {
      for (const auto &item : split(value, ','))
      {
        c.t_grid.push_back(parse_double(key, item));
      }
    }
  }
  else if (key == "clusters")
    c.clusters = parse_int<int>(key, value);
  else if (key == "samples")
    c.samples = parse_int<int>(key, value);
  else if (key == "seed")
    c.seed = parse_int<std::uint64_t>(key, value);
  else if (key == "threads")
    c.threads = parse_int<int>(key, value);
  else if (key == "out")
    c.out = value;
  else if (key == "dump_matrices")
    c.dump_matrices = parse_bool(key, value);
  else if (key == "field_cluster")
    c.field_cluster = parse_int<int>(key, value);
  else if (key == "field_grid")
    c.field_grid = parse_int<int>(key, value);
  else
    throw ConfigError(fmt::format("unknown configuration key '{}'", key));
}

RunConfig parse_config(const std::string &text, const std::string &origin)
{
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line))
  {
    lineno++;
    line = trim(strip_comment(line));
    if (line.empty())
    {
      continue;
    }
    try
    {
      apply_setting(c, line);
    }
    catch (const ConfigError &e)
    {
      throw ConfigError(fmt::format("{}:{}: {}", origin, lineno, e.what()));
    }
  }
  return c;
}

std::string dump_config(const RunConfig &c)
{
  std::string grid;
  for (std::size_t i = 0; i < c.t_grid.size(); i++)
  {
    grid += (i ? "," : "") + number(c.t_grid[i]);
  }
  std::string s;
  s += fmt::format("geometry = {}\n", c.geometry);
  s += fmt::format("width = {}\n", number(c.width));
  s += fmt::format("height = {}\n", number(c.height));
  s += fmt::format("patch_file = {}\n", c.patch_file);
  s += fmt::format("degree = {}\n", c.degree);
  s += fmt::format("spans = {}\n", c.spans);
  s += fmt::format("deformation = {}\n", c.deformation);
  s += fmt::format("deformation_file = {}\n", c.deformation_file);
  s += fmt::format("t = {}\n", number(c.t));
  s += fmt::format("t_grid = {}\n", grid);
  s += fmt::format("clusters = {}\n", c.clusters);
  s += fmt::format("samples = {}\n", c.samples);
  s += fmt::format("seed = {}\n", c.seed);
  s += fmt::format("threads = {}\n", c.threads);
  s += fmt::format("out = {}\n", c.out);
  s += fmt::format("dump_matrices = {}\n", c.dump_matrices ? "true" : "false");
  s += fmt::format("field_cluster = {}\n", c.field_cluster);
  s += fmt::format("field_grid = {}\n", c.field_grid);
  return s;
}

void validate(const RunConfig &c, Command command)
{
  if (c.geometry == "rectangle")
  {
    if (!(c.width > 0.0 && c.height > 0.0))
    {
      throw ConfigError("rectangle width and height must be positive");
    }
  }
  else if (c.geometry == "patch")
  {
    if (c.patch_file.empty())
    {
      throw ConfigError("geometry = patch needs patch_file");
    }
    if (!std::filesystem::exists(c.patch_file))
    {
      throw ConfigError(fmt::format("patch file '{}' does not exist", c.patch_file));
    }
  }
  else
  {
    throw ConfigError(fmt::format("unknown geometry '{}' (rectangle or patch)", c.geometry));
  }
  if (!c.deformation_file.empty() && !std::filesystem::exists(c.deformation_file))
  {
    throw ConfigError(fmt::format("deformation file '{}' does not exist", c.deformation_file));
  }
  if (c.degree < 1)
  {
    throw ConfigError("degree must be >= 1");
  }
  if (c.spans < 1)
  {
    throw ConfigError("spans must be >= 1");
  }
  if (c.clusters < 1)
  {
    throw ConfigError("clusters must be >= 1");
  }
  if (c.threads < 1)
  {
    throw ConfigError("threads must be >= 1");
  }
  if (c.field_grid < 2)
  {
    throw ConfigError("field_grid must be >= 2");
  }
  if (c.field_cluster < 0 || c.field_cluster >= c.clusters)
  {
    throw ConfigError("field_cluster must index one of the analyzed clusters");
  }
  if (!(c.t >= 0.0 && c.t < 1.0))
  {
    throw ConfigError(fmt::format("t = {} outside [0, 1)", c.t));
  }
  for (const double t : c.t_grid)
  {
    if (!(t > 0.0 && t < 1.0))
    {
      throw ConfigError(fmt::format("t_grid value {} outside (0, 1)", t));
    }
  }
  if (command == Command::mc && c.samples < 2)
  {
    throw ConfigError("samples must be >= 2");
  }
  if (command == Command::converge)
  {
    if (c.t_grid.size() < 4)
    {
      throw ConfigError("need ≥ 4 amplitudes");
    }
    for (std::size_t i = 1; i < c.t_grid.size(); i++)
    {
      if (!(c.t_grid[i] > c.t_grid[i - 1]))
      {
        throw ConfigError("t_grid must be strictly ascending");
      }
    }
  }
}

GeometryMap<2> read_patch(const std::string &path)
{
  const std::string text = read_file(path, "patch file");
  std::istringstream in(text);
  std::string line;
  int p1 = -1, p2 = -1;
  std::vector<double> kx, ky;
  std::vector<Vec2> points;
  std::vector<double> weights;
  bool in_points = false;
  int lineno = 0;
  auto numbers = [&](const std::vector<std::string> &w, std::size_t from)
  {
    std::vector<double> v;
    for (std::size_t i = from; i < w.size(); i++)
    {
      v.push_back(parse_double(fmt::format("{}:{}", path, lineno), w[i]));
    }
    return v;
  };
  while (std::getline(in, line))
  {
    lineno++;
    const auto w = tokens(strip_comment(line));
    if (w.empty())
    {
      continue;
    }
    if (w[0] == "degree" && w.size() == 3)
    {
      p1 = parse_int<int>(path, w[1]);
      p2 = parse_int<int>(path, w[2]);
    }
    else if (w[0] == "knots_x")
      kx = numbers(w, 1);
    else if (w[0] == "knots_y")
      ky = numbers(w, 1);
    else if (w[0] == "points")
      in_points = true;
    else if (in_points && (w.size() == 2 || w.size() == 3))
    {
      const auto v = numbers(w, 0);
      points.emplace_back(v[0], v[1]);
      weights.push_back(v.size() == 3 ? v[2] : 1.0);
    }
    else
    {
      throw ConfigError(fmt::format("{}:{}: cannot parse '{}'", path, lineno, trim(line)));
    }
  }
  if (p1 < 0 || p2 < 0 || kx.empty() || ky.empty() || points.empty())
  {
    throw ConfigError(fmt::format("{}: needs degree, knots_x, knots_y and points", path));
  }
  try
  {
    TensorBasis basis({KnotVector(p1, kx), KnotVector(p2, ky)});
    return GeometryMap<2>(std::move(basis), std::move(points), std::move(weights));
  }
  catch (const std::invalid_argument &e)
  {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
  catch (const NumericalError &e)
  {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
}

DeformationField<2> parse_catalog_modes(const std::string &spec)
{
  std::vector<DeformationMode<2>> modes;
  for (const auto &item : split(spec, ';'))
  {
    const auto w = tokens(item);
    if (w.empty())
    {
      continue;
    }
    std::vector<double> params;
    for (std::size_t i = 1; i < w.size(); i++)
    {
      params.push_back(parse_double(w[0], w[i]));
    }
    modes.push_back(DeformationMode<2>::catalog(w[0], params));
  }
  return DeformationField<2>(std::move(modes));
}

DeformationField<2> read_deformation(const std::string &path, const GeometryMap<2> &geometry)
{
  std::string text;
  {
    std::istringstream in(read_file(path, "deformation file"));
    std::string line;
    while (std::getline(in, line))
    {
      text += strip_comment(line) + "\n";
    }
  }
  const auto w = tokens(text);
  std::vector<DeformationMode<2>> modes;
  std::size_t i = 0;
  double tmp = 0.0;
  while (i < w.size())
  {
    if (w[i] == "closed_form")
    {
      if (i + 1 >= w.size())
      {
        throw ConfigError(fmt::format("{}: closed_form record without a name", path));
      }
      const std::string name = w[i + 1];
      i += 2;
      std::vector<double> params;
      while (i < w.size() && try_double(w[i], tmp))
      {
        params.push_back(tmp);
        i++;
      }
      modes.push_back(DeformationMode<2>::catalog(name, params));
    }
    else if (w[i] == "spline")
    {
      i++;
      const std::size_t n = static_cast<std::size_t>(geometry.basis().size());
      std::vector<Vec2> coeffs;
      for (std::size_t k = 0; k < n; k++)
      {
        double vx = 0.0, vy = 0.0;
        if (i + 1 >= w.size() || !try_double(w[i], vx) || !try_double(w[i + 1], vy))
        {
          throw ConfigError(
              fmt::format("{}: spline record needs {} numbers (vx vy per control point)", path,
                          2 * n));
        }
        coeffs.emplace_back(vx, vy);
        i += 2;
      }
      modes.push_back(DeformationMode<2>::spline(geometry.basis(), std::move(coeffs)));
    }
    else
    {
      throw ConfigError(fmt::format("{}: unexpected token '{}'", path, w[i]));
    }
  }
  if (modes.empty())
  {
    throw ConfigError(fmt::format("{}: no deformation modes", path));
  }
  return DeformationField<2>(std::move(modes));
}

Problem build_problem(const RunConfig &c)
{
  GeometryMap<2> geometry = c.geometry == "patch" ? read_patch(c.patch_file)
                                                  : GeometryMap<2>::box(Vec2(c.width, c.height));
  DeformationField<2> field = c.deformation_file.empty()
                                  ? parse_catalog_modes(c.deformation)
                                  : read_deformation(c.deformation_file, geometry);
  std::optional<RectangleScaling> analytic;
  if (c.geometry == "rectangle" && field.size() == 1 && !field.mode(0).is_spline() &&
      field.mode(0).name() == "axis_scaling")
  {
    const auto &p = field.mode(0).params();
    analytic = RectangleScaling{c.width, c.height,
                                p[0] == 0.0 ? ScalingKind::width : ScalingKind::height, p[1]};
  }
  return {HCurlSpace::uniform(c.degree, c.spans, c.spans), std::move(geometry), std::move(field),
          analytic};
}

namespace
{

class CsvWriter
{
public:
  CsvWriter(const std::filesystem::path &path, const std::string &header)
    : out_(fmt::output_file(path.string())), path_(path)
  {
    out_.print("{}\n", header);
  }
  template <typename... Args>
  void row(fmt::format_string<Args...> f, Args &&...args)
  {
    out_.print(f, std::forward<Args>(args)...);
    out_.print("\n");
  }
  const std::filesystem::path &path() const { return path_; }

private:
  fmt::ostream out_;
  std::filesystem::path path_;
};

struct Analysis
{
  Problem problem;
  EigenPencil pencil;
  Spectrum spectrum;
};

Analysis analyze(const RunConfig &c, bool with_modes)
{
  Problem problem = build_problem(c);
  AssemblyOptions assembly{c.threads};
  const auto t0 = std::chrono::steady_clock::now();
  EigenPencil pencil = assemble_pencil(problem.space, problem.geometry,
                                       with_modes ? problem.field : DeformationField<2>{},
                                       assembly);
  Spectrum spectrum;
  spectrum.pairs = solve_pencil(pencil.K0, pencil.M0);
  spectrum.clusters =
      cluster_eigenpairs(spectrum.pairs, static_cast<int>(spectrum.pairs.values.size()));
  if (static_cast<int>(spectrum.clusters.size()) < c.clusters)
  {
    throw NumericalError(fmt::format("only {} clusters available, {} requested",
                                     spectrum.clusters.size(), c.clusters));
  }
  spectrum.clusters.resize(static_cast<std::size_t>(c.clusters));
  fmt::print(stderr, "N = {}, kernel = {}, {} clusters, {:.2f} s\n", pencil.size(),
             spectrum.pairs.kernel_dimension, spectrum.clusters.size(),
             std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return {std::move(problem), std::move(pencil), std::move(spectrum)};
}

std::vector<SensitivityResult> sensitivities(const Analysis &a, int threads)
{
  std::vector<SensitivityResult> out;
  SensitivityOptions opts;
  opts.threads = threads;
  for (const auto &cl : a.spectrum.clusters)
  {
    out.push_back(eigenpair_derivatives(a.pencil, a.spectrum, cl, opts));
  }
  return out;
}

std::filesystem::path output_dir(const RunConfig &c)
{
  std::filesystem::path dir(c.out);
  std::filesystem::create_directories(dir);
  return dir;
}

void cmd_solve(const RunConfig &c)
{
  const Analysis a = analyze(c, false);
  const auto dir = output_dir(c);
  CsvWriter csv(dir / "spectrum.csv", "index,lambda,freq_hz,multiplicity");
  for (const auto &cl : a.spectrum.clusters)
  {
    for (int k = 0; k < cl.multiplicity; k++)
    {
      const double lambda = cl.members[k];
      csv.row("{},{},{},{}", cl.first + k, number(lambda), number(frequency_hz(lambda)),
              cl.multiplicity);
    }
    fmt::print("cluster {}: lambda = {:.10g} 1/m^2, f = {:.10g} Hz, multiplicity {}\n", cl.index,
               cl.lambda, cl.frequency_hz, cl.multiplicity);
  }
  if (c.dump_matrices)
  {
    write_matrix_csv((dir / "K0.csv").string(), a.pencil.K0);
    write_matrix_csv((dir / "M0.csv").string(), a.pencil.M0);
  }
}

void cmd_uq(const RunConfig &c)
{
  const Analysis a = analyze(c, true);
  const auto sens = sensitivities(a, c.threads);
  const UqSummary summary = propagate(sens, c.t);
  const auto dir = output_dir(c);
  {
    CsvWriter csv(dir / "summary.csv", "cluster_id,lambda_ref,freq_ref_hz,var_lambda,t,M");
    for (const auto &cu : summary.clusters)
    {
      for (int k = 0; k < cu.multiplicity; k++)
      {
        csv.row("{},{},{},{},{},{}", cu.cluster_index, number(cu.lambda),
                number(cu.frequency_hz), number(cu.variance[k]), number(c.t), summary.modes);
      }
      fmt::print("cluster {}: lambda = {:.10g}, var_lambda = [{}]\n", cu.cluster_index, cu.lambda,
                 fmt::join(cu.variance.begin(), cu.variance.end(), ", "));
    }
  }
  const auto field =
      variance_field(a.problem.space, a.problem.geometry, sens[c.field_cluster], c.t, c.field_grid);
  CsvWriter csv(dir / "variance_field.csv", "x,y,var_Ex,var_Ey,var_magnitude");
  for (const auto &p : field)
  {
    csv.row("{},{},{},{},{}", number(p.x), number(p.y), number(p.var_ex), number(p.var_ey),
            number(p.var_magnitude));
  }
}

void cmd_mc(const RunConfig &c)
{
  const Analysis a = analyze(c, true);
  McOptions opts;
  opts.threads = c.threads;
  const McEstimate est = monte_carlo(a.problem.space, a.problem.geometry, a.problem.field,
                                     a.spectrum, a.pencil.M0, c.t, c.samples, c.seed, opts);
  const auto dir = output_dir(c);
  CsvWriter csv(dir / "mc.csv", "cluster_id,member,mean,var,se_mean,se_var,n_samples,n_skipped,seed");
  for (const auto &e : est.clusters)
  {
    for (int k = 0; k < e.multiplicity; k++)
    {
      csv.row("{},{},{},{},{},{},{},{},{}", e.cluster_index, k, number(e.mean[k]),
              number(e.variance[k]), number(e.se_mean[k]), number(e.se_variance[k]),
              est.n_samples, est.n_skipped, est.seed);
    }
    fmt::print("cluster {}: mean = [{}], var = [{}]\n", e.cluster_index,
               fmt::join(e.mean.begin(), e.mean.end(), ", "),
               fmt::join(e.variance.begin(), e.variance.end(), ", "));
  }
}

std::string describe(const SlopeFit &f)
{
  return f.slope ? fmt::format("{:.3f}", *f.slope) : fmt::format("absent ({})", f.reason);
}

void cmd_converge(const RunConfig &c)
{
  const Analysis a = analyze(c, true);
  const auto sens = sensitivities(a, c.threads);
  ConvergenceOptions opts;
  opts.n_samples = c.samples;
  opts.seed = c.seed;
  opts.threads = c.threads;
  opts.analytic = a.problem.analytic;
  const ConvergenceResult res = convergence_study(a.problem.space, a.problem.geometry,
                                                  a.problem.field, a.spectrum, a.pencil.M0, sens,
                                                  c.t_grid, opts);
  const auto dir = output_dir(c);
  CsvWriter csv(dir / "convergence.csv", "t,cluster_id,err_mean,err_var,baseline_kind");
  for (const auto &r : res.rows)
  {
    csv.row("{},{},{},{},{}", number(r.t), r.cluster_index, number(r.err_mean),
            number(r.err_var), r.baseline_kind);
  }
  for (const auto &s : res.slopes)
  {
    fmt::print("cluster {}: mean slope {}, variance slope {}\n", s.cluster_index,
               describe(s.mean), describe(s.variance));
  }
}

}  // namespace

int run_cli(int argc, const char *const *argv)
{
  CLI::App app{"Shape uncertainty quantification for 2D cavity eigenproblems"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> settings;
  std::string out_dir;
  bool dump = false;
  const std::vector<std::pair<std::string, Command>> names = {{"solve", Command::solve},
                                                              {"uq", Command::uq},
                                                              {"mc", Command::mc},
                                                              {"converge", Command::converge}};
  const std::vector<std::string> help = {"reference spectrum (spectrum.csv)",
                                         "perturbation statistics (summary.csv, variance_field.csv)",
                                         "Monte Carlo statistics (mc.csv)",
                                         "convergence study (convergence.csv)"};
  std::vector<CLI::App *> subs;
  for (std::size_t i = 0; i < names.size(); i++)
  {
    CLI::App *sub = app.add_subcommand(names[i].first, help[i]);
    sub->add_option("--config", config_path, "key=value configuration file");
    sub->add_option("--set", settings, "override one key (key=value)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_flag("--dump-config", dump, "print the effective configuration and exit");
    subs.push_back(sub);
  }

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError &e)
  {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  Command command = Command::solve;
  for (std::size_t i = 0; i < subs.size(); i++)
  {
    if (subs[i]->parsed())
    {
      command = names[i].second;
    }
  }

  RunConfig config;
  try
  {
    if (!config_path.empty())
    {
      config = parse_config(read_file(config_path, "config file"), config_path);
    }
    for (const auto &s : settings)
    {
      apply_setting(config, s);
    }
    if (!out_dir.empty())
    {
      config.out = out_dir;
    }
    if (dump)
    {
      fmt::print("{}", dump_config(config));
      return 0;
    }
    validate(config, command);
  }
  catch (const ConfigError &e)
  {
    fmt::print(stderr, "configuration error: {}\n", e.what());
    return 2;
  }

  try
  {
    switch (command)
    {
    case Command::solve:
      cmd_solve(config);
      break;
    case Command::uq:
      cmd_uq(config);
      break;
    case Command::mc:
      cmd_mc(config);
      break;
    case Command::converge:
      cmd_converge(config);
      break;
    }
  }
  catch (const ConfigError &e)
  {
    fmt::print(stderr, "configuration error: {}\n", e.what());
    return 2;
  }
  catch (const std::invalid_argument &e)
  {
    fmt::print(stderr, "configuration error: {}\n", e.what());
    return 2;
  }
  catch (const std::exception &e)
  {
    fmt::print(stderr, "numerical failure: {}\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace shapeuq
