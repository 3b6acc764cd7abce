// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPEUQ_CLI_HPP
#define SHAPEUQ_CLI_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shapeuq/fem.hpp"
#include "shapeuq/geometry.hpp"
#include "shapeuq/uq.hpp"

namespace shapeuq
{

/// 2^-5, 2^-4.5, ..., 2^-1.
std::vector<double> default_amplitudes();

/// Flat key=value run configuration.
///
///   geometry          rectangle | patch
///   width, height     rectangle side lengths in m
///   patch_file        spline patch description (geometry = patch)
///   degree, spans     H(curl) space: spline degree and spans per direction
///   deformation       catalog modes "name p1 p2 ..." separated by ';'
///   deformation_file  mode records, overrides `deformation` when set
///   t                 amplitude for uq and mc
///   t_grid            comma-separated amplitudes for converge
///   clusters          number of eigenvalue clusters to analyze
///   samples, seed     Monte Carlo sample count and base seed
///   threads           worker threads for assembly and sampling
///   out               output directory
///   dump_matrices     also write K0.csv and M0.csv (solve)
///   field_cluster     cluster whose variance field is written (uq)
///   field_grid        points per direction of the variance field grid
struct RunConfig
{
  std::string geometry = "rectangle";
  double width = 1.0;
  double height = 1.0;
  std::string patch_file;
  int degree = 2;
  int spans = 16;
  std::string deformation = "axis_scaling 0 1";
  std::string deformation_file;
  double t = 0.1;
  std::vector<double> t_grid = default_amplitudes();
  int clusters = 5;
  int samples = 200;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out = ".";
  bool dump_matrices = false;
  int field_cluster = 0;
  int field_grid = 21;

  bool operator==(const RunConfig &) const = default;
};

/// Parses key=value lines; '#' starts a comment. Unknown keys and malformed
/// values raise ConfigError. `origin` names the source in messages.
RunConfig parse_config(const std::string &text, const std::string &origin = "config");
void apply_setting(RunConfig &config, const std::string &key_value);
std::string dump_config(const RunConfig &config);

enum class Command
{
  solve,
  uq,
  mc,
  converge
};

/// Checks the invariants needed by `command`; throws ConfigError.
void validate(const RunConfig &config, Command command);

/// Reads a patch file:
///   degree p1 p2
///   knots_x k0 k1 ...
///   knots_y k0 k1 ...
///   points
///   x y [w]      one line per control point, x index fastest
GeometryMap<2> read_patch(const std::string &path);

/// Reads deformation records:
///   closed_form <name> <params...>
///   spline <vx vy for every control point of the geometry basis>
DeformationField<2> read_deformation(const std::string &path, const GeometryMap<2> &geometry);
DeformationField<2> parse_catalog_modes(const std::string &spec);

struct Problem
{
  HCurlSpace space;
  GeometryMap<2> geometry;
  DeformationField<2> field;
  /// Set when the configuration is a rectangle stretched along one axis.
  std::optional<RectangleScaling> analytic;
};
Problem build_problem(const RunConfig &config);

/// Entry point of the command-line tool. Returns the process exit code:
/// 0 success, 1 numerical failure, 2 configuration error.
int run_cli(int argc, const char *const *argv);

}  // namespace shapeuq

#endif  // SHAPEUQ_CLI_HPP
