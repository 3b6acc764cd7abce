// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPEUQ_UQ_HPP
#define SHAPEUQ_UQ_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "shapeuq/eigensolver.hpp"
#include "shapeuq/fem.hpp"
#include "shapeuq/sensitivity.hpp"

namespace shapeuq
{

// Variance of a KL coordinate z_i ~ U[-1, 1].
inline constexpr double kUniformVariance = 1.0 / 3.0;

/// First-order statistics of one cluster.
///
/// The random derivative Dlambda(z) = sum_i z_i Dlambda_i is an m x m matrix;
/// `covariance` is the m^2 x m^2 covariance of its column-major vectorization
/// scaled by t^2, and `variance` holds the entries belonging to the diagonal
/// of Dlambda, one per cluster member.
struct ClusterUq
{
  int cluster_index = 0;
  double lambda = 0.0;
  double frequency_hz = 0.0;
  int multiplicity = 0;
  Eigen::MatrixXd mean;             // lambda I
  Eigen::MatrixXd covariance;       // m^2 x m^2
  Eigen::VectorXd variance;         // m
  Eigen::MatrixXd vector_variance;  // N x m, per degree of freedom
  Eigen::MatrixXd basis;            // N x m

  /// m x m covariance of the diagonal entries of Dlambda.
  Eigen::MatrixXd eigenvalue_covariance() const;
};

struct UqSummary
{
  double t = 0.0;
  int modes = 0;
  std::vector<ClusterUq> clusters;
};

/// Throws std::invalid_argument for t < 0.
ClusterUq propagate(const SensitivityResult &result, double t);
UqSummary propagate(std::span<const SensitivityResult> results, double t);

/// Full N x N covariance t^2/3 sum_i De_i[:, j] De_i[:, j]^T of cluster column j.
Eigen::MatrixXd vector_covariance(const SensitivityResult &result, double t, int column);

/// Variance of the physical eigenfield on a grid x grid lattice of
/// parametric points, summed over the cluster columns.
struct VarianceFieldPoint
{
  double x = 0.0;
  double y = 0.0;
  double var_ex = 0.0;
  double var_ey = 0.0;
  double var_magnitude = 0.0;
};
std::vector<VarianceFieldPoint> variance_field(const HCurlSpace &space,
                                               const GeometryMap<2> &geometry,
                                               const SensitivityResult &result, double t, int grid);

// ---------------------------------------------------------------------------
// Rectangle oracle

enum class ScalingKind
{
  width,
  height
};

/// Rectangle [0, a] x [0, b] whose side along `kind` is stretched to
/// (1 + t factor z) times its length.
struct RectangleScaling
{
  double a = 1.0;
  double b = 1.0;
  ScalingKind kind = ScalingKind::width;
  double factor = 1.0;
};

struct RectangleOracle
{
  double lambda = 0.0;    // lambda(t, z)
  double mean = 0.0;      // E[lambda] for z ~ U[-1, 1]
  double variance = 0.0;  // Var[lambda]
};

/// E[1/s^2] and Var[1/s^2] for s = 1 + tau z, z ~ U[-1, 1], |tau| < 1.
std::pair<double, double> inverse_square_moments(double tau);

/// lambda = pi^2 (m^2 / a(t,z)^2 + n^2 / b(t,z)^2). Throws
/// NumericalError("deformation not uniformly invertible") if |t factor| >= 1
/// and std::invalid_argument for (m, n) = (0, 0).
RectangleOracle analytic_rectangle_oracle(const RectangleScaling &rect, int m, int n, double t,
                                          double z);

/// Closed-form statistics of the members of one eigenvalue cluster. Member k
/// is lambda_k(t, z) = alpha_k / s^2 + beta_k with s = 1 + t factor z.
struct ClusterOracle
{
  std::vector<std::pair<int, int>> modes;
  std::vector<double> alpha;
  std::vector<double> beta;

  Eigen::VectorXd mean(double tau) const;
  Eigen::MatrixXd covariance(double tau) const;
};

/// Finds the analytic modes whose eigenvalue group is closest to `lambda`
/// and has `multiplicity` members. With `calibrate`, alpha and beta are
/// rescaled so the members equal `lambda` at t = 0.
ClusterOracle rectangle_cluster_oracle(const RectangleScaling &rect, double lambda,
                                       int multiplicity, bool calibrate);

// ---------------------------------------------------------------------------
// Monte Carlo

/// z ~ U[-1, 1]^modes from a 64-bit Mersenne Twister seeded with `seed`.
std::vector<double> sample_uniform(std::uint64_t seed, int modes);

struct McOptions
{
  int threads = 1;
  EigenOptions eigen;
};

struct McClusterEstimate
{
  int cluster_index = 0;
  int multiplicity = 0;
  // Sorted cluster eigenvalues.
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  Eigen::VectorXd se_mean;
  Eigen::VectorXd se_variance;
  // Procrustes-aligned eigenvector coefficients (N x m).
  Eigen::MatrixXd vector_mean;
  Eigen::MatrixXd vector_variance;
  // Mean of the M0-orthogonal projector distance ||P_sample - P_ref||_F.
  double projector_distance = 0.0;
};

struct McEstimate
{
  int n_samples = 0;
  int n_skipped = 0;
  std::uint64_t seed = 0;
  double t = 0.0;
  std::vector<McClusterEstimate> clusters;
};

/// Sample s uses seed base_seed + s. Samples whose perturbed map is not
/// invertible are skipped; more than 1% skipped is a NumericalError.
/// Eigenvectors are aligned to the basis of the corresponding reference
/// cluster.
McEstimate monte_carlo(const HCurlSpace &space, const GeometryMap<2> &geometry,
                       const DeformationField<2> &field, const Spectrum &reference,
                       const Eigen::MatrixXd &M0, double t, int n_samples,
                       std::uint64_t base_seed, const McOptions &options = {});

// ---------------------------------------------------------------------------
// Convergence study

struct SlopeFit
{
  std::optional<double> slope;
  int points = 0;
  std::string reason;
};

/// Least-squares slope of log(err) over log(t) using the first ceil(n/2)
/// entries (the smallest amplitudes) whose error exceeds `noise_floor`.
SlopeFit fit_slope(std::span<const double> t, std::span<const double> err, double noise_floor);

struct ConvergenceRow
{
  double t = 0.0;
  int cluster_index = 0;
  double err_mean = 0.0;
  double err_var = 0.0;
  std::string baseline_kind;
};

struct ClusterSlopes
{
  int cluster_index = 0;
  SlopeFit mean;
  SlopeFit variance;
};

struct ConvergenceResult
{
  std::vector<ConvergenceRow> rows;
  std::vector<ClusterSlopes> slopes;
};

struct ConvergenceOptions
{
  int n_samples = 200;
  std::uint64_t seed = 0;
  int threads = 1;
  /// Analytic baseline; Monte Carlo is used when absent.
  std::optional<RectangleScaling> analytic;
};

/// Errors of the perturbation mean and covariance against the baseline for
/// every amplitude in t_list (ascending, at least 4 entries). Errors are
/// measured between the sorted spectra of the m x m mean matrices and of the
/// m^2 x m^2 covariance operators, which does not depend on the basis chosen
/// inside a degenerate eigenspace.
ConvergenceResult convergence_study(const HCurlSpace &space, const GeometryMap<2> &geometry,
                                    const DeformationField<2> &field, const Spectrum &reference,
                                    const Eigen::MatrixXd &M0,
                                    std::span<const SensitivityResult> sensitivities,
                                    std::span<const double> t_list,
                                    const ConvergenceOptions &options = {});

}  // namespace shapeuq

#endif  // SHAPEUQ_UQ_HPP
