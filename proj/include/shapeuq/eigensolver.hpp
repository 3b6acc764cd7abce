// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPEUQ_EIGENSOLVER_HPP
#define SHAPEUQ_EIGENSOLVER_HPP

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "shapeuq/fem.hpp"

namespace shapeuq
{

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

/// Resonant frequency f = sqrt(lambda) c0 / (2 pi) in Hz for lambda in 1/m^2.
double frequency_hz(double lambda);

struct EigenOptions
{
  double zero_tolerance = 1e-8;     // kernel threshold relative to the largest eigenvalue
  double cluster_tolerance = 1e-6;  // relative gap below which eigenvalues are merged
};

/// All non-kernel eigenpairs of K e = lambda M e in ascending order with
/// M-orthonormal eigenvectors.
struct Eigenpairs
{
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  int kernel_dimension = 0;
  double zero_threshold = 0.0;
};

/// A group of (numerically) equal eigenvalues and an M0-orthonormal basis of
/// their eigenspace.
struct EigenCluster
{
  int index = 0;
  double lambda = 0.0;  // mean of the members
  int multiplicity = 0;
  int first = 0;  // position of the first member in the eigenpair list
  std::vector<double> members;
  Eigen::MatrixXd basis;
  double frequency_hz = 0.0;
};

struct Spectrum
{
  Eigenpairs pairs;
  std::vector<EigenCluster> clusters;
};

/// Dense generalized symmetric-definite solve via the Cholesky factor of M.
/// Throws NumericalError("mass matrix not positive definite") if M is not SPD.
Eigenpairs solve_pencil(const Eigen::MatrixXd &K, const Eigen::MatrixXd &M,
                        const EigenOptions &options = {});

/// Groups the first n_want eigenpairs into clusters; a cluster cut by n_want
/// is completed. Each basis vector is signed so its largest entry is positive.
std::vector<EigenCluster> cluster_eigenpairs(const Eigenpairs &pairs, int n_want,
                                             const EigenOptions &options = {});

/// n_want smallest non-kernel eigenpairs of (K0, M0), clustered.
Spectrum solve_reference(const EigenPencil &pencil, int n_want, const EigenOptions &options = {});

/// Eigenpairs of the perturbed problem assembled with the exact coefficients
/// C_t(z), A_t(z); clusters are formed on the sampled spectrum itself.
struct SampledSpectrum
{
  Spectrum spectrum;
  Eigen::MatrixXd K;
  Eigen::MatrixXd M;
};
SampledSpectrum solve_sampled(const HCurlSpace &space, const GeometryMap<2> &geometry,
                              const DeformationField<2> &field, double t,
                              std::span<const double> z, int n_want,
                              const AssemblyOptions &assembly = {},
                              const EigenOptions &options = {});

/// Assigns sampled eigenpairs to the reference clusters. Candidates for a
/// reference cluster are the sampled eigenvalues inside its window widened by
/// (1 + 10 t); among those the members with the largest M0-projection onto the
/// reference eigenspace are taken. Throws NumericalError if a cluster cannot
/// be filled.
std::vector<EigenCluster> track_clusters(const Spectrum &reference, const Eigen::MatrixXd &M0,
                                         const Eigenpairs &sampled, double t);

}  // namespace shapeuq

#endif  // SHAPEUQ_EIGENSOLVER_HPP
