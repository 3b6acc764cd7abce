// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPEUQ_SENSITIVITY_HPP
#define SHAPEUQ_SENSITIVITY_HPP

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "shapeuq/eigensolver.hpp"
#include "shapeuq/fem.hpp"

namespace shapeuq
{

/// Dense Bunch-Kaufman factorization A = P L D L^T P^T of a symmetric
/// (possibly indefinite) matrix. A pivot block whose magnitude falls below
/// pivot_tolerance * max|A_ij| marks the matrix as singular.
class SymmetricIndefiniteSolver
{
public:
  explicit SymmetricIndefiniteSolver(const Eigen::MatrixXd &A, double pivot_tolerance = 1e-12);

  bool singular() const { return singular_; }
  Eigen::MatrixXd solve(const Eigen::MatrixXd &rhs) const;

private:
  Eigen::MatrixXd factor_;
  std::vector<int> pivots_;
  bool singular_ = false;
};

struct SensitivityOptions
{
  int threads = 1;
  double cluster_tolerance = 1e-6;
  double pivot_tolerance = 1e-12;
};

/// First derivatives of one eigenvalue cluster with respect to every
/// deformation mode.
///
/// For a degenerate cluster the basis is first rotated inside the eigenspace
/// to the eigenvectors of sum_i B_i^T B_i with B_i = E^T (dK_i - lambda dM_i) E,
/// ordered by decreasing eigenvalue. With a single mode this makes Dlambda_1
/// diagonal. `basis` is the basis the derivatives refer to.
struct SensitivityResult
{
  int cluster_index = 0;
  double lambda = 0.0;
  Eigen::MatrixXd basis;                                // N x m
  std::vector<Eigen::MatrixXd> eigenvalue_derivatives;  // m x m per mode
  std::vector<Eigen::MatrixXd> eigenvector_derivatives; // N x m per mode
  double residual = 0.0;  // max relative residual of the bordered solves

  int multiplicity() const { return static_cast<int>(basis.cols()); }
  int modes() const { return static_cast<int>(eigenvalue_derivatives.size()); }
};

/// Solves, for every mode i and cluster column j,
///   [K0 - lambda M0, -M0 E; -E^T M0, 0] [De_j; mu] =
///   [-dK_i e_j + lambda dM_i e_j; 1/2 e_j^T dM_i e_j at row j, 0 elsewhere]
/// and collects mu as column j of Dlambda_i. Throws
/// NumericalError("cluster not spectrally isolated") if another eigenvalue is
/// within 10 * cluster_tolerance * lambda or the bordered matrix is singular.
SensitivityResult eigenpair_derivatives(const EigenPencil &pencil, const Spectrum &spectrum,
                                        const EigenCluster &cluster,
                                        const SensitivityOptions &options = {});

/// (sum_i z_i Dlambda_i, sum_i z_i De_i).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> directional_derivative(const SensitivityResult &result,
                                                                   std::span<const double> z);

}  // namespace shapeuq

#endif  // SHAPEUQ_SENSITIVITY_HPP
