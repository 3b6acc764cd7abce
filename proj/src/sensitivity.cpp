// SPDX-License-Identifier: Apache-2.0

#include "shapeuq/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <lapacke.h>

#include "shapeuq/errors.hpp"
#include "shapeuq/parallel.hpp"

namespace shapeuq
{

SymmetricIndefiniteSolver::SymmetricIndefiniteSolver(const Eigen::MatrixXd &A,
                                                     double pivot_tolerance)
  : factor_(A), pivots_(static_cast<std::size_t>(A.rows()))
{
  const lapack_int n = static_cast<lapack_int>(A.rows());
  if (n == 0)
  {
    return;
  }
  const double scale = A.cwiseAbs().maxCoeff();
  const lapack_int info =
      LAPACKE_dsytrf(LAPACK_COL_MAJOR, 'L', n, factor_.data(), n, pivots_.data());
  if (info < 0)
  {
    throw std::invalid_argument("dsytrf: illegal argument");
  }
  if (info > 0 || scale == 0.0)
  {
    singular_ = true;
    return;
  }
  const double tol = pivot_tolerance * scale;
  for (lapack_int k = 0; k < n; k++)
  {
    if (pivots_[k] > 0)
    {
      singular_ = singular_ || std::abs(factor_(k, k)) <= tol;
    }
    else
    {
      // 2x2 pivot block in rows k, k+1.
      const double a = factor_(k, k), b = factor_(k + 1, k), c = factor_(k + 1, k + 1);
      const double mean = 0.5 * (a + c);
      const double radius = std::hypot(0.5 * (a - c), b);
      const double smallest = std::min(std::abs(mean - radius), std::abs(mean + radius));
      singular_ = singular_ || smallest <= tol;
      k++;
    }
  }
}

Eigen::MatrixXd SymmetricIndefiniteSolver::solve(const Eigen::MatrixXd &rhs) const
{
  if (singular_)
  {
    throw NumericalError("symmetric indefinite factorization is singular");
  }
  Eigen::MatrixXd x = rhs;
  const lapack_int n = static_cast<lapack_int>(factor_.rows());
  if (n == 0 || x.cols() == 0)
  {
    return x;
  }
  const lapack_int info =
      LAPACKE_dsytrs(LAPACK_COL_MAJOR, 'L', n, static_cast<lapack_int>(x.cols()), factor_.data(), n,
                     pivots_.data(), x.data(), n);
  if (info != 0)
  {
    throw NumericalError("dsytrs failed");
  }
  return x;
}

namespace
{

void check_isolated(const Spectrum &spectrum, const EigenCluster &cluster, double tol)
{
  const auto &values = spectrum.pairs.values;
  const int lo = cluster.first;
  const int hi = cluster.first + cluster.multiplicity;
  const double gap = 10.0 * tol * cluster.lambda;
  if ((lo > 0 && std::abs(values[lo - 1] - cluster.lambda) <= gap) ||
      (hi < values.size() && std::abs(values[hi] - cluster.lambda) <= gap))
  {
    throw NumericalError("cluster not spectrally isolated");
  }
}

// Rotates E within its span so that sum_i B_i^T B_i is diagonal with
// decreasing entries.
Eigen::MatrixXd rotate_degenerate_basis(const EigenPencil &pencil, const Eigen::MatrixXd &E,
                                        double lambda)
{
  const Eigen::Index m = E.cols();
  if (m < 2 || pencil.modes() == 0)
  {
    return E;
  }
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < pencil.modes(); i++)
  {
    Eigen::MatrixXd B = E.transpose() * (pencil.dK[i] - lambda * pencil.dM[i]) * E;
    B = 0.5 * (B + B.transpose()).eval();
    S += B.transpose() * B;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const Eigen::MatrixXd Q = es.eigenvectors().rowwise().reverse();
  Eigen::MatrixXd rotated = E * Q;
  for (Eigen::Index c = 0; c < m; c++)
  {
    Eigen::Index imax = 0;
    rotated.col(c).cwiseAbs().maxCoeff(&imax);
    if (rotated(imax, c) < 0.0)
    {
      rotated.col(c) *= -1.0;
    }
  }
  return rotated;
}

}  // namespace

SensitivityResult eigenpair_derivatives(const EigenPencil &pencil, const Spectrum &spectrum,
                                        const EigenCluster &cluster,
                                        const SensitivityOptions &options)
{
  check_isolated(spectrum, cluster, options.cluster_tolerance);

  const Eigen::Index n = pencil.size();
  const Eigen::Index m = cluster.multiplicity;
  const double lambda = cluster.lambda;

  SensitivityResult result;
  result.cluster_index = cluster.index;
  result.lambda = lambda;
  result.basis = rotate_degenerate_basis(pencil, cluster.basis, lambda);
  const Eigen::MatrixXd &E = result.basis;
  const Eigen::MatrixXd ME = pencil.M0 * E;

  Eigen::MatrixXd bordered = Eigen::MatrixXd::Zero(n + m, n + m);
  bordered.topLeftCorner(n, n) = pencil.K0 - lambda * pencil.M0;
  bordered.topRightCorner(n, m) = -ME;
  bordered.bottomLeftCorner(m, n) = -ME.transpose();
  const SymmetricIndefiniteSolver solver(bordered, options.pivot_tolerance);
  if (solver.singular())
  {
    throw NumericalError("cluster not spectrally isolated");
  }

  const int modes = pencil.modes();
  result.eigenvalue_derivatives.assign(modes, Eigen::MatrixXd::Zero(m, m));
  result.eigenvector_derivatives.assign(modes, Eigen::MatrixXd::Zero(n, m));
  std::vector<double> residuals(modes, 0.0);

  parallel_for(static_cast<std::size_t>(modes), options.threads,
               [&](std::size_t i)
               {
                 const Eigen::MatrixXd dME = pencil.dM[i] * E;
                 Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + m, m);
                 rhs.topRows(n) = -pencil.dK[i] * E + lambda * dME;
                 for (Eigen::Index j = 0; j < m; j++)
                 {
                   rhs(n + j, j) = 0.5 * E.col(j).dot(dME.col(j));
                 }
                 const Eigen::MatrixXd x = solver.solve(rhs);
                 result.eigenvector_derivatives[i] = x.topRows(n);
                 result.eigenvalue_derivatives[i] = x.bottomRows(m);
                 const double rhs_norm = rhs.norm();
                 residuals[i] = rhs_norm > 0.0 ? (bordered * x - rhs).norm() / rhs_norm
                                               : (bordered * x).norm();
               });
  result.residual = modes > 0 ? *std::max_element(residuals.begin(), residuals.end()) : 0.0;
  return result;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> directional_derivative(const SensitivityResult &result,
                                                                   std::span<const double> z)
{
  if (static_cast<int>(z.size()) != result.modes())
  {
    throw std::invalid_argument("directional_derivative: z has wrong length");
  }
  const Eigen::Index m = result.multiplicity();
  Eigen::MatrixXd dl = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd de = Eigen::MatrixXd::Zero(result.basis.rows(), m);
  for (int i = 0; i < result.modes(); i++)
  {
    dl += z[i] * result.eigenvalue_derivatives[i];
    de += z[i] * result.eigenvector_derivatives[i];
  }
  return {dl, de};
}

}  // namespace shapeuq
