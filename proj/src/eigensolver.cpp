// SPDX-License-Identifier: Apache-2.0

#include "shapeuq/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "shapeuq/errors.hpp"

namespace shapeuq
{

double frequency_hz(double lambda)
{
  return std::sqrt(lambda) * kSpeedOfLight / (2.0 * std::numbers::pi);
}

namespace
{

void fix_sign(Eigen::Ref<Eigen::VectorXd> v)
{
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  if (v[imax] < 0.0)
  {
    v = -v;
  }
}

EigenCluster make_cluster(int index, int first, std::vector<double> members, Eigen::MatrixXd basis)
{
  EigenCluster c;
  c.index = index;
  c.first = first;
  c.multiplicity = static_cast<int>(members.size());
  c.lambda = std::accumulate(members.begin(), members.end(), 0.0) / c.multiplicity;
  c.members = std::move(members);
  c.basis = std::move(basis);
  c.frequency_hz = frequency_hz(c.lambda);
  return c;
}

}  // namespace

Eigenpairs solve_pencil(const Eigen::MatrixXd &K, const Eigen::MatrixXd &M,
                        const EigenOptions &options)
{
  const Eigen::Index n = K.rows();
  Eigenpairs out;
  if (n == 0)
  {
    out.values.resize(0);
    out.vectors.resize(0, 0);
    return out;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success)
  {
    throw NumericalError("mass matrix not positive definite");
  }
  // L^{-1} K L^{-T} y = lambda y, e = L^{-T} y.
  Eigen::MatrixXd C = llt.matrixL().solve(K);
  C = llt.matrixL().solve(C.transpose()).eval();
  C = 0.5 * (C + C.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  if (es.info() != Eigen::Success)
  {
    throw NumericalError("symmetric eigensolver did not converge");
  }
  const Eigen::VectorXd &all = es.eigenvalues();
  const double largest = all.cwiseAbs().maxCoeff();
  out.zero_threshold = options.zero_tolerance * largest;

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < n; i++)
  {
    if (all[i] > out.zero_threshold)
    {
      keep.push_back(i);
    }
  }
  out.kernel_dimension = static_cast<int>(n - static_cast<Eigen::Index>(keep.size()));
  out.values.resize(static_cast<Eigen::Index>(keep.size()));
  Eigen::MatrixXd Y(n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); k++)
  {
    out.values[k] = all[keep[k]];
    Y.col(k) = es.eigenvectors().col(keep[k]);
  }
  out.vectors = llt.matrixU().solve(Y);
  return out;
}

std::vector<EigenCluster> cluster_eigenpairs(const Eigenpairs &pairs, int n_want,
                                             const EigenOptions &options)
{
  std::vector<EigenCluster> clusters;
  const int n = static_cast<int>(pairs.values.size());
  int i = 0;
  while (i < n && i < n_want)
  {
    int j = i + 1;
    while (j < n && std::abs(pairs.values[j] - pairs.values[j - 1]) <=
                        options.cluster_tolerance * std::max(pairs.values[j], 1.0))
    {
      j++;
    }
    std::vector<double> members(pairs.values.data() + i, pairs.values.data() + j);
    Eigen::MatrixXd basis = pairs.vectors.middleCols(i, j - i);
    for (Eigen::Index c = 0; c < basis.cols(); c++)
    {
      fix_sign(basis.col(c));
    }
    clusters.push_back(
        make_cluster(static_cast<int>(clusters.size()), i, std::move(members), std::move(basis)));
    i = j;
  }
  return clusters;
}

Spectrum solve_reference(const EigenPencil &pencil, int n_want, const EigenOptions &options)
{
  Spectrum s;
  s.pairs = solve_pencil(pencil.K0, pencil.M0, options);
  s.clusters = cluster_eigenpairs(s.pairs, n_want, options);
  return s;
}

SampledSpectrum solve_sampled(const HCurlSpace &space, const GeometryMap<2> &geometry,
                              const DeformationField<2> &field, double t,
                              std::span<const double> z, int n_want,
                              const AssemblyOptions &assembly, const EigenOptions &options)
{
  SampledSpectrum out;
  std::tie(out.K, out.M) = assemble_sampled(space, geometry, field, t, z, assembly);
  out.spectrum.pairs = solve_pencil(out.K, out.M, options);
  out.spectrum.clusters = cluster_eigenpairs(out.spectrum.pairs, n_want, options);
  return out;
}

std::vector<EigenCluster> track_clusters(const Spectrum &reference, const Eigen::MatrixXd &M0,
                                         const Eigenpairs &sampled, double t)
{
  const int n = static_cast<int>(sampled.values.size());
  std::vector<bool> taken(n, false);
  std::vector<EigenCluster> out;
  const double widen = 1.0 + 10.0 * std::abs(t);
  constexpr double slack = 1e-6;
  for (const auto &ref : reference.clusters)
  {
    const double lo = *std::min_element(ref.members.begin(), ref.members.end());
    const double hi = *std::max_element(ref.members.begin(), ref.members.end());
    const double wlo = lo * (1.0 - slack) / widen;
    const double whi = hi * (1.0 + slack) * widen;
    const Eigen::MatrixXd overlap_basis = M0 * ref.basis;

    std::vector<std::pair<double, int>> candidates;
    for (int k = 0; k < n; k++)
    {
      if (!taken[k] && sampled.values[k] >= wlo && sampled.values[k] <= whi)
      {
        const double score = (overlap_basis.transpose() * sampled.vectors.col(k)).squaredNorm();
        candidates.emplace_back(-score, k);
      }
    }
    if (static_cast<int>(candidates.size()) < ref.multiplicity)
    {
      throw NumericalError(fmt::format("cluster {} (lambda = {}) left its tracking window",
                                       ref.index, ref.lambda));
    }
    std::stable_sort(candidates.begin(), candidates.end());
    std::vector<int> chosen;
    for (int m = 0; m < ref.multiplicity; m++)
    {
      chosen.push_back(candidates[m].second);
      taken[candidates[m].second] = true;
    }
    std::sort(chosen.begin(), chosen.end());
    std::vector<double> members;
    Eigen::MatrixXd basis(sampled.vectors.rows(), ref.multiplicity);
    for (int m = 0; m < ref.multiplicity; m++)
    {
      members.push_back(sampled.values[chosen[m]]);
      basis.col(m) = sampled.vectors.col(chosen[m]);
    }
    out.push_back(make_cluster(ref.index, chosen.front(), std::move(members), std::move(basis)));
  }
  return out;
}

}  // namespace shapeuq
