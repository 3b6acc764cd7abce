// SPDX-License-Identifier: Apache-2.0

#include "shapeuq/uq.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "shapeuq/errors.hpp"
#include "shapeuq/parallel.hpp"

namespace shapeuq
{

namespace
{

Eigen::Map<const Eigen::VectorXd> vec(const Eigen::MatrixXd &A)
{
  return {A.data(), A.size()};
}

Eigen::VectorXd sorted_eigenvalues(const Eigen::MatrixXd &A)
{
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (A + A.transpose()),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

Eigen::MatrixXd symmetric_part(const Eigen::MatrixXd &A) { return 0.5 * (A + A.transpose()); }

// Sum of f(idx[k]) for k in [lo, hi) by recursive halving.
template <typename F>
Eigen::ArrayXd pairwise_sum(const std::vector<int> &idx, std::size_t lo, std::size_t hi, F &&f)
{
  if (hi - lo == 1)
  {
    return f(idx[lo]);
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(idx, lo, mid, f) + pairwise_sum(idx, mid, hi, f);
}

struct SampleMoments
{
  Eigen::ArrayXd mean;
  Eigen::ArrayXd variance;  // unbiased
  Eigen::ArrayXd m4;        // central fourth moment (1/n)
};

// Moments of data[s] over the valid indices. Values are shifted by the first
// sample so that identical samples give exactly zero variance.
SampleMoments moments(const std::vector<Eigen::ArrayXd> &data, const std::vector<int> &valid)
{
  const double n = static_cast<double>(valid.size());
  const Eigen::ArrayXd &x0 = data[valid.front()];
  const Eigen::ArrayXd mean_shift =
      pairwise_sum(valid, 0, valid.size(), [&](int s) { return Eigen::ArrayXd(data[s] - x0); }) /
      n;
  SampleMoments out;
  out.mean = x0 + mean_shift;
  out.variance = pairwise_sum(valid, 0, valid.size(),
                              [&](int s)
                              {
                                const Eigen::ArrayXd c = data[s] - x0 - mean_shift;
                                return Eigen::ArrayXd(c.square());
                              }) /
                 (n - 1.0);
  out.m4 = pairwise_sum(valid, 0, valid.size(),
                        [&](int s)
                        {
                          const Eigen::ArrayXd c = data[s] - x0 - mean_shift;
                          return Eigen::ArrayXd(c.square().square());
                        }) /
           n;
  return out;
}

// Orthogonal Q maximizing trace(Q^T E_s^T M0 E_ref).
Eigen::MatrixXd procrustes(const Eigen::MatrixXd &overlap)
{
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(overlap, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

double projector_distance(const Eigen::MatrixXd &E, const Eigen::MatrixXd &M0,
                          const Eigen::MatrixXd &ref_M0)
{
  const Eigen::Index m = E.cols();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetric_part(E.transpose() * M0 * E));
  const Eigen::MatrixXd inv_sqrt = es.eigenvectors() *
                                   es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                                   es.eigenvectors().transpose();
  const Eigen::MatrixXd overlap = (E * inv_sqrt).transpose() * ref_M0;
  const double d2 = 2.0 * static_cast<double>(m) - 2.0 * overlap.squaredNorm();
  return std::sqrt(std::max(d2, 0.0));
}

void check_skipped(int skipped, int total)
{
  if (100 * skipped > total)
  {
    throw NumericalError(fmt::format(
        "{} of {} samples have a non-invertible map (more than 1%)", skipped, total));
  }
}

}  // namespace

// ---------------------------------------------------------------------------

Eigen::MatrixXd ClusterUq::eigenvalue_covariance() const
{
  const int m = multiplicity;
  Eigen::MatrixXd c(m, m);
  for (int k = 0; k < m; k++)
  {
    for (int l = 0; l < m; l++)
    {
      c(k, l) = covariance(k + m * k, l + m * l);
    }
  }
  return c;
}

ClusterUq propagate(const SensitivityResult &result, double t)
{
  if (!(t >= 0.0))
  {
    throw std::invalid_argument("propagate: t must be non-negative");
  }
  const int m = result.multiplicity();
  const double scale = t * t * kUniformVariance;

  ClusterUq out;
  out.cluster_index = result.cluster_index;
  out.lambda = result.lambda;
  out.frequency_hz = frequency_hz(result.lambda);
  out.multiplicity = m;
  out.basis = result.basis;
  out.mean = result.lambda * Eigen::MatrixXd::Identity(m, m);
  out.covariance = Eigen::MatrixXd::Zero(m * m, m * m);
  out.vector_variance = Eigen::MatrixXd::Zero(result.basis.rows(), m);
  for (int i = 0; i < result.modes(); i++)
  {
    const auto v = vec(result.eigenvalue_derivatives[i]);
    out.covariance.noalias() += v * v.transpose();
    out.vector_variance.array() += result.eigenvector_derivatives[i].array().square();
  }
  out.covariance *= scale;
  out.vector_variance *= scale;
  out.variance.resize(m);
  for (int j = 0; j < m; j++)
  {
    out.variance[j] = out.covariance(j + m * j, j + m * j);
  }
  return out;
}

UqSummary propagate(std::span<const SensitivityResult> results, double t)
{
  UqSummary s;
  s.t = t;
  s.modes = results.empty() ? 0 : results.front().modes();
  for (const auto &r : results)
  {
    s.clusters.push_back(propagate(r, t));
  }
  return s;
}

Eigen::MatrixXd vector_covariance(const SensitivityResult &result, double t, int column)
{
  const Eigen::Index n = result.basis.rows();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < result.modes(); i++)
  {
    const auto d = result.eigenvector_derivatives[i].col(column);
    c.noalias() += d * d.transpose();
  }
  return t * t * kUniformVariance * c;
}

std::vector<VarianceFieldPoint> variance_field(const HCurlSpace &space,
                                               const GeometryMap<2> &geometry,
                                               const SensitivityResult &result, double t, int grid)
{
  if (grid < 2)
  {
    throw std::invalid_argument("variance field grid needs at least 2 points per direction");
  }
  const double scale = t * t * kUniformVariance;
  std::vector<VarianceFieldPoint> out;
  out.reserve(static_cast<std::size_t>(grid * grid));
  for (int k = 0; k < grid; k++)
  {
    for (int i = 0; i < grid; i++)
    {
      const Vec2 xhat(static_cast<double>(i) / (grid - 1), static_cast<double>(k) / (grid - 1));
      const Vec2 x = geometry.evaluate(xhat).point;
      VarianceFieldPoint p{x[0], x[1], 0.0, 0.0, 0.0};
      for (int mode = 0; mode < result.modes(); mode++)
      {
        for (int j = 0; j < result.multiplicity(); j++)
        {
          const Vec2 f =
              evaluate_field(space, geometry, result.eigenvector_derivatives[mode].col(j), xhat);
          p.var_ex += scale * f[0] * f[0];
          p.var_ey += scale * f[1] * f[1];
        }
      }
      p.var_magnitude = p.var_ex + p.var_ey;
      out.push_back(p);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace
{

// (pi^2 k^2 / L^2 of the scaled side, same for the fixed side)
std::pair<double, double> scaled_parts(const RectangleScaling &rect, int m, int n)
{
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const double px = pi2 * m * m / (rect.a * rect.a);
  const double py = pi2 * n * n / (rect.b * rect.b);
  return rect.kind == ScalingKind::width ? std::pair{px, py} : std::pair{py, px};
}

}  // namespace

std::pair<double, double> inverse_square_moments(double tau)
{
  if (!(std::abs(tau) < 1.0))
  {
    throw NumericalError("deformation not uniformly invertible");
  }
  const double q = 1.0 - tau * tau;
  return {1.0 / q, (4.0 * tau * tau / 3.0) / (q * q * q)};
}

RectangleOracle analytic_rectangle_oracle(const RectangleScaling &rect, int m, int n, double t,
                                          double z)
{
  if (m == 0 && n == 0)
  {
    throw std::invalid_argument("mode (0, 0) is not an eigenmode");
  }
  const double tau = t * rect.factor;
  if (!(std::abs(t) < 1.0) || !(std::abs(tau) < 1.0))
  {
    throw NumericalError("deformation not uniformly invertible");
  }
  const auto [alpha, beta] = scaled_parts(rect, m, n);
  const double s = 1.0 + tau * z;
  const auto [e, v] = inverse_square_moments(tau);
  return {alpha / (s * s) + beta, alpha * e + beta, alpha * alpha * v};
}

Eigen::VectorXd ClusterOracle::mean(double tau) const
{
  const double e = inverse_square_moments(tau).first;
  Eigen::VectorXd out(static_cast<Eigen::Index>(alpha.size()));
  for (std::size_t k = 0; k < alpha.size(); k++)
  {
    out[k] = alpha[k] * e + beta[k];
  }
  return out;
}

Eigen::MatrixXd ClusterOracle::covariance(double tau) const
{
  const double v = inverse_square_moments(tau).second;
  const Eigen::Map<const Eigen::VectorXd> a(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
  return v * a * a.transpose();
}

ClusterOracle rectangle_cluster_oracle(const RectangleScaling &rect, double lambda,
                                       int multiplicity, bool calibrate)
{
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const int kmax =
      static_cast<int>(std::ceil(std::sqrt(2.0 * lambda / pi2) * std::max(rect.a, rect.b))) + 2;
  struct Entry
  {
    double lambda;
    int m, n;
  };
  std::vector<Entry> entries;
  for (int m = 0; m <= kmax; m++)
  {
    for (int n = 0; n <= kmax; n++)
    {
      if (m == 0 && n == 0)
      {
        continue;
      }
      entries.push_back({analytic_rectangle_oracle(rect, m, n, 0.0, 0.0).lambda, m, n});
    }
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry &x, const Entry &y) { return x.lambda < y.lambda; });

  ClusterOracle best;
  double best_gap = 1e-2;
  bool found = false;
  for (std::size_t i = 0; i < entries.size();)
  {
    std::size_t j = i + 1;
    while (j < entries.size() && entries[j].lambda - entries[j - 1].lambda <= 1e-9 * entries[j].lambda)
    {
      j++;
    }
    const double group = entries[i].lambda;
    const double gap = std::abs(group - lambda) / lambda;
    if (static_cast<int>(j - i) == multiplicity && gap <= best_gap)
    {
      best = {};
      best_gap = gap;
      found = true;
      const double r = calibrate ? lambda / group : 1.0;
      for (std::size_t k = i; k < j; k++)
      {
        const auto [alpha, beta] = scaled_parts(rect, entries[k].m, entries[k].n);
        best.modes.emplace_back(entries[k].m, entries[k].n);
        best.alpha.push_back(r * alpha);
        best.beta.push_back(r * beta);
      }
    }
    i = j;
  }
  if (!found)
  {
    throw NumericalError(fmt::format(
        "no analytic rectangle eigenvalue with multiplicity {} near {}", multiplicity, lambda));
  }
  return best;
}

// ---------------------------------------------------------------------------

std::vector<double> sample_uniform(std::uint64_t seed, int modes)
{
  std::mt19937_64 rng(seed);
  std::vector<double> z(static_cast<std::size_t>(modes));
  for (auto &v : z)
  {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = 2.0 * u - 1.0;
  }
  return z;
}

McEstimate monte_carlo(const HCurlSpace &space, const GeometryMap<2> &geometry,
                       const DeformationField<2> &field, const Spectrum &reference,
                       const Eigen::MatrixXd &M0, double t, int n_samples,
                       std::uint64_t base_seed, const McOptions &options)
{
  if (n_samples < 2)
  {
    throw std::invalid_argument("Monte Carlo needs at least 2 samples");
  }
  const std::size_t nc = reference.clusters.size();
  std::vector<Eigen::MatrixXd> ref_M0(nc);
  for (std::size_t c = 0; c < nc; c++)
  {
    ref_M0[c] = M0 * reference.clusters[c].basis;
  }

  // data[c][s] = [sorted eigenvalues (m) | aligned coefficients (N m) | projector distance]
  std::vector<std::vector<Eigen::ArrayXd>> data(nc, std::vector<Eigen::ArrayXd>(n_samples));
  std::vector<char> ok(static_cast<std::size_t>(n_samples), 0);

  parallel_for(static_cast<std::size_t>(n_samples), options.threads,
               [&](std::size_t s)
               {
                 const auto z = sample_uniform(base_seed + s, field.size());
                 Eigenpairs pairs;
                 try
                 {
                   const auto [K, M] = assemble_sampled(space, geometry, field, t, z);
                   pairs = solve_pencil(K, M, options.eigen);
                 }
                 catch (const NonInvertibleMap &)
                 {
                   return;
                 }
                 const auto tracked = track_clusters(reference, M0, pairs, t);
                 for (std::size_t c = 0; c < nc; c++)
                 {
                   const auto &cl = tracked[c];
                   const Eigen::Index m = cl.multiplicity;
                   const Eigen::Index n = cl.basis.rows();
                   const Eigen::MatrixXd Q = procrustes(cl.basis.transpose() * ref_M0[c]);
                   const Eigen::MatrixXd aligned = cl.basis * Q;
                   Eigen::ArrayXd row(m + n * m + 1);
                   for (Eigen::Index k = 0; k < m; k++)
                   {
                     row[k] = cl.members[k];
                   }
                   row.segment(m, n * m) = vec(aligned).array();
                   row[m + n * m] = projector_distance(cl.basis, M0, ref_M0[c]);
                   data[c][s] = std::move(row);
                 }
                 ok[s] = 1;
               });

  std::vector<int> valid;
  for (int s = 0; s < n_samples; s++)
  {
    if (ok[s])
    {
      valid.push_back(s);
    }
  }
  McEstimate est;
  est.n_samples = n_samples;
  est.n_skipped = n_samples - static_cast<int>(valid.size());
  est.seed = base_seed;
  est.t = t;
  check_skipped(est.n_skipped, n_samples);
  if (valid.size() < 2)
  {
    throw NumericalError("fewer than 2 valid Monte Carlo samples");
  }
  const double n = static_cast<double>(valid.size());
  for (std::size_t c = 0; c < nc; c++)
  {
    const auto &ref = reference.clusters[c];
    const Eigen::Index m = ref.multiplicity;
    const Eigen::Index N = ref.basis.rows();
    const SampleMoments mo = moments(data[c], valid);

    McClusterEstimate e;
    e.cluster_index = ref.index;
    e.multiplicity = static_cast<int>(m);
    e.mean = mo.mean.head(m).matrix();
    e.variance = mo.variance.head(m).matrix();
    e.se_mean = (mo.variance.head(m) / n).sqrt().matrix();
    const Eigen::ArrayXd v2 = mo.variance.head(m).square();
    e.se_variance =
        ((mo.m4.head(m) - (n - 3.0) / (n - 1.0) * v2) / n).max(0.0).sqrt().matrix();
    e.vector_mean = Eigen::Map<const Eigen::MatrixXd>(mo.mean.data() + m, N, m);
    e.vector_variance = Eigen::Map<const Eigen::MatrixXd>(mo.variance.data() + m, N, m);
    e.projector_distance = mo.mean[m + N * m];
    est.clusters.push_back(std::move(e));
  }
  return est;
}

// ---------------------------------------------------------------------------

SlopeFit fit_slope(std::span<const double> t, std::span<const double> err, double noise_floor)
{
  SlopeFit fit;
  const std::size_t use = (t.size() + 1) / 2;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < use && i < err.size(); i++)
  {
    if (std::isfinite(err[i]) && err[i] > noise_floor && t[i] > 0.0)
    {
      lx.push_back(std::log(t[i]));
      ly.push_back(std::log(err[i]));
    }
  }
  fit.points = static_cast<int>(lx.size());
  if (lx.size() < 3)
  {
    fit.reason = fmt::format("only {} of {} points above the noise floor {:.3g}", lx.size(), use,
                             noise_floor);
    return fit;
  }
  const double k = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); i++)
  {
    mx += lx[i];
    my += ly[i];
  }
  mx /= k;
  my /= k;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); i++)
  {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx <= 0.0)
  {
    fit.reason = "amplitudes are not distinct";
    return fit;
  }
  fit.slope = sxy / sxx;
  return fit;
}

namespace
{

// Errors against the closed-form statistics of the rectangle.
void analytic_errors(const SensitivityResult &sens, const RectangleScaling &rect,
                     std::span<const double> t_list, std::vector<double> &err_mean,
                     std::vector<double> &err_var)
{
  const int m = sens.multiplicity();
  const ClusterOracle oracle = rectangle_cluster_oracle(rect, sens.lambda, m, true);
  for (const double t : t_list)
  {
    const ClusterUq uq = propagate(sens, t);
    const double tau = t * rect.factor;

    Eigen::VectorXd exact_mean = oracle.mean(tau);
    std::sort(exact_mean.begin(), exact_mean.end());
    err_mean.push_back((sorted_eigenvalues(uq.mean) - exact_mean).norm());

    const Eigen::MatrixXd member_cov = oracle.covariance(tau);
    Eigen::MatrixXd exact_cov = Eigen::MatrixXd::Zero(m * m, m * m);
    for (int k = 0; k < m; k++)
    {
      for (int l = 0; l < m; l++)
      {
        exact_cov(k + m * k, l + m * l) = member_cov(k, l);
      }
    }
    err_var.push_back(
        (sorted_eigenvalues(uq.covariance) - sorted_eigenvalues(exact_cov)).norm());
  }
}

// Errors against antithetic Monte Carlo with the linearization as control
// variate. Pair k uses z_k from seed + k and its mirror -z_k at every t.
void monte_carlo_errors(const HCurlSpace &space, const GeometryMap<2> &geometry,
                        const DeformationField<2> &field, const Spectrum &reference,
                        const Eigen::MatrixXd &M0, std::span<const SensitivityResult> sens,
                        std::span<const double> t_list, const ConvergenceOptions &options,
                        std::vector<std::vector<double>> &err_mean,
                        std::vector<std::vector<double>> &err_var)
{
  const int pairs = std::max(1, (options.n_samples + 1) / 2);
  const int total = 2 * pairs;
  const std::size_t nc = sens.size();
  std::vector<Eigen::MatrixXd> ref_M0(nc);
  for (std::size_t c = 0; c < nc; c++)
  {
    ref_M0[c] = M0 * sens[c].basis;
  }

  for (const double t : t_list)
  {
    // sampled[c][s], linear[c][s]: vectorized m x m matrices
    std::vector<std::vector<Eigen::ArrayXd>> sampled(nc, std::vector<Eigen::ArrayXd>(total));
    std::vector<std::vector<Eigen::ArrayXd>> linear(nc, std::vector<Eigen::ArrayXd>(total));
    std::vector<char> ok(static_cast<std::size_t>(pairs), 1);
    parallel_for(static_cast<std::size_t>(pairs), options.threads,
                 [&](std::size_t k)
                 {
                   const auto zp = sample_uniform(options.seed + k, field.size());
                   for (int sign = 0; sign < 2; sign++)
                   {
                     std::vector<double> z = zp;
                     if (sign == 1)
                     {
                       for (auto &v : z)
                       {
                         v = -v;
                       }
                     }
                     Eigenpairs pairs_s;
                     try
                     {
                       const auto [K, M] = assemble_sampled(space, geometry, field, t, z);
                       pairs_s = solve_pencil(K, M);
                     }
                     catch (const NonInvertibleMap &)
                     {
                       ok[k] = 0;
                       return;
                     }
                     const auto tracked = track_clusters(reference, M0, pairs_s, t);
                     const std::size_t s = 2 * k + sign;
                     for (std::size_t c = 0; c < nc; c++)
                     {
                       const auto &cl = tracked[sens[c].cluster_index];
                       const Eigen::MatrixXd Q = procrustes(cl.basis.transpose() * ref_M0[c]);
                       const Eigen::Map<const Eigen::VectorXd> mem(
                           cl.members.data(), static_cast<Eigen::Index>(cl.members.size()));
                       const Eigen::MatrixXd A = Q.transpose() * mem.asDiagonal() * Q;
                       const auto [dl, de] = directional_derivative(sens[c], z);
                       const Eigen::Index m = sens[c].multiplicity();
                       const Eigen::MatrixXd L =
                           sens[c].lambda * Eigen::MatrixXd::Identity(m, m) + t * symmetric_part(dl);
                       sampled[c][s] = vec(symmetric_part(A)).array();
                       linear[c][s] = vec(L).array();
                     }
                   }
                 });
    std::vector<int> valid;
    int skipped = 0;
    for (int k = 0; k < pairs; k++)
    {
      if (ok[k])
      {
        valid.push_back(2 * k);
        valid.push_back(2 * k + 1);
      }
      else
      {
        skipped += 2;
      }
    }
    check_skipped(skipped, total);
    if (valid.size() < 2)
    {
      throw NumericalError("fewer than 2 valid Monte Carlo samples");
    }
    const double n = static_cast<double>(valid.size());
    for (std::size_t c = 0; c < nc; c++)
    {
      const Eigen::Index m = sens[c].multiplicity();
      auto mean_of = [&](const std::vector<Eigen::ArrayXd> &x)
      {
        return Eigen::VectorXd(
            pairwise_sum(valid, 0, valid.size(), [&](int s) { return x[s]; }) / n);
      };
      auto cov_of = [&](const std::vector<Eigen::ArrayXd> &x, const Eigen::VectorXd &mu)
      {
        const Eigen::ArrayXd flat = pairwise_sum(valid, 0, valid.size(),
                                                 [&](int s)
                                                 {
                                                   const Eigen::VectorXd d = x[s].matrix() - mu;
                                                   const Eigen::MatrixXd o = d * d.transpose();
                                                   return Eigen::ArrayXd(vec(o).array());
                                                 }) /
                                    (n - 1.0);
        return Eigen::MatrixXd(Eigen::Map<const Eigen::MatrixXd>(flat.data(), m * m, m * m));
      };
      const Eigen::VectorXd mu_s = mean_of(sampled[c]);
      const Eigen::VectorXd mu_l = mean_of(linear[c]);
      const Eigen::MatrixXd ms = Eigen::Map<const Eigen::MatrixXd>(mu_s.data(), m, m);
      const Eigen::MatrixXd ml = Eigen::Map<const Eigen::MatrixXd>(mu_l.data(), m, m);
      err_mean[c].push_back((sorted_eigenvalues(ms) - sorted_eigenvalues(ml)).norm());
      err_var[c].push_back((sorted_eigenvalues(cov_of(sampled[c], mu_s)) -
                            sorted_eigenvalues(cov_of(linear[c], mu_l)))
                               .norm());
    }
  }
}

}  // namespace

ConvergenceResult convergence_study(const HCurlSpace &space, const GeometryMap<2> &geometry,
                                    const DeformationField<2> &field, const Spectrum &reference,
                                    const Eigen::MatrixXd &M0,
                                    std::span<const SensitivityResult> sensitivities,
                                    std::span<const double> t_list,
                                    const ConvergenceOptions &options)
{
  if (t_list.size() < 4)
  {
    throw ConfigError("need ≥ 4 amplitudes");
  }
  for (std::size_t i = 0; i < t_list.size(); i++)
  {
    if (!(t_list[i] > 0.0 && t_list[i] < 1.0))
    {
      throw ConfigError(fmt::format("amplitude {} outside (0, 1)", t_list[i]));
    }
    if (i > 0 && !(t_list[i] > t_list[i - 1]))
    {
      throw ConfigError("amplitudes must be strictly ascending");
    }
  }

  const std::size_t nc = sensitivities.size();
  std::vector<std::vector<double>> err_mean(nc), err_var(nc);
  std::string kind;
  if (options.analytic)
  {
    kind = "analytic";
    for (std::size_t c = 0; c < nc; c++)
    {
      analytic_errors(sensitivities[c], *options.analytic, t_list, err_mean[c], err_var[c]);
    }
  }
  else
  {
    kind = "monte_carlo";
    monte_carlo_errors(space, geometry, field, reference, M0, sensitivities, t_list, options,
                       err_mean, err_var);
  }

  ConvergenceResult out;
  for (std::size_t i = 0; i < t_list.size(); i++)
  {
    for (std::size_t c = 0; c < nc; c++)
    {
      out.rows.push_back(
          {t_list[i], sensitivities[c].cluster_index, err_mean[c][i], err_var[c][i], kind});
    }
  }
  for (std::size_t c = 0; c < nc; c++)
  {
    const double lambda = sensitivities[c].lambda;
    out.slopes.push_back({sensitivities[c].cluster_index,
                          fit_slope(t_list, err_mean[c], 1e-12 * lambda),
                          fit_slope(t_list, err_var[c], 1e-12 * lambda * lambda)});
  }
  return out;
}

}  // namespace shapeuq
