// SPDX-License-Identifier: Apache-2.0

#include "shapeuq/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace shapeuq
{

KnotVector::KnotVector(int degree, std::vector<double> knots, double theta)
  : degree_(degree), knots_(std::move(knots)), theta_(theta)
{
  if (degree_ < 0)
  {
    throw std::invalid_argument("knot vector degree must be non-negative");
  }
  if (theta_ < 1.0)
  {
    throw std::invalid_argument("quasi-uniformity bound theta must be >= 1");
  }
  const int p = degree_;
  const int n = static_cast<int>(knots_.size());
  if (n - p - 1 < p + 1)
  {
    throw std::invalid_argument("knot vector needs at least 2p+2 entries");
  }
  for (int j = 0; j < n; j++)
  {
    if (!(knots_[j] >= 0.0 && knots_[j] <= 1.0))
    {
      throw std::invalid_argument("knots must lie in [0, 1]");
    }
    if (j > 0 && knots_[j] < knots_[j - 1])
    {
      throw std::invalid_argument("knots must be non-decreasing");
    }
  }
  for (int j = 0; j <= p; j++)
  {
    if (knots_[j] != 0.0 || knots_[n - 1 - j] != 1.0)
    {
      throw std::invalid_argument("knot vector must be (p+1)-open on [0, 1]");
    }
  }
  // Interior multiplicity at most p keeps the spline space continuous; for
  // p = 0 the first/last check above already forces simple interior knots.
  for (int j = p + 1; j < n - p - 1;)
  {
    int mult = 1;
    while (j + mult < n - p - 1 && knots_[j + mult] == knots_[j])
    {
      mult++;
    }
    if (knots_[j] == 0.0 || knots_[j] == 1.0 || mult > std::max(p, 1))
    {
      throw std::invalid_argument("interior knot multiplicity too high");
    }
    j += mult;
  }
  const auto b = breakpoints();
  for (std::size_t s = 0; s + 2 < b.size(); s++)
  {
    const double ratio = (b[s + 1] - b[s]) / (b[s + 2] - b[s + 1]);
    if (ratio > theta_ || ratio < 1.0 / theta_)
    {
      throw std::invalid_argument("knot vector is not locally quasi-uniform (ratio " +
                                  std::to_string(ratio) + ")");
    }
  }
}

KnotVector KnotVector::uniform(int degree, int spans)
{
  if (spans < 1)
  {
    throw std::invalid_argument("need at least one span");
  }
  std::vector<double> knots(degree + 1, 0.0);
  for (int s = 1; s < spans; s++)
  {
    knots.push_back(static_cast<double>(s) / spans);
  }
  knots.insert(knots.end(), degree + 1, 1.0);
  return KnotVector(degree, std::move(knots));
}

std::vector<double> KnotVector::breakpoints() const
{
  std::vector<double> b;
  for (double k : knots_)
  {
    if (b.empty() || k > b.back())
    {
      b.push_back(k);
    }
  }
  return b;
}

int KnotVector::find_span(double x) const
{
  const int n = size() - 1;
  if (x >= knots_[n + 1])
  {
    // Last non-empty span; skip back over repeated end knots.
    int j = n;
    while (j > degree_ && knots_[j] == knots_[j + 1])
    {
      j--;
    }
    return j;
  }
  if (x <= knots_[degree_])
  {
    return degree_;
  }
  const auto it = std::upper_bound(knots_.begin() + degree_, knots_.begin() + n + 1, x);
  return static_cast<int>(it - knots_.begin()) - 1;
}

KnotVector KnotVector::refined() const
{
  std::vector<double> knots;
  knots.reserve(2 * knots_.size());
  for (std::size_t j = 0; j < knots_.size(); j++)
  {
    if (j > 0 && knots_[j] > knots_[j - 1])
    {
      knots.push_back(0.5 * (knots_[j] + knots_[j - 1]));
    }
    knots.push_back(knots_[j]);
  }
  return KnotVector(degree_, std::move(knots), theta_);
}

BasisValues eval_basis(const KnotVector &kv, double x, int nderiv)
{
  const int p = kv.degree();
  if (nderiv > p)
  {
    throw std::invalid_argument("derivative order exceeds degree");
  }
  if (nderiv < 0)
  {
    throw std::invalid_argument("derivative order must be non-negative");
  }
  if (!(x >= 0.0 && x <= 1.0))
  {
    throw std::invalid_argument("evaluation point outside [0, 1]");
  }
  const auto U = kv.knots();
  const int span = kv.find_span(x);

  // Triangular table of basis values (upper) and knot differences (lower).
  Eigen::MatrixXd ndu(p + 1, p + 1);
  std::vector<double> left(p + 1), right(p + 1);
  ndu(0, 0) = 1.0;
  for (int j = 1; j <= p; j++)
  {
    left[j] = x - U[span + 1 - j];
    right[j] = U[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; r++)
    {
      ndu(j, r) = right[r + 1] + left[j - r];
      const double temp = ndu(r, j - 1) / ndu(j, r);
      ndu(r, j) = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu(j, j) = saved;
  }

  BasisValues out;
  out.first = span - p;
  out.values.resize(nderiv + 1, p + 1);
  for (int j = 0; j <= p; j++)
  {
    out.values(0, j) = ndu(j, p);
  }

  Eigen::MatrixXd a(2, p + 1);
  for (int r = 0; r <= p; r++)
  {
    int s1 = 0;
    int s2 = 1;
    a(0, 0) = 1.0;
    for (int k = 1; k <= nderiv; k++)
    {
      double d = 0.0;
      const int rk = r - k;
      const int pk = p - k;
      if (r >= k)
      {
        a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
        d = a(s2, 0) * ndu(rk, pk);
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; j++)
      {
        a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
        d += a(s2, j) * ndu(rk + j, pk);
      }
      if (r <= pk)
      {
        a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
        d += a(s2, k) * ndu(r, pk);
      }
      out.values(k, r) = d;
      std::swap(s1, s2);
    }
  }
  double factor = p;
  for (int k = 1; k <= nderiv; k++)
  {
    out.values.row(k) *= factor;
    factor *= (p - k);
  }
  return out;
}

std::vector<double> greville_points(const KnotVector &kv)
{
  const int p = kv.degree();
  const auto U = kv.knots();
  std::vector<double> g(kv.size());
  for (int j = 0; j < kv.size(); j++)
  {
    if (p == 0)
    {
      g[j] = 0.5 * (U[j] + U[j + 1]);
      continue;
    }
    double sum = 0.0;
    for (int i = 1; i <= p; i++)
    {
      sum += U[j + i];
    }
    g[j] = sum / p;
  }
  return g;
}

KnotVector truncate_knots(const KnotVector &kv)
{
  if (kv.degree() == 0)
  {
    throw std::invalid_argument("cannot truncate degree-0 space");
  }
  const auto U = kv.knots();
  return KnotVector(kv.degree() - 1, std::vector<double>(U.begin() + 1, U.end() - 1), kv.theta());
}

TensorBasis::TensorBasis(std::vector<KnotVector> directions) : directions_(std::move(directions))
{
  if (directions_.empty() || directions_.size() > 3)
  {
    throw std::invalid_argument("tensor basis dimension must be 1, 2 or 3");
  }
}

int TensorBasis::size() const
{
  int n = 1;
  for (const auto &kv : directions_)
  {
    n *= kv.size();
  }
  return n;
}

int TensorBasis::flat_index(std::span<const int> multi) const
{
  int flat = 0;
  int stride = 1;
  for (int d = 0; d < dim(); d++)
  {
    flat += multi[d] * stride;
    stride *= directions_[d].size();
  }
  return flat;
}

std::array<int, 3> TensorBasis::multi_index(int flat) const
{
  std::array<int, 3> multi{0, 0, 0};
  for (int d = 0; d < dim(); d++)
  {
    multi[d] = flat % directions_[d].size();
    flat /= directions_[d].size();
  }
  return multi;
}

TensorBasis::Sample TensorBasis::evaluate(std::span<const double> x) const
{
  const int d = dim();
  std::array<BasisValues, 3> uni;
  for (int k = 0; k < d; k++)
  {
    uni[k] = eval_basis(directions_[k], x[k], directions_[k].degree() >= 1 ? 1 : 0);
  }
  std::array<int, 3> count{1, 1, 1};
  for (int k = 0; k < d; k++)
  {
    count[k] = uni[k].count();
  }
  auto deriv = [&](int k, int j) { return uni[k].values.rows() > 1 ? uni[k].values(1, j) : 0.0; };

  Sample s;
  const int total = count[0] * count[1] * count[2];
  s.index.reserve(total);
  s.value.reserve(total);
  s.gradient.reserve(total);
  for (int j2 = 0; j2 < count[2]; j2++)
  {
    for (int j1 = 0; j1 < count[1]; j1++)
    {
      for (int j0 = 0; j0 < count[0]; j0++)
      {
        const std::array<int, 3> local{j0, j1, j2};
        std::array<int, 3> multi{0, 0, 0};
        std::array<double, 3> val{1.0, 1.0, 1.0};
        std::array<double, 3> der{0.0, 0.0, 0.0};
        for (int k = 0; k < d; k++)
        {
          multi[k] = uni[k].index(local[k]);
          val[k] = uni[k].values(0, local[k]);
          der[k] = deriv(k, local[k]);
        }
        std::array<double, 3> grad{0.0, 0.0, 0.0};
        for (int k = 0; k < d; k++)
        {
          double g = der[k];
          for (int l = 0; l < d; l++)
          {
            if (l != k)
            {
              g *= val[l];
            }
          }
          grad[k] = g;
        }
        s.index.push_back(flat_index(std::span<const int>(multi.data(), d)));
        s.value.push_back(val[0] * val[1] * val[2]);
        s.gradient.push_back(grad);
      }
    }
  }
  return s;
}

TensorBasis TensorBasis::refined() const
{
  std::vector<KnotVector> dirs;
  for (const auto &kv : directions_)
  {
    dirs.push_back(kv.refined());
  }
  return TensorBasis(std::move(dirs));
}

}  // namespace shapeuq
