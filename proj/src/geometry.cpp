// SPDX-License-Identifier: Apache-2.0

#include "shapeuq/geometry.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "shapeuq/errors.hpp"
#include "shapeuq/quadrature.hpp"

namespace shapeuq
{

namespace
{

template <int Dim>
void check_invertible(double det, const Vec<Dim> &xhat)
{
  if (!(det > kSingularDeterminant))
  {
    throw NonInvertibleMap(fmt::format("map not invertible at point ({}) with det = {}",
                                     fmt::join(xhat.data(), xhat.data() + Dim, ", "), det));
  }
}

// Visits every Gauss point of the tensor mesh spanned by the basis breakpoints.
template <int Dim, typename Fn>
void for_each_gauss_point(const TensorBasis &basis, int points, Fn &&fn)
{
  std::array<std::vector<double>, 3> coords;
  for (int d = 0; d < Dim; d++)
  {
    const auto b = basis.direction(d).breakpoints();
    for (std::size_t s = 0; s + 1 < b.size(); s++)
    {
      const auto rule = gauss_legendre(points, b[s], b[s + 1]);
      coords[d].insert(coords[d].end(), rule.points.begin(), rule.points.end());
    }
  }
  for (int d = Dim; d < 3; d++)
  {
    coords[d] = {0.0};
  }
  for (double x2 : coords[2])
  {
    for (double x1 : coords[1])
    {
      for (double x0 : coords[0])
      {
        const double all[3] = {x0, x1, x2};
        Vec<Dim> x;
        for (int d = 0; d < Dim; d++)
        {
          x[d] = all[d];
        }
        fn(x);
      }
    }
  }
}

}  // namespace

template <int Dim>
GeometryMap<Dim>::GeometryMap(TensorBasis basis, std::vector<Vec<Dim>> control_points,
                              std::vector<double> weights)
  : basis_(std::move(basis)), control_points_(std::move(control_points)),
    weights_(std::move(weights))
{
  if (basis_.dim() != Dim)
  {
    throw std::invalid_argument("geometry basis dimension does not match the map dimension");
  }
  if (static_cast<int>(control_points_.size()) != basis_.size())
  {
    throw std::invalid_argument(fmt::format("geometry needs {} control points, got {}",
                                            basis_.size(), control_points_.size()));
  }
  if (weights_.empty())
  {
    weights_.assign(control_points_.size(), 1.0);
  }
  if (weights_.size() != control_points_.size())
  {
    throw std::invalid_argument("one weight per control point required");
  }
  for (double w : weights_)
  {
    if (!(w > 0.0))
    {
      throw std::invalid_argument("weights must be positive");
    }
  }
  int max_degree = 0;
  for (int d = 0; d < Dim; d++)
  {
    max_degree = std::max(max_degree, basis_.direction(d).degree());
  }
  for_each_gauss_point<Dim>(basis_, max_degree + 1,
                            [&](const Vec<Dim> &x)
                            { check_invertible<Dim>(evaluate(x).jacobian.determinant(), x); });
}

template <int Dim>
GeometryMap<Dim> GeometryMap<Dim>::box(const Vec<Dim> &lengths)
{
  return affine(Vec<Dim>::Zero(), lengths.asDiagonal());
}

template <int Dim>
GeometryMap<Dim> GeometryMap<Dim>::affine(const Vec<Dim> &origin, const Mat<Dim> &A)
{
  std::vector<KnotVector> dirs(Dim, KnotVector::uniform(1, 1));
  TensorBasis basis(std::move(dirs));
  std::vector<Vec<Dim>> points(basis.size());
  for (int k = 0; k < basis.size(); k++)
  {
    const auto multi = basis.multi_index(k);
    Vec<Dim> corner;
    for (int d = 0; d < Dim; d++)
    {
      corner[d] = multi[d];
    }
    points[k] = origin + A * corner;
  }
  return GeometryMap(std::move(basis), std::move(points));
}

template <int Dim>
bool GeometryMap<Dim>::rational() const
{
  for (double w : weights_)
  {
    if (w != 1.0)
    {
      return true;
    }
  }
  return false;
}

template <int Dim>
MapSample<Dim> GeometryMap<Dim>::evaluate(const Vec<Dim> &xhat) const
{
  const auto s = basis_.evaluate(std::span<const double>(xhat.data(), Dim));
  // Homogeneous sums: numerator N = sum B w P, denominator W = sum B w.
  Vec<Dim> num = Vec<Dim>::Zero();
  Mat<Dim> dnum = Mat<Dim>::Zero();
  double den = 0.0;
  Vec<Dim> dden = Vec<Dim>::Zero();
  for (std::size_t j = 0; j < s.index.size(); j++)
  {
    const double w = weights_[s.index[j]];
    const Vec<Dim> &P = control_points_[s.index[j]];
    num += s.value[j] * w * P;
    den += s.value[j] * w;
    for (int d = 0; d < Dim; d++)
    {
      dnum.col(d) += s.gradient[j][d] * w * P;
      dden[d] += s.gradient[j][d] * w;
    }
  }
  MapSample<Dim> out;
  out.point = num / den;
  out.jacobian = (dnum - out.point * dden.transpose()) / den;
  return out;
}

template <int Dim>
DeformationMode<Dim> DeformationMode<Dim>::catalog(const std::string &name,
                                                   std::vector<double> params)
{
  auto as_index = [&](double v)
  {
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v || i < 0 || i >= Dim)
    {
      throw ConfigError(fmt::format("{}: component index {} out of range", name, v));
    }
    return i;
  };
  auto expect = [&](std::size_t n)
  {
    if (params.size() != n)
    {
      throw ConfigError(fmt::format("{} expects {} parameters, got {}", name, n, params.size()));
    }
  };

  DeformationMode mode;
  mode.name_ = name;
  mode.params_ = params;
  if (name == "axis_scaling")
  {
    expect(2);
    const int axis = as_index(params[0]);
    const double factor = params[1];
    mode.fn_ = [axis, factor](const Vec<Dim> &x)
    {
      ModeSample<Dim> s{Vec<Dim>::Zero(), Mat<Dim>::Zero()};
      s.value[axis] = factor * x[axis];
      s.jacobian(axis, axis) = factor;
      return s;
    };
  }
  else if (name == "shear")
  {
    expect(3);
    const int i = as_index(params[0]);
    const int j = as_index(params[1]);
    if (i == j)
    {
      throw ConfigError("shear needs two distinct components");
    }
    const double factor = params[2];
    mode.fn_ = [i, j, factor](const Vec<Dim> &x)
    {
      ModeSample<Dim> s{Vec<Dim>::Zero(), Mat<Dim>::Zero()};
      s.value[i] = factor * x[j];
      s.jacobian(i, j) = factor;
      return s;
    };
  }
  else if (name == "bump")
  {
    expect(2);
    const int c = as_index(params[0]);
    const double amplitude = params[1];
    mode.fn_ = [c, amplitude](const Vec<Dim> &x)
    {
      ModeSample<Dim> s{Vec<Dim>::Zero(), Mat<Dim>::Zero()};
      Vec<Dim> f;
      Vec<Dim> df;
      for (int k = 0; k < Dim; k++)
      {
        f[k] = 4.0 * x[k] * (1.0 - x[k]);
        df[k] = 4.0 * (1.0 - 2.0 * x[k]);
      }
      s.value[c] = amplitude * f.prod();
      for (int l = 0; l < Dim; l++)
      {
        double g = amplitude * df[l];
        for (int k = 0; k < Dim; k++)
        {
          if (k != l)
          {
            g *= f[k];
          }
        }
        s.jacobian(c, l) = g;
      }
      return s;
    };
  }
  else
  {
    throw ConfigError(fmt::format("unknown closed-form deformation '{}'", name));
  }
  return mode;
}

template <int Dim>
DeformationMode<Dim> DeformationMode<Dim>::function(std::string label, Function fn)
{
  DeformationMode mode;
  mode.name_ = std::move(label);
  mode.fn_ = std::move(fn);
  return mode;
}

template <int Dim>
DeformationMode<Dim> DeformationMode<Dim>::spline(TensorBasis basis,
                                                  std::vector<Vec<Dim>> coefficients)
{
  if (basis.dim() != Dim || static_cast<int>(coefficients.size()) != basis.size())
  {
    throw ConfigError(fmt::format("spline deformation needs {} coefficient vectors, got {}",
                                  basis.size(), coefficients.size()));
  }
  DeformationMode mode;
  mode.name_ = "spline";
  mode.spline_basis_ = std::move(basis);
  mode.coefficients_ = std::move(coefficients);
  return mode;
}

template <int Dim>
ModeSample<Dim> DeformationMode<Dim>::evaluate(const Vec<Dim> &xhat,
                                               const MapSample<Dim> &geometry) const
{
  if (!spline_basis_)
  {
    return fn_(geometry.point);
  }
  const auto s = spline_basis_->evaluate(std::span<const double>(xhat.data(), Dim));
  ModeSample<Dim> out{Vec<Dim>::Zero(), Mat<Dim>::Zero()};
  Mat<Dim> parametric = Mat<Dim>::Zero();
  for (std::size_t j = 0; j < s.index.size(); j++)
  {
    const Vec<Dim> &c = coefficients_[s.index[j]];
    out.value += s.value[j] * c;
    for (int d = 0; d < Dim; d++)
    {
      parametric.col(d) += s.gradient[j][d] * c;
    }
  }
  out.jacobian = parametric * geometry.jacobian.inverse();
  return out;
}

template <int Dim>
DeformedSample<Dim> eval_map(const GeometryMap<Dim> &geometry, const DeformationField<Dim> &field,
                             double t, std::span<const double> z, const Vec<Dim> &xhat)
{
  if (static_cast<int>(z.size()) != field.size())
  {
    throw std::invalid_argument(
        fmt::format("expected {} KL coordinates, got {}", field.size(), z.size()));
  }
  DeformedSample<Dim> out;
  out.reference = geometry.evaluate(xhat);
  check_invertible<Dim>(out.reference.jacobian.determinant(), xhat);
  Vec<Dim> displacement = Vec<Dim>::Zero();
  Mat<Dim> grad = Mat<Dim>::Zero();
  for (int i = 0; i < field.size(); i++)
  {
    if (z[i] == 0.0)
    {
      continue;
    }
    const auto m = field.mode(i).evaluate(xhat, out.reference);
    displacement += z[i] * m.value;
    grad += z[i] * m.jacobian;
  }
  out.point = out.reference.point + t * displacement;
  out.deformation_gradient = Mat<Dim>::Identity() + t * grad;
  out.jacobian = out.deformation_gradient * out.reference.jacobian;
  check_invertible<Dim>(out.deformation_gradient.determinant(), xhat);
  return out;
}

template <int Dim>
Coefficients<Dim> pullback_coefficients(const Mat<Dim> &dG)
{
  const double det = dG.determinant();
  if (!(det > kSingularDeterminant))
  {
    throw NonInvertibleMap(fmt::format("map not invertible (det = {})", det));
  }
  const Mat<Dim> inv = dG.inverse();
  Coefficients<Dim> c;
  if constexpr (Dim == 3)
  {
    const Mat<Dim> g = dG.transpose() * dG / det;
    c.curl = 0.5 * (g + g.transpose());
  }
  else
  {
    c.curl = 1.0 / det;
  }
  const Mat<Dim> m = det * inv * inv.transpose();
  c.mass = 0.5 * (m + m.transpose());
  return c;
}

template <int Dim>
Coefficients<Dim> coefficient_derivatives_general(const Mat<Dim> &dG, const Mat<Dim> &rate)
{
  const Coefficients<Dim> base = pullback_coefficients<Dim>(dG);
  const double det = dG.determinant();
  const Mat<Dim> inv = dG.inverse();
  const double tr = (rate * inv).trace();
  Coefficients<Dim> d;
  if constexpr (Dim == 3)
  {
    const Mat<Dim> RtG = rate.transpose() * dG;
    d.curl = -tr * base.curl + RtG / det + RtG.transpose() / det;
  }
  else
  {
    d.curl = -tr / det;
  }
  const Mat<Dim> B = inv * rate * base.mass;
  d.mass = tr * base.mass - B - B.transpose();
  return d;
}

template <int Dim>
Coefficients<Dim> mode_coefficient_rate(const Mat<Dim> &dV)
{
  const double tr = dV.trace();
  Coefficients<Dim> d;
  d.mass = tr * Mat<Dim>::Identity() - dV - dV.transpose();
  if constexpr (Dim == 3)
  {
    d.curl = -d.mass;
  }
  else
  {
    d.curl = -tr;
  }
  return d;
}

template <int Dim>
std::vector<Coefficients<Dim>> reference_mode_coefficients(const GeometryMap<Dim> &geometry,
                                                           const DeformationField<Dim> &field,
                                                           const Vec<Dim> &xhat)
{
  const auto F = geometry.evaluate(xhat);
  check_invertible<Dim>(F.jacobian.determinant(), xhat);
  std::vector<Coefficients<Dim>> out;
  out.reserve(field.size());
  for (const auto &mode : field.modes())
  {
    out.push_back(mode_coefficient_rate<Dim>(mode.evaluate(xhat, F).jacobian));
  }
  return out;
}

template <int Dim>
CoefficientSample<Dim> coefficients_at(const GeometryMap<Dim> &geometry,
                                       const DeformationField<Dim> &field, double t,
                                       std::span<const double> z, const Vec<Dim> &xhat)
{
  const auto g = eval_map<Dim>(geometry, field, t, z, xhat);
  const auto c = pullback_coefficients<Dim>(g.deformation_gradient);
  CoefficientSample<Dim> out;
  out.point = g.point;
  out.curl = c.curl;
  out.mass = c.mass;
  for (const auto &mode : field.modes())
  {
    const auto rate = mode_coefficient_rate<Dim>(mode.evaluate(xhat, g.reference).jacobian);
    out.curl_rate.push_back(rate.curl);
    out.mass_rate.push_back(rate.mass);
  }
  return out;
}

#define SHAPEUQ_INSTANTIATE_GEOMETRY(D)                                                         \
  template class GeometryMap<D>;                                                                \
  template class DeformationMode<D>;                                                            \
  template DeformedSample<D> eval_map<D>(const GeometryMap<D> &, const DeformationField<D> &,   \
                                         double, std::span<const double>, const Vec<D> &);      \
  template Coefficients<D> pullback_coefficients<D>(const Mat<D> &);                            \
  template Coefficients<D> coefficient_derivatives_general<D>(const Mat<D> &, const Mat<D> &); \
  template Coefficients<D> mode_coefficient_rate<D>(const Mat<D> &);                            \
  template std::vector<Coefficients<D>> reference_mode_coefficients<D>(                         \
      const GeometryMap<D> &, const DeformationField<D> &, const Vec<D> &);                     \
  template CoefficientSample<D> coefficients_at<D>(const GeometryMap<D> &,                      \
                                                   const DeformationField<D> &, double,         \
                                                   std::span<const double>, const Vec<D> &);

SHAPEUQ_INSTANTIATE_GEOMETRY(2)
SHAPEUQ_INSTANTIATE_GEOMETRY(3)

#undef SHAPEUQ_INSTANTIATE_GEOMETRY

}  // namespace shapeuq
