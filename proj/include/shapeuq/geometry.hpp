// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPEUQ_GEOMETRY_HPP
#define SHAPEUQ_GEOMETRY_HPP

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "shapeuq/bspline.hpp"

namespace shapeuq
{

template <int Dim>
using Vec = Eigen::Matrix<double, Dim, 1>;
template <int Dim>
using Mat = Eigen::Matrix<double, Dim, Dim>;

// The curl of a planar field is a scalar, so the curl-curl pullback
// coefficient is a scalar in 2D and a symmetric matrix in 3D.
template <int Dim>
using CurlCoefficient = std::conditional_t<Dim == 3, Mat<3>, double>;

// Jacobian determinants at or below this value are treated as singular.
inline constexpr double kSingularDeterminant = 1e-12;

/// Point and Jacobian of a map from parametric coordinates.
template <int Dim>
struct MapSample
{
  Vec<Dim> point;
  Mat<Dim> jacobian;
};

/// Rational (NURBS) or polynomial tensor-product spline map F: [0,1]^d -> D_0.
///
/// Control points are in meters and ordered like the flat indices of the
/// basis. Weights default to 1. The constructor rejects maps whose Jacobian
/// determinant is not positive at the Gauss points of the basis' own mesh.
template <int Dim>
class GeometryMap
{
public:
  GeometryMap(TensorBasis basis, std::vector<Vec<Dim>> control_points,
              std::vector<double> weights = {});

  /// Axis-aligned box [0, L_1] x ... x [0, L_d] as a degree-1 single-span map.
  static GeometryMap box(const Vec<Dim> &lengths);
  /// x -> origin + A x on the unit box.
  static GeometryMap affine(const Vec<Dim> &origin, const Mat<Dim> &A);

  const TensorBasis &basis() const { return basis_; }
  const std::vector<Vec<Dim>> &control_points() const { return control_points_; }
  const std::vector<double> &weights() const { return weights_; }
  bool rational() const;

  MapSample<Dim> evaluate(const Vec<Dim> &xhat) const;

private:
  TensorBasis basis_;
  std::vector<Vec<Dim>> control_points_;
  std::vector<double> weights_;
};

/// Value and spatial Jacobian (with respect to physical coordinates) of one
/// deformation mode.
template <int Dim>
struct ModeSample
{
  Vec<Dim> value;
  Mat<Dim> jacobian;
};

/// One Karhunen-Loeve deformation mode V_i.
///
/// Closed-form modes are functions of the physical point F(xhat) and carry an
/// analytic spatial Jacobian. Spline modes are coefficient vectors over a
/// tensor basis on the parametric patch; their spatial Jacobian follows from
/// the chain rule through the geometry Jacobian.
template <int Dim>
class DeformationMode
{
public:
  using Function = std::function<ModeSample<Dim>(const Vec<Dim> &)>;

  /// Registered catalog entries:
  ///   axis_scaling <axis> <factor>        V_axis = factor * x_axis
  ///   shear <i> <j> <factor>              V_i = factor * x_j, i != j
  ///   bump <component> <amplitude>        V_c = amplitude * prod_k 4 x_k (1 - x_k)
  static DeformationMode catalog(const std::string &name, std::vector<double> params);
  static DeformationMode function(std::string label, Function fn);
  static DeformationMode spline(TensorBasis basis, std::vector<Vec<Dim>> coefficients);

  bool is_spline() const { return spline_basis_.has_value(); }
  const std::string &name() const { return name_; }
  const std::vector<double> &params() const { return params_; }
  const std::vector<Vec<Dim>> &coefficients() const { return coefficients_; }

  /// Evaluates the mode at parametric point xhat, given the geometry sample
  /// F(xhat), dF(xhat).
  ModeSample<Dim> evaluate(const Vec<Dim> &xhat, const MapSample<Dim> &geometry) const;

private:
  DeformationMode() = default;

  std::string name_;
  std::vector<double> params_;
  Function fn_;
  std::optional<TensorBasis> spline_basis_;
  std::vector<Vec<Dim>> coefficients_;
};

/// V(x; z) = sum_i z_i V_i(x).
template <int Dim>
class DeformationField
{
public:
  DeformationField() = default;
  explicit DeformationField(std::vector<DeformationMode<Dim>> modes) : modes_(std::move(modes)) {}

  int size() const { return static_cast<int>(modes_.size()); }
  const DeformationMode<Dim> &mode(int i) const { return modes_[i]; }
  const std::vector<DeformationMode<Dim>> &modes() const { return modes_; }

private:
  std::vector<DeformationMode<Dim>> modes_;
};

/// Physical point of the deformed domain and Jacobians at a parametric point.
template <int Dim>
struct DeformedSample
{
  Vec<Dim> point;              // F(xhat) + t V(F(xhat); z)
  Mat<Dim> jacobian;           // (I + t sum z_i dV_i) dF, w.r.t. parametric coordinates
  Mat<Dim> deformation_gradient;  // I + t sum z_i dV_i, w.r.t. reference coordinates
  MapSample<Dim> reference;
};

/// Evaluates the perturbed map G_t(x; z) = x + t V(x; z) composed with F.
template <int Dim>
DeformedSample<Dim> eval_map(const GeometryMap<Dim> &geometry, const DeformationField<Dim> &field,
                             double t, std::span<const double> z, const Vec<Dim> &xhat);

/// Pullback coefficients C_t and A_t.
template <int Dim>
struct Coefficients
{
  CurlCoefficient<Dim> curl;
  Mat<Dim> mass;
};

/// Coefficients and their t-derivatives at t = 0, one entry per mode.
template <int Dim>
struct CoefficientSample
{
  Vec<Dim> point;
  CurlCoefficient<Dim> curl;
  Mat<Dim> mass;
  std::vector<CurlCoefficient<Dim>> curl_rate;
  std::vector<Mat<Dim>> mass_rate;
};

/// C = dG^T dG / det dG (3D) or 1 / det dG (2D), A = det dG dG^-1 dG^-T.
template <int Dim>
Coefficients<Dim> pullback_coefficients(const Mat<Dim> &deformation_gradient);

/// C_t, A_t at a parametric point for the map G_t(.; z).
template <int Dim>
CoefficientSample<Dim> coefficients_at(const GeometryMap<Dim> &geometry,
                                       const DeformationField<Dim> &field, double t,
                                       std::span<const double> z, const Vec<Dim> &xhat);

/// dC/dt and dA/dt along dG(t) with dG(t) given at one t together with its
/// rate d/dt dG(t).
template <int Dim>
Coefficients<Dim> coefficient_derivatives_general(const Mat<Dim> &deformation_gradient,
                                                  const Mat<Dim> &rate);

/// Per-mode derivatives at the reference configuration:
/// [D_t A]_i = tr(dV_i) I - dV_i - dV_i^T, and [D_t C]_i = -[D_t A]_i (3D) or
/// -tr(dV_i) (2D).
template <int Dim>
std::vector<Coefficients<Dim>> reference_mode_coefficients(const GeometryMap<Dim> &geometry,
                                                           const DeformationField<Dim> &field,
                                                           const Vec<Dim> &xhat);

/// Same as above from the spatial mode Jacobian directly.
template <int Dim>
Coefficients<Dim> mode_coefficient_rate(const Mat<Dim> &mode_jacobian);

}  // namespace shapeuq

#endif  // SHAPEUQ_GEOMETRY_HPP
