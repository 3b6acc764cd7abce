// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPEUQ_FEM_HPP
#define SHAPEUQ_FEM_HPP

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shapeuq/bspline.hpp"
#include "shapeuq/geometry.hpp"

namespace shapeuq
{

using Vec2 = Vec<2>;
using Mat2 = Mat<2>;

/// H(curl)-conforming tensor-product spline space on the unit square with
/// perfectly conducting walls.
///
/// Component 0 (E_x) lives in S^{p1-1}(Xi1') x S^{p2}(Xi2), component 1 (E_y)
/// in S^{p1}(Xi1) x S^{p2-1}(Xi2'). Functions with a non-zero tangential trace
/// (E_x on y = 0, 1 and E_y on x = 0, 1) are eliminated; the remaining ones are
/// numbered component by component in lexicographic order.
class HCurlSpace
{
public:
  HCurlSpace(KnotVector x, KnotVector y);
  static HCurlSpace uniform(int degree, int spans_x, int spans_y);

  int size() const { return static_cast<int>(active_.size()); }
  int degree(int direction) const { return knots_[direction].degree(); }
  const KnotVector &knots(int direction) const { return knots_[direction]; }

  /// Scalar tensor basis of component c (0 = x, 1 = y).
  const TensorBasis &component(int c) const { return components_[c]; }
  int raw_size(int c) const { return components_[c].size(); }

  /// Active index of raw function `raw` of component c, or -1 if eliminated.
  int active_index(int c, int raw) const { return raw_to_active_[c][raw]; }
  /// (component, raw index) of an active degree of freedom.
  std::pair<int, int> raw_of(int active) const { return active_[active]; }

  /// Element boundaries in each direction (the common breakpoints).
  std::vector<double> breakpoints(int direction) const { return knots_[direction].breakpoints(); }
  int num_elements() const;

  HCurlSpace refined() const;

private:
  std::array<KnotVector, 2> knots_;
  std::vector<TensorBasis> components_;
  std::array<std::vector<int>, 2> raw_to_active_;
  std::vector<std::pair<int, int>> active_;
};

/// Geometry data handed to coefficient callbacks at one quadrature point.
struct QuadraturePoint
{
  Vec2 param;
  MapSample<2> geometry;
};

using CurlCoefficientField = std::function<double(const QuadraturePoint &)>;
using MassCoefficientField = std::function<Mat2(const QuadraturePoint &)>;

/// Several coefficient fields evaluated together at each quadrature point.
/// `eval` fills `curl` (size n_curl) and `mass` (size n_mass).
struct CoefficientSet
{
  int n_curl = 0;
  int n_mass = 0;
  std::function<void(const QuadraturePoint &, std::span<double> curl, std::span<Mat2> mass)> eval;
};

struct AssemblyOptions
{
  int threads = 1;
};

struct AssembledMatrices
{
  std::vector<Eigen::MatrixXd> stiffness;
  std::vector<Eigen::MatrixXd> mass;
};

/// Galerkin matrices [(c curl w_j, curl w_i)] and [(A w_j, w_i)] over F([0,1]^2)
/// with covariantly mapped basis functions. Elements are integrated in
/// parallel; their contributions are added to the global matrices in a fixed
/// element order.
AssembledMatrices assemble(const HCurlSpace &space, const GeometryMap<2> &geometry,
                           const CoefficientSet &coefficients, const AssemblyOptions &options = {});

Eigen::MatrixXd assemble_stiffness(const HCurlSpace &space, const GeometryMap<2> &geometry,
                                   const CurlCoefficientField &curl,
                                   const AssemblyOptions &options = {});
Eigen::MatrixXd assemble_mass(const HCurlSpace &space, const GeometryMap<2> &geometry,
                              const MassCoefficientField &mass,
                              const AssemblyOptions &options = {});

/// Reference matrices K0, M0 and per-mode derivative matrices
/// dK_i = K([D_t C]_i), dM_i = M([D_t A]_i).
struct EigenPencil
{
  Eigen::MatrixXd K0;
  Eigen::MatrixXd M0;
  std::vector<Eigen::MatrixXd> dK;
  std::vector<Eigen::MatrixXd> dM;

  int size() const { return static_cast<int>(K0.rows()); }
  int modes() const { return static_cast<int>(dK.size()); }
};

EigenPencil assemble_pencil(const HCurlSpace &space, const GeometryMap<2> &geometry,
                            const DeformationField<2> &field, const AssemblyOptions &options = {});

/// K(C_t(z)) and M(A_t(z)) with the exact pullback coefficients of the
/// perturbed map.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd>
assemble_sampled(const HCurlSpace &space, const GeometryMap<2> &geometry,
                 const DeformationField<2> &field, double t, std::span<const double> z,
                 const AssemblyOptions &options = {});

/// Coefficients of the gradients of the zero-trace scalar spline space
/// S^{p1}(Xi1) x S^{p2}(Xi2) in the active H(curl) basis, one column each.
Eigen::MatrixXd discrete_gradient(const HCurlSpace &space);

/// Physical field sum_k c_k w_k at a parametric point.
Vec2 evaluate_field(const HCurlSpace &space, const GeometryMap<2> &geometry,
                    const Eigen::Ref<const Eigen::VectorXd> &coefficients, const Vec2 &xhat);

/// Writes (row, col, value) triplets of entries with |value| > threshold.
void write_matrix_csv(const std::string &path, const Eigen::MatrixXd &matrix,
                      double threshold = 0.0);

}  // namespace shapeuq

#endif  // SHAPEUQ_FEM_HPP
