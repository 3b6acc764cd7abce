// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPEUQ_BSPLINE_HPP
#define SHAPEUQ_BSPLINE_HPP

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace shapeuq
{

/// Open (p+1)-fold clamped knot vector on [0, 1].
///
/// Construction validates monotonicity, the clamping at both ends, interior
/// multiplicities and local quasi-uniformity: neighbouring non-empty spans may
/// differ in length by at most a factor theta.
class KnotVector
{
public:
  KnotVector(int degree, std::vector<double> knots, double theta = 10.0);

  /// Uniform open knot vector with `spans` equal spans.
  static KnotVector uniform(int degree, int spans);

  int degree() const { return degree_; }
  double theta() const { return theta_; }
  std::span<const double> knots() const { return knots_; }

  /// Number of basis functions, len(knots) - p - 1.
  int size() const { return static_cast<int>(knots_.size()) - degree_ - 1; }

  /// Distinct knot values, 0 = b_0 < b_1 < ... < b_s = 1.
  std::vector<double> breakpoints() const;
  int num_spans() const { return static_cast<int>(breakpoints().size()) - 1; }

  /// Index j with knots[j] <= x < knots[j+1]; x = 1 maps to the last non-empty span.
  int find_span(double x) const;

  /// Bisects every non-empty span.
  KnotVector refined() const;

  bool operator==(const KnotVector &other) const = default;

private:
  int degree_;
  std::vector<double> knots_;
  double theta_;
};

/// The p+1 basis functions supported on the span containing x.
///
/// values(k, j) is the k-th derivative of basis function first + j.
struct BasisValues
{
  int first = 0;
  Eigen::MatrixXd values;

  int count() const { return static_cast<int>(values.cols()); }
  int index(int j) const { return first + j; }
};

/// Cox-de Boor evaluation of all non-zero basis functions and their
/// derivatives up to `nderiv` at x.
BasisValues eval_basis(const KnotVector &kv, double x, int nderiv);

/// Knot averages (xi_{j+1} + ... + xi_{j+p}) / p; for p = 0 the span midpoints.
std::vector<double> greville_points(const KnotVector &kv);

/// Degree p-1 knot vector obtained by removing the first and last knot.
KnotVector truncate_knots(const KnotVector &kv);

/// Tensor-product spline basis in 1 to 3 parametric directions. Flat indices are
/// lexicographic with the first direction running fastest.
class TensorBasis
{
public:
  explicit TensorBasis(std::vector<KnotVector> directions);

  int dim() const { return static_cast<int>(directions_.size()); }
  int size() const;
  const KnotVector &direction(int d) const { return directions_[d]; }
  const std::vector<KnotVector> &directions() const { return directions_; }

  int flat_index(std::span<const int> multi) const;
  std::array<int, 3> multi_index(int flat) const;

  /// Non-zero basis functions at x with values and parametric gradients.
  struct Sample
  {
    std::vector<int> index;
    std::vector<double> value;
    std::vector<std::array<double, 3>> gradient;
  };
  Sample evaluate(std::span<const double> x) const;

  TensorBasis refined() const;

private:
  std::vector<KnotVector> directions_;
};

}  // namespace shapeuq

#endif  // SHAPEUQ_BSPLINE_HPP
