// SPDX-License-Identifier: Apache-2.0

#include "shapeuq/fem.hpp"

#include <fstream>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/os.h>

#include "shapeuq/errors.hpp"
#include "shapeuq/parallel.hpp"
#include "shapeuq/quadrature.hpp"

namespace shapeuq
{

HCurlSpace::HCurlSpace(KnotVector x, KnotVector y) : knots_{std::move(x), std::move(y)}
{
  if (knots_[0].degree() < 1 || knots_[1].degree() < 1)
  {
    throw std::invalid_argument("H(curl) space needs degree >= 1 in both directions");
  }
  components_.emplace_back(std::vector<KnotVector>{truncate_knots(knots_[0]), knots_[1]});
  components_.emplace_back(std::vector<KnotVector>{knots_[0], truncate_knots(knots_[1])});

  for (int c = 0; c < 2; c++)
  {
    const TensorBasis &basis = components_[c];
    raw_to_active_[c].assign(basis.size(), -1);
    // Tangential component of E_x on y = const walls and of E_y on x = const walls.
    const int normal_dir = c == 0 ? 1 : 0;
    const int last = basis.direction(normal_dir).size() - 1;
    for (int raw = 0; raw < basis.size(); raw++)
    {
      const int idx = basis.multi_index(raw)[normal_dir];
      if (idx == 0 || idx == last)
      {
        continue;
      }
      raw_to_active_[c][raw] = static_cast<int>(active_.size());
      active_.emplace_back(c, raw);
    }
  }
}

HCurlSpace HCurlSpace::uniform(int degree, int spans_x, int spans_y)
{
  return HCurlSpace(KnotVector::uniform(degree, spans_x), KnotVector::uniform(degree, spans_y));
}

int HCurlSpace::num_elements() const
{
  return (static_cast<int>(breakpoints(0).size()) - 1) *
         (static_cast<int>(breakpoints(1).size()) - 1);
}

HCurlSpace HCurlSpace::refined() const
{
  return HCurlSpace(knots_[0].refined(), knots_[1].refined());
}

namespace
{

// Covariantly mapped basis functions of one element at one quadrature point.
struct PointBasis
{
  std::vector<Vec2> value;  // J^{-T} what
  std::vector<double> curl;  // curl what / det J
  double measure = 0.0;      // quadrature weight * det J
};

// Local basis of one element: global active index (or -1) of every function
// supported on the element and its values at all quadrature points.
struct ElementBasis
{
  std::vector<int> dofs;
  std::vector<PointBasis> points;
  std::vector<QuadraturePoint> geometry;
};

struct UnivariateSet
{
  BasisValues x;
  BasisValues y;
};

ElementBasis element_basis(const HCurlSpace &space, const GeometryMap<2> &geometry, double x0,
                           double x1, double y0, double y1)
{
  const int n = std::max(space.degree(0), space.degree(1)) + 1;
  const auto qx = gauss_legendre(n, x0, x1);
  const auto qy = gauss_legendre(n, y0, y1);

  ElementBasis out;
  bool first = true;
  for (int j = 0; j < n; j++)
  {
    for (int i = 0; i < n; i++)
    {
      const Vec2 xhat(qx.points[i], qy.points[j]);
      // Component 0: (B^{p1-1}(x) B^{p2}(y), 0), component 1: (0, B^{p1}(x) B^{p2-1}(y)).
      std::array<UnivariateSet, 2> uni;
      for (int c = 0; c < 2; c++)
      {
        const TensorBasis &basis = space.component(c);
        const KnotVector &kx = basis.direction(0);
        const KnotVector &ky = basis.direction(1);
        uni[c].x = eval_basis(kx, xhat[0], c == 1 ? 1 : 0);
        uni[c].y = eval_basis(ky, xhat[1], c == 0 ? 1 : 0);
      }
      if (first)
      {
        for (int c = 0; c < 2; c++)
        {
          const TensorBasis &basis = space.component(c);
          for (int b = 0; b < uni[c].y.count(); b++)
          {
            for (int a = 0; a < uni[c].x.count(); a++)
            {
              const int multi[2] = {uni[c].x.index(a), uni[c].y.index(b)};
              out.dofs.push_back(space.active_index(c, basis.flat_index(multi)));
            }
          }
        }
        first = false;
      }

      QuadraturePoint qp{xhat, geometry.evaluate(xhat)};
      const Mat2 &J = qp.geometry.jacobian;
      const double det = J.determinant();
      if (!(det > 0.0))
      {
        throw NumericalError(
            fmt::format("geometry Jacobian not positive at ({}, {})", xhat[0], xhat[1]));
      }
      const Mat2 JinvT = J.inverse().transpose();

      PointBasis pb;
      pb.measure = qx.weights[i] * qy.weights[j] * det;
      for (int c = 0; c < 2; c++)
      {
        for (int b = 0; b < uni[c].y.count(); b++)
        {
          for (int a = 0; a < uni[c].x.count(); a++)
          {
            Vec2 what = Vec2::Zero();
            double curl = 0.0;
            if (c == 0)
            {
              what[0] = uni[c].x.values(0, a) * uni[c].y.values(0, b);
              curl = -uni[c].x.values(0, a) * uni[c].y.values(1, b);
            }
            else
            {
              what[1] = uni[c].x.values(0, a) * uni[c].y.values(0, b);
              curl = uni[c].x.values(1, a) * uni[c].y.values(0, b);
            }
            pb.value.push_back(JinvT * what);
            pb.curl.push_back(curl / det);
          }
        }
      }
      out.points.push_back(std::move(pb));
      out.geometry.push_back(qp);
    }
  }
  return out;
}

}  // namespace

AssembledMatrices assemble(const HCurlSpace &space, const GeometryMap<2> &geometry,
                           const CoefficientSet &coefficients, const AssemblyOptions &options)
{
  const auto bx = space.breakpoints(0);
  const auto by = space.breakpoints(1);
  const int ex = static_cast<int>(bx.size()) - 1;
  const int ey = static_cast<int>(by.size()) - 1;
  const int n_fields = coefficients.n_curl + coefficients.n_mass;

  struct ElementResult
  {
    std::vector<int> dofs;
    std::vector<Eigen::MatrixXd> local;
  };
  std::vector<ElementResult> elements(static_cast<std::size_t>(ex) * ey);

  parallel_for(elements.size(), options.threads,
               [&](std::size_t e)
               {
                 const int i = static_cast<int>(e) % ex;
                 const int j = static_cast<int>(e) / ex;
                 const ElementBasis eb = element_basis(space, geometry, bx[i], bx[i + 1], by[j], by[j + 1]);
                 const int nl = static_cast<int>(eb.dofs.size());
                 ElementResult &res = elements[e];
                 res.dofs = eb.dofs;
                 res.local.assign(n_fields, Eigen::MatrixXd::Zero(nl, nl));

                 std::vector<double> curl(coefficients.n_curl);
                 std::vector<Mat2> mass(coefficients.n_mass);
                 Eigen::VectorXd curls(nl);
                 Eigen::Matrix<double, 2, Eigen::Dynamic> values(2, nl);
                 for (std::size_t q = 0; q < eb.points.size(); q++)
                 {
                   const PointBasis &pb = eb.points[q];
                   coefficients.eval(eb.geometry[q], curl, mass);
                   for (int a = 0; a < nl; a++)
                   {
                     curls[a] = pb.curl[a];
                     values.col(a) = pb.value[a];
                   }
                   for (int f = 0; f < coefficients.n_curl; f++)
                   {
                     res.local[f].noalias() += (pb.measure * curl[f]) * curls * curls.transpose();
                   }
                   for (int f = 0; f < coefficients.n_mass; f++)
                   {
                     res.local[coefficients.n_curl + f].noalias() +=
                         pb.measure * values.transpose() * mass[f] * values;
                   }
                 }
                 // Exact symmetry independent of rounding in the products above.
                 for (auto &m : res.local)
                 {
                   m = 0.5 * (m + m.transpose()).eval();
                 }
               });

  const int N = space.size();
  AssembledMatrices out;
  out.stiffness.assign(coefficients.n_curl, Eigen::MatrixXd::Zero(N, N));
  out.mass.assign(coefficients.n_mass, Eigen::MatrixXd::Zero(N, N));
  for (const auto &res : elements)
  {
    const int nl = static_cast<int>(res.dofs.size());
    for (int f = 0; f < n_fields; f++)
    {
      Eigen::MatrixXd &global = f < coefficients.n_curl ? out.stiffness[f]
                                                         : out.mass[f - coefficients.n_curl];
      for (int b = 0; b < nl; b++)
      {
        if (res.dofs[b] < 0)
        {
          continue;
        }
        for (int a = 0; a < nl; a++)
        {
          if (res.dofs[a] >= 0)
          {
            global(res.dofs[a], res.dofs[b]) += res.local[f](a, b);
          }
        }
      }
    }
  }
  return out;
}

Eigen::MatrixXd assemble_stiffness(const HCurlSpace &space, const GeometryMap<2> &geometry,
                                   const CurlCoefficientField &curl, const AssemblyOptions &options)
{
  CoefficientSet set;
  set.n_curl = 1;
  set.eval = [&](const QuadraturePoint &qp, std::span<double> c, std::span<Mat2>) { c[0] = curl(qp); };
  return std::move(assemble(space, geometry, set, options).stiffness[0]);
}

Eigen::MatrixXd assemble_mass(const HCurlSpace &space, const GeometryMap<2> &geometry,
                              const MassCoefficientField &mass, const AssemblyOptions &options)
{
  CoefficientSet set;
  set.n_mass = 1;
  set.eval = [&](const QuadraturePoint &qp, std::span<double>, std::span<Mat2> m) { m[0] = mass(qp); };
  return std::move(assemble(space, geometry, set, options).mass[0]);
}

EigenPencil assemble_pencil(const HCurlSpace &space, const GeometryMap<2> &geometry,
                            const DeformationField<2> &field, const AssemblyOptions &options)
{
  const int M = field.size();
  CoefficientSet set;
  set.n_curl = 1 + M;
  set.n_mass = 1 + M;
  set.eval = [&](const QuadraturePoint &qp, std::span<double> curl, std::span<Mat2> mass)
  {
    curl[0] = 1.0;
    mass[0] = Mat2::Identity();
    for (int i = 0; i < M; i++)
    {
      const auto rate =
          mode_coefficient_rate<2>(field.mode(i).evaluate(qp.param, qp.geometry).jacobian);
      curl[1 + i] = rate.curl;
      mass[1 + i] = rate.mass;
    }
  };
  auto mats = assemble(space, geometry, set, options);

  EigenPencil pencil;
  pencil.K0 = std::move(mats.stiffness[0]);
  pencil.M0 = std::move(mats.mass[0]);
  for (int i = 0; i < M; i++)
  {
    pencil.dK.push_back(std::move(mats.stiffness[1 + i]));
    pencil.dM.push_back(std::move(mats.mass[1 + i]));
  }
  return pencil;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd>
assemble_sampled(const HCurlSpace &space, const GeometryMap<2> &geometry,
                 const DeformationField<2> &field, double t, std::span<const double> z,
                 const AssemblyOptions &options)
{
  if (static_cast<int>(z.size()) != field.size())
  {
    throw std::invalid_argument(
        fmt::format("expected {} KL coordinates, got {}", field.size(), z.size()));
  }
  CoefficientSet set;
  set.n_curl = 1;
  set.n_mass = 1;
  set.eval = [&](const QuadraturePoint &qp, std::span<double> curl, std::span<Mat2> mass)
  {
    Mat2 grad = Mat2::Identity();
    for (int i = 0; i < field.size(); i++)
    {
      if (z[i] != 0.0)
      {
        grad += t * z[i] * field.mode(i).evaluate(qp.param, qp.geometry).jacobian;
      }
    }
    if (!(grad.determinant() > kSingularDeterminant))
    {
      throw NonInvertibleMap(fmt::format("map not invertible at point ({}, {})", qp.param[0],
                                       qp.param[1]));
    }
    const auto c = pullback_coefficients<2>(grad);
    curl[0] = c.curl;
    mass[0] = c.mass;
  };
  auto mats = assemble(space, geometry, set, options);
  return {std::move(mats.stiffness[0]), std::move(mats.mass[0])};
}

Eigen::MatrixXd discrete_gradient(const HCurlSpace &space)
{
  const KnotVector &kx = space.knots(0);
  const KnotVector &ky = space.knots(1);
  const int nx = kx.size();
  const int ny = ky.size();
  const int interior = std::max(nx - 2, 0) * std::max(ny - 2, 0);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(space.size(), interior);

  // d/dx B_{a,p} = p/(xi_{a+p}-xi_a) B_{a-1}' - p/(xi_{a+p+1}-xi_{a+1}) B_a'
  // with B_j' the degree p-1 functions on the truncated knot vector.
  auto derivative_terms = [](const KnotVector &kv, int a)
  {
    const int p = kv.degree();
    const auto U = kv.knots();
    std::vector<std::pair<int, double>> terms;
    const double left = U[a + p] - U[a];
    const double right = U[a + p + 1] - U[a + 1];
    if (left > 0.0 && a - 1 >= 0)
    {
      terms.emplace_back(a - 1, p / left);
    }
    if (right > 0.0 && a <= kv.size() - 2)
    {
      terms.emplace_back(a, -p / right);
    }
    return terms;
  };

  int col = 0;
  for (int b = 1; b < ny - 1; b++)
  {
    for (int a = 1; a < nx - 1; a++, col++)
    {
      for (const auto &[ia, w] : derivative_terms(kx, a))
      {
        const int multi[2] = {ia, b};
        const int act = space.active_index(0, space.component(0).flat_index(multi));
        if (act >= 0)
        {
          G(act, col) += w;
        }
      }
      for (const auto &[ib, w] : derivative_terms(ky, b))
      {
        const int multi[2] = {a, ib};
        const int act = space.active_index(1, space.component(1).flat_index(multi));
        if (act >= 0)
        {
          G(act, col) += w;
        }
      }
    }
  }
  return G;
}

Vec2 evaluate_field(const HCurlSpace &space, const GeometryMap<2> &geometry,
                    const Eigen::Ref<const Eigen::VectorXd> &coefficients, const Vec2 &xhat)
{
  Vec2 what = Vec2::Zero();
  for (int c = 0; c < 2; c++)
  {
    const auto s = space.component(c).evaluate(std::span<const double>(xhat.data(), 2));
    for (std::size_t j = 0; j < s.index.size(); j++)
    {
      const int act = space.active_index(c, s.index[j]);
      if (act >= 0)
      {
        what[c] += coefficients[act] * s.value[j];
      }
    }
  }
  const auto F = geometry.evaluate(xhat);
  return F.jacobian.inverse().transpose() * what;
}

void write_matrix_csv(const std::string &path, const Eigen::MatrixXd &matrix, double threshold)
{
  auto out = fmt::output_file(path);
  out.print("row,col,value\n");
  for (Eigen::Index j = 0; j < matrix.cols(); j++)
  {
    for (Eigen::Index i = 0; i < matrix.rows(); i++)
    {
      if (std::abs(matrix(i, j)) > threshold)
      {
        out.print("{},{},{:.17g}\n", i, j, matrix(i, j));
      }
    }
  }
}

}  // namespace shapeuq
