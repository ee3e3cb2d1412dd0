#include "hcstokes/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <Eigen/Dense>

namespace hcstokes {

namespace {

int quadrature_order(int order) { return std::clamp(order, 0, kMaxQuadratureOrder); }

void scatter(const Space& rs, const Space& cs, int cell, const Eigen::MatrixXd& local,
             std::vector<Eigen::Triplet<double>>& out) {
  const auto rd = rs.cell_dofs(cell);
  const auto cd = cs.cell_dofs(cell);
  const int rn = rs.dofs_per_cell();
  const int cn = cs.dofs_per_cell();
  for (int j = 0; j < local.cols(); ++j) {
    const int gj = cs.index(j / cn, cd[j % cn]);
    for (int i = 0; i < local.rows(); ++i)
      if (local(i, j) != 0.0) out.emplace_back(rs.index(i / rn, rd[i % rn]), gj, local(i, j));
  }
}

Eigen::MatrixXd weighted_product(const Eigen::MatrixXd& a, const Eigen::VectorXd& w, const Eigen::MatrixXd& b) {
  return a.transpose() * (w.asDiagonal() * b);
}

void require_same_mesh(const Space& a, const Space& b) {
  if (&a.mesh() != &b.mesh()) throw std::invalid_argument("spaces live on different meshes");
}

}  // namespace

SparseMatrix assemble(const Space& row_space, const Space& col_space, int order, const CellKernel& kernel,
                      Execution exec) {
  require_same_mesh(row_space, col_space);
  const int nc = row_space.mesh().num_cells();
  const auto& rref = row_space.reference(quadrature_order(order));
  const auto& cref = col_space.reference(quadrature_order(order));
  const bool same = &row_space == &col_space;

  std::vector<Eigen::Triplet<double>> triplets;
  if (exec == Execution::Serial) {
    for (int c = 0; c < nc; ++c) {
      const CellValues rv = row_space.tabulate(rref, c);
      const Eigen::MatrixXd local = same ? kernel(rv, rv) : kernel(rv, col_space.tabulate(cref, c));
      scatter(row_space, col_space, c, local, triplets);
    }
  } else {
    std::vector<Eigen::MatrixXd> locals(nc);
#pragma omp parallel for schedule(dynamic, 16)
    for (int c = 0; c < nc; ++c) {
      const CellValues rv = row_space.tabulate(rref, c);
      locals[c] = same ? kernel(rv, rv) : kernel(rv, col_space.tabulate(cref, c));
    }
    for (int c = 0; c < nc; ++c) scatter(row_space, col_space, c, locals[c], triplets);
  }
  SparseMatrix a(row_space.dim(), col_space.dim());
  a.setFromTriplets(triplets.begin(), triplets.end());
  return a;
}

SparseMatrix assemble_stiffness(const Space& v, Execution exec) {
  if (v.vector_valued_element()) throw std::invalid_argument("stiffness needs a scalar-element family");
  const int nc = v.components();
  const int n = v.dofs_per_cell();
  const int order = 2 * std::max(0, v.degree() - 1);
  return assemble(v, v, order, [=](const CellValues& cv, const CellValues&) {
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
    for (int d = 0; d < 3; ++d) k += weighted_product(cv.gradient[d], cv.weights, cv.gradient[d]);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nc * n, nc * n);
    for (int c = 0; c < nc; ++c) out.block(c * n, c * n, n, n) = k;
    return out;
  }, exec);
}

SparseMatrix assemble_mass(const Space& space, Execution exec) {
  const int nc = space.components();
  const int n = space.dofs_per_cell();
  const bool rt = space.vector_valued_element();
  const int order = rt ? 2 * space.degree() + 2 : 2 * space.degree();
  return assemble(space, space, order, [=](const CellValues& cv, const CellValues&) {
    Eigen::MatrixXd m;
    if (rt) {
      m = Eigen::MatrixXd::Zero(n, n);
      for (int d = 0; d < 3; ++d) m += weighted_product(cv.vector[d], cv.weights, cv.vector[d]);
    } else {
      m = weighted_product(cv.values, cv.weights, cv.values);
    }
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nc * n, nc * n);
    for (int c = 0; c < nc; ++c) out.block(c * n, c * n, n, n) = m;
    return out;
  }, exec);
}

SparseMatrix assemble_mixed_mass(const Space& rows, const Space& cols, Execution exec) {
  if (rows.vector_valued_element() || cols.vector_valued_element())
    throw std::invalid_argument("mixed mass needs scalar-element families");
  if (rows.components() != cols.components()) throw std::invalid_argument("component count mismatch");
  const int nc = rows.components();
  const int rn = rows.dofs_per_cell();
  const int cn = cols.dofs_per_cell();
  return assemble(rows, cols, rows.degree() + cols.degree(), [=](const CellValues& r, const CellValues& c) {
    const Eigen::MatrixXd m = weighted_product(r.values, r.weights, c.values);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nc * rn, nc * cn);
    for (int k = 0; k < nc; ++k) out.block(k * rn, k * cn, rn, cn) = m;
    return out;
  }, exec);
}

SparseMatrix assemble_div_pressure(const Space& v, const Space& q, Execution exec) {
  if (v.components() != 3 || v.vector_valued_element()) throw std::invalid_argument("velocity must be a vector space");
  if (q.components() != 1 || q.vector_valued_element()) throw std::invalid_argument("pressure must be scalar");
  const int vn = v.dofs_per_cell();
  const int qn = q.dofs_per_cell();
  return assemble(q, v, q.degree() + std::max(0, v.degree() - 1), [=](const CellValues& r, const CellValues& c) {
    Eigen::MatrixXd out(qn, 3 * vn);
    for (int d = 0; d < 3; ++d) out.block(0, d * vn, qn, vn) = weighted_product(r.values, r.weights, c.gradient[d]);
    return out;
  }, exec);
}

SparseMatrix assemble_div_rt(const Space& rt, const Space& x, Execution exec) {
  if (!rt.vector_valued_element()) throw std::invalid_argument("first space must be Raviart-Thomas");
  if (x.components() != rt.components()) throw std::invalid_argument("component count mismatch");
  const int nc = rt.components();
  const int pn = rt.dofs_per_cell();
  const int xn = x.dofs_per_cell();
  return assemble(x, rt, x.degree() + rt.degree(), [=](const CellValues& r, const CellValues& c) {
    const Eigen::MatrixXd m = weighted_product(r.values, r.weights, c.divergence);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nc * xn, nc * pn);
    for (int k = 0; k < nc; ++k) out.block(k * xn, k * pn, xn, pn) = m;
    return out;
  }, exec);
}

SparseMatrix assemble_grad_coupling(const Space& u, const Space& x, Execution exec) {
  if (u.components() != 1 || u.vector_valued_element()) throw std::invalid_argument("potential must be scalar");
  if (x.components() != 3) throw std::invalid_argument("target must be a vector space");
  const int un = u.dofs_per_cell();
  const int xn = x.dofs_per_cell();
  return assemble(x, u, x.degree() + std::max(0, u.degree() - 1), [=](const CellValues& r, const CellValues& c) {
    Eigen::MatrixXd out(3 * xn, un);
    for (int d = 0; d < 3; ++d) out.block(d * xn, 0, xn, un) = weighted_product(r.values, r.weights, c.gradient[d]);
    return out;
  }, exec);
}

Eigen::VectorXd assemble_load(const VectorFunction& f, const Space& v, int order, Execution exec) {
  if (v.vector_valued_element()) throw std::invalid_argument("load needs a scalar-element family");
  const auto& ref = v.reference(quadrature_order(order));
  const int nc = v.mesh().num_cells();
  const int n = v.dofs_per_cell();
  std::vector<Eigen::MatrixXd> locals(nc);
  auto local = [&](int c) {
    const CellValues cv = v.tabulate(ref, c);
    Eigen::MatrixXd fq(cv.weights.size(), v.components());
    for (int q = 0; q < fq.rows(); ++q) {
      const Eigen::Vector3d fx = f(cv.points.row(q).transpose());
      for (int k = 0; k < v.components(); ++k) fq(q, k) = fx[k];
    }
    locals[c] = cv.values.transpose() * (cv.weights.asDiagonal() * fq);
  };
  if (exec == Execution::Serial) {
    for (int c = 0; c < nc; ++c) local(c);
  } else {
#pragma omp parallel for schedule(dynamic, 16)
    for (int c = 0; c < nc; ++c) local(c);
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(v.dim());
  for (int c = 0; c < nc; ++c) {
    const auto dofs = v.cell_dofs(c);
    for (int k = 0; k < v.components(); ++k)
      for (int i = 0; i < n; ++i) b[v.index(k, dofs[i])] += locals[c](i, k);
  }
  return b;
}

SparseMatrix inverse_block_mass(const Space& dg, Execution exec) {
  if (dg.family() != SpaceFamily::DiscontinuousLagrange) throw std::invalid_argument("block inverse needs a DG space");
  const int nc = dg.components();
  const int n = dg.dofs_per_cell();
  return assemble(dg, dg, 2 * dg.degree(), [=](const CellValues& cv, const CellValues&) {
    const Eigen::MatrixXd m = weighted_product(cv.values, cv.weights, cv.values);
    const Eigen::MatrixXd inv = m.llt().solve(Eigen::MatrixXd::Identity(n, n));
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nc * n, nc * n);
    for (int c = 0; c < nc; ++c) out.block(c * n, c * n, n, n) = inv;
    return out;
  }, exec);
}

SparseMatrix selection_matrix(const Space& space) {
  const auto& free = space.free_dofs();
  SparseMatrix p(space.dim(), static_cast<Eigen::Index>(free.size()));
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(free.size());
  for (std::size_t j = 0; j < free.size(); ++j) t.emplace_back(free[j], static_cast<int>(j), 1.0);
  p.setFromTriplets(t.begin(), t.end());
  return p;
}

void write_matrix_market(const SparseMatrix& a, std::ostream& out) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nonZeros() << '\n';
  out.precision(17);
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

double symmetry_defect(const SparseMatrix& a) {
  if (a.rows() != a.cols()) return INFINITY;
  const SparseMatrix d = a - SparseMatrix(a.transpose());
  double m = 0.0;
  for (int k = 0; k < d.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(d, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

}  // namespace hcstokes
