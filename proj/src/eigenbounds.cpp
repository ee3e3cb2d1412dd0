#include "hcstokes/eigenbounds.hpp"

#include <cmath>
#include <stdexcept>

namespace hcstokes {

std::string to_string(BoundMethod method) {
  return method == BoundMethod::ConformingCh ? "conforming_Ch" : "CR_nonconforming";
}

namespace {

void check_count(int count, Eigen::Index dim) {
  if (count < 1 || count > dim) throw std::invalid_argument("eigenvalue count must lie in [1, dim V_h]");
}

StokesEigenResult finish(const EigenResult& eig, const SparseMatrix& select) {
  StokesEigenResult out;
  out.values = eig.values;
  out.modes = select * eig.vectors;
  out.residuals = eig.residuals;
  out.applications = eig.iterations;
  return out;
}

}  // namespace

StokesEigenResult solve_stokes_eigen(const StokesProblem& problem, int count, double tol, int max_iter) {
  check_count(count, problem.stiffness().rows());
  const EigenResult eig = eig_smallest_constrained(problem.solver(), problem.velocity_mass(), count, tol, max_iter);
  return finish(eig, problem.selection());
}

StokesEigenResult solve_stokes_eigen(const Mesh& mesh, int k, int count, double tol, int max_iter,
                                     const SolverOptions& options) {
  SolverOptions inner = options;
  inner.tol = std::min(options.tol, 1e-3 * tol);
  const StokesProblem problem(mesh, k, inner);
  return solve_stokes_eigen(problem, count, tol, max_iter);
}

StokesEigenResult solve_cr_eigen(const Mesh& mesh, int count, double tol, int max_iter, const SolverOptions& options) {
  const Space v(mesh, SpaceFamily::CrouzeixRaviart, 1, 3, Constraint::ZeroBoundary);
  const Space q(mesh, SpaceFamily::DiscontinuousLagrange, 0);
  const SparseMatrix select = selection_matrix(v);
  const SparseMatrix st = select.transpose();
  check_count(count, select.cols());
  const SparseMatrix a = st * assemble_stiffness(v) * select;
  const SparseMatrix m = st * assemble_mass(v) * select;
  const SparseMatrix b = assemble_div_pressure(v, q) * select;
  const EigenResult eig = eig_smallest_constrained(a, m, b, count, tol, max_iter, inverse_block_mass(q), options);
  return finish(eig, select);
}

double lower_bound(double lambda_h, double ch) {
  if (!(lambda_h > 0.0) || ch < 0.0) throw std::invalid_argument("eigenvalue must be positive, constant non-negative");
  return lambda_h / (1.0 + ch * ch * lambda_h);
}

double lower_bound_nc(double lambda_nc, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("h must be positive");
  return lower_bound(lambda_nc, kCrConstant * h);
}

EigenBound make_bound(int index, double upper, BoundMethod method, double constant) {
  if (index < 1) throw std::invalid_argument("eigenvalue index starts at 1");
  EigenBound b;
  b.index = index;
  b.upper = upper;
  b.method = method;
  b.constant = constant;
  b.lower = lower_bound(upper, constant);
  if (index == 1) b.cp_interval = std::array<double, 2>{1.0 / std::sqrt(b.upper), 1.0 / std::sqrt(b.lower)};
  return b;
}

std::array<double, 2> poincare_bounds(const EigenBound& bound) {
  if (bound.index != 1 || !(bound.lower > 0.0)) throw std::invalid_argument("Poincare bounds need the first eigenvalue");
  return {1.0 / std::sqrt(bound.upper), 1.0 / std::sqrt(bound.lower)};
}

}  // namespace hcstokes
