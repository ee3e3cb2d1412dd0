#include "hcstokes/stokes.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace hcstokes {

namespace {

struct Block {
  const SparseMatrix* m;
  Eigen::Index row;
  Eigen::Index col;
};

SparseMatrix compose(Eigen::Index rows, Eigen::Index cols, std::initializer_list<Block> blocks) {
  std::vector<Eigen::Triplet<double>> t;
  for (const auto& b : blocks)
    for (int k = 0; k < b.m->outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(*b.m, k); it; ++it)
        t.emplace_back(static_cast<int>(b.row + it.row()), static_cast<int>(b.col + it.col()), it.value());
  SparseMatrix out(rows, cols);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

SparseMatrix row_vector(const Eigen::VectorXd& v) {
  SparseMatrix out(1, v.size());
  std::vector<Eigen::Triplet<double>> t;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] != 0.0) t.emplace_back(0, static_cast<int>(i), v[i]);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

/// Local coefficients of component `comp` of a field on a cell.
Eigen::VectorXd local_coefficients(const FieldVector& field, int cell, int comp) {
  const Space& s = field.space();
  const auto dofs = s.cell_dofs(cell);
  Eigen::VectorXd out(dofs.size());
  for (std::size_t i = 0; i < dofs.size(); ++i) out[i] = field.coefficients()[s.index(comp, dofs[i])];
  return out;
}

void check_degree(int k) {
  if (k < 2 || k > 3) throw std::invalid_argument("velocity degree must be 2 or 3, got " + std::to_string(k));
}

}  // namespace

StokesProblem::StokesProblem(const Mesh& mesh, int k, SolverOptions options)
    : mesh_(&mesh),
      k_((check_degree(k), k)),
      velocity_(mesh, SpaceFamily::Lagrange, k, 3, Constraint::ZeroBoundary),
      pressure_(mesh, SpaceFamily::DiscontinuousLagrange, k - 1),
      loads_(mesh, SpaceFamily::DiscontinuousLagrange, k - 1, 3) {
  select_ = selection_matrix(velocity_);
  const SparseMatrix pt = select_.transpose();
  stiffness_ = pt * assemble_stiffness(velocity_) * select_;
  div_ = assemble_div_pressure(velocity_, pressure_) * select_;
  velocity_mass_ = pt * assemble_mass(velocity_) * select_;
  load_coupling_ = pt * assemble_mixed_mass(velocity_, loads_);
  loads_mass_inv_ = inverse_block_mass(loads_);
  solver_ = std::make_unique<SaddleSolver>(stiffness_, div_, inverse_block_mass(pressure_), options);
}

Eigen::VectorXd StokesProblem::load_from(const Eigen::VectorXd& f_h) const {
  if (f_h.size() != loads_.dim()) throw std::invalid_argument("load has the wrong dimension");
  return load_coupling_ * f_h;
}

Eigen::VectorXd StokesProblem::project_velocity(const Eigen::VectorXd& u) const {
  return loads_mass_inv_ * (load_coupling_.transpose() * (select_.transpose() * u));
}

StokesSolution solve_stokes(const StokesProblem& problem, const Eigen::VectorXd& rhs_free) {
  const SaddleSolution s = problem.solver().solve(rhs_free);
  const Space& q = problem.pressure();
  Eigen::VectorXd pressure = s.y;
  // Constant pressures lie in ker B^T; fix the gauge by removing the mean.
  const Eigen::VectorXd mean = mean_functional(q);
  pressure.array() -= mean.dot(pressure) / problem.mesh().domain_volume();

  StokesSolution out{FieldVector(problem.velocity(), problem.selection() * s.x), FieldVector(q, pressure)};
  out.energy = s.x.dot(problem.stiffness() * s.x);
  out.load_work = rhs_free.dot(s.x);
  out.max_divergence_moment = s.x.size() ? (problem.divergence() * s.x).cwiseAbs().maxCoeff() : 0.0;
  out.iterations = s.iterations;
  out.residual = s.residual;
  return out;
}

StokesSolution solve_stokes(const StokesProblem& problem, const FieldVector& f_h) {
  if (f_h.space().dim() != problem.loads().dim() || f_h.space().family() != SpaceFamily::DiscontinuousLagrange)
    throw std::invalid_argument("load must live in the vector discontinuous space of degree k-1");
  return solve_stokes(problem, problem.load_from(f_h.coefficients()));
}

StokesSolution solve_stokes(const StokesProblem& problem, const VectorFunction& f, int order) {
  return solve_stokes(problem, problem.selection().transpose() * assemble_load(f, problem.velocity(), order));
}

FluxProblem::FluxProblem(const Mesh& mesh, int m, SolverOptions options)
    : mesh_(&mesh),
      m_((check_degree(m + 1), m)),
      flux_(mesh, SpaceFamily::RaviartThomas, m, 3),
      potential_(mesh, SpaceFamily::Lagrange, m + 1),
      loads_(mesh, SpaceFamily::DiscontinuousLagrange, m, 3) {
  flux_mass_ = assemble_mass(flux_);
  loads_mass_ = assemble_mass(loads_);
  loads_mass_inv_ = inverse_block_mass(loads_);
  div_ = assemble_div_rt(flux_, loads_);
  grad_ = assemble_grad_coupling(potential_, loads_);

  const Eigen::Index np = flux_.dim();
  const Eigen::Index nphi = potential_.dim();
  const Eigen::Index nx = loads_.dim();
  const SparseMatrix mean = row_vector(mean_functional(potential_));
  const SparseMatrix a = compose(np + nphi, np + nphi, {{&flux_mass_, 0, 0}});
  const SparseMatrix b = compose(nx + 1, np + nphi, {{&div_, 0, 0}, {&grad_, 0, np}, {&mean, nx, np}});
  SparseMatrix scale(1, 1);
  scale.insert(0, 0) = 1.0 / mesh.domain_volume();
  const SparseMatrix w_inv = compose(nx + 1, nx + 1, {{&loads_mass_inv_, 0, 0}, {&scale, nx, nx}});
  solver_ = std::make_unique<SaddleSolver>(a, b, w_inv, options);
}

int FluxProblem::system_size() const { return flux_.dim() + potential_.dim() + loads_.dim() + 1; }

FluxSolution solve_flux(const FluxProblem& problem, const Eigen::VectorXd& f_h) {
  const Space& x = problem.loads();
  if (f_h.size() != x.dim()) throw std::invalid_argument("load has the wrong dimension");
  const Eigen::Index np = problem.flux().dim();
  const Eigen::Index nphi = problem.potential().dim();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.dim() + 1);
  g.head(x.dim()) = -(problem.loads_mass() * f_h);
  const SaddleSolution s = problem.solver().solve(Eigen::VectorXd::Zero(np + nphi), g);

  FluxSolution out{FieldVector(problem.flux(), s.x.head(np)), FieldVector(problem.potential(), s.x.tail(nphi)),
                   FieldVector(x, s.y.head(x.dim()))};
  out.d = s.y[x.dim()];
  out.iterations = s.iterations;
  out.residual = s.residual;
  out.flux_energy = out.p.coefficients().dot(problem.flux_mass() * out.p.coefficients());
  out.load_work = f_h.dot(problem.loads_mass() * out.eta.coefficients());

  // Div p_h + grad phi_h + f_h evaluated pointwise.
  const int order = 2 * problem.degree() + 2;
  const auto& rp = problem.flux().reference(order);
  const auto& ru = problem.potential().reference(order);
  const auto& rx = x.reference(order);
  const FieldVector f(x, f_h);
  double sum = 0.0;
  for (int c = 0; c < problem.mesh().num_cells(); ++c) {
    const CellValues cp = problem.flux().tabulate(rp, c);
    const CellValues cu = problem.potential().tabulate(ru, c);
    const CellValues cx = x.tabulate(rx, c);
    const Eigen::VectorXd phi = local_coefficients(out.phi, c, 0);
    for (int i = 0; i < 3; ++i) {
      const Eigen::VectorXd r = cp.divergence * local_coefficients(out.p, c, i) + cu.gradient[i] * phi +
                                cx.values * local_coefficients(f, c, i);
      sum += cp.weights.dot(r.cwiseAbs2());
    }
  }
  out.equilibration_residual = std::sqrt(sum);
  return out;
}

double hypercircle_radius(const FieldVector& u, const FieldVector& p) {
  const Space& us = u.space();
  const Space& ps = p.space();
  if (&us.mesh() != &ps.mesh()) throw std::invalid_argument("fields live on different meshes");
  if (us.components() != 3 || ps.components() != 3 || !ps.vector_valued_element() || us.vector_valued_element())
    throw std::invalid_argument("expected a vector Lagrange velocity and a tensor RT flux");
  const int order = std::min(kMaxQuadratureOrder, 2 * std::max(us.degree(), ps.degree() + 1));
  const auto& ru = us.reference(order);
  const auto& rp = ps.reference(order);
  double sum = 0.0;
  for (int c = 0; c < us.mesh().num_cells(); ++c) {
    const CellValues cu = us.tabulate(ru, c);
    const CellValues cp = ps.tabulate(rp, c);
    for (int i = 0; i < 3; ++i) {
      const Eigen::VectorXd ui = local_coefficients(u, c, i);
      const Eigen::VectorXd pi = local_coefficients(p, c, i);
      for (int d = 0; d < 3; ++d) sum += cu.weights.dot((cp.vector[d] * pi - cu.gradient[d] * ui).cwiseAbs2());
    }
  }
  return std::sqrt(sum);
}

double compute_C0h(double h) {
  if (!(h > 0.0)) throw std::invalid_argument("h must be positive");
  return 0.284 * h;
}

double compute_Ch(double kappa, double c0h) {
  if (kappa < 0.0 || c0h < 0.0) throw std::invalid_argument("constants must be non-negative");
  return std::hypot(kappa, c0h);
}

KappaResult compute_kappa(const StokesProblem& stokes, const FluxProblem& flux, const KappaOptions& options) {
  if (&stokes.mesh() != &flux.mesh()) throw std::invalid_argument("problems live on different meshes");
  if (flux.degree() != stokes.degree() - 1) throw std::invalid_argument("flux degree must be k - 1");
  const SparseMatrix& m = flux.loads_mass();

  LinearOperator op = [&](const Eigen::VectorXd& f) -> Eigen::VectorXd {
    const StokesSolution u = solve_stokes(stokes, stokes.load_from(f));
    const FluxSolution p = solve_flux(flux, f);
    return p.eta.coefficients() - stokes.project_velocity(u.u.coefficients());
  };
  const EigenResult eig = eig_largest(op, m, options.eig_tol, options.eig_max_iter);

  KappaResult out;
  out.kappa_squared = std::max(0.0, eig.values.back());
  out.kappa = std::sqrt(out.kappa_squared);
  out.eig_residual = eig.residuals.back();
  out.applications = eig.iterations;
  out.load_dim = flux.loads().dim();
  out.flux_system_dim = flux.system_size();
  out.stokes_system_dim = static_cast<int>(stokes.stiffness().rows() + stokes.divergence().rows());

  const Eigen::VectorXd f = eig.vectors.col(eig.vectors.cols() - 1);
  const StokesSolution u = solve_stokes(stokes, stokes.load_from(f));
  const FluxSolution p = solve_flux(flux, f);
  const double radius2 = std::pow(hypercircle_radius(u.u, p.p), 2);
  const double form = p.load_work - u.load_work;
  out.identity_defect = radius2 > 0.0 ? std::abs(form - radius2) / radius2 : std::abs(form);
  return out;
}

KappaResult compute_kappa(const Mesh& mesh, int k, const KappaOptions& options) {
  const StokesProblem stokes(mesh, k, options.solver);
  const FluxProblem flux(mesh, k - 1, options.solver);
  return compute_kappa(stokes, flux, options);
}

double aposteriori_bound(const StokesSolution& u_h, const FluxSolution& flux, const VectorFunction& f,
                         const FieldVector& f_h, double c0h, int order) {
  if (&u_h.u.space().mesh() != &flux.p.space().mesh() || &f_h.space().mesh() != &flux.p.space().mesh())
    throw std::invalid_argument("solutions live on different meshes");
  if (f_h.space().dim() != flux.eta.space().dim()) throw std::invalid_argument("f_h does not match the flux load space");
  return hypercircle_radius(u_h.u, flux.p) + c0h * l2_error(f, f_h, order);
}

double l2_error_bound(double ch, double energy_bound) {
  if (ch < 0.0 || energy_bound < 0.0) throw std::invalid_argument("inputs must be non-negative");
  return ch * energy_bound;
}

namespace {

// psi = G(x) G(y) G(z), G = g^2, g = t (1 - t); G_n is the n-th derivative.
std::array<double, 4> g_derivatives(double t) {
  const double g = t * (1.0 - t);
  const double g1 = 1.0 - 2.0 * t;
  const double g2 = -2.0;
  return {g * g, 2.0 * g * g1, 2.0 * g1 * g1 + 2.0 * g * g2, 6.0 * g1 * g2};
}

struct Psi {
  std::array<double, 4> gx, gy, gz;
  explicit Psi(const Point& x) : gx(g_derivatives(x[0])), gy(g_derivatives(x[1])), gz(g_derivatives(x[2])) {}
  double d(int i, int j, int l) const { return gx[i] * gy[j] * gz[l]; }
};

}  // namespace

Eigen::Vector3d ManufacturedSolution::velocity(const Point& x) {
  const Psi p(x);
  const double px = p.d(1, 0, 0), py = p.d(0, 1, 0), pz = p.d(0, 0, 1);
  return {py - pz, pz - px, px - py};
}

Eigen::Matrix3d ManufacturedSolution::gradient(const Point& x) {
  const Psi p(x);
  // Hessian of psi.
  Eigen::Matrix3d h;
  h << p.d(2, 0, 0), p.d(1, 1, 0), p.d(1, 0, 1),  //
      p.d(1, 1, 0), p.d(0, 2, 0), p.d(0, 1, 1),   //
      p.d(1, 0, 1), p.d(0, 1, 1), p.d(0, 0, 2);
  Eigen::Matrix3d g;
  g.row(0) = h.row(1) - h.row(2);
  g.row(1) = h.row(2) - h.row(0);
  g.row(2) = h.row(0) - h.row(1);
  return g;
}

Eigen::Vector3d ManufacturedSolution::load(const Point& x) {
  const Psi p(x);
  const double lx = p.d(3, 0, 0) + p.d(1, 2, 0) + p.d(1, 0, 2);
  const double ly = p.d(2, 1, 0) + p.d(0, 3, 0) + p.d(0, 1, 2);
  const double lz = p.d(2, 0, 1) + p.d(0, 2, 1) + p.d(0, 0, 3);
  return {lz - ly, lx - lz, ly - lx};
}

double energy_error(const std::function<Eigen::Matrix3d(const Point&)>& grad_u, const FieldVector& u_h, int order) {
  const Space& s = u_h.space();
  if (s.components() != 3 || s.vector_valued_element()) throw std::invalid_argument("expected a vector velocity field");
  const auto& ref = s.reference(std::min(order, kMaxQuadratureOrder));
  double sum = 0.0;
  for (int c = 0; c < s.mesh().num_cells(); ++c) {
    const CellValues cv = s.tabulate(ref, c);
    std::array<Eigen::VectorXd, 3> coeffs;
    for (int i = 0; i < 3; ++i) coeffs[i] = local_coefficients(u_h, c, i);
    for (int q = 0; q < cv.weights.size(); ++q) {
      const Eigen::Matrix3d g = grad_u(cv.points.row(q).transpose());
      double e = 0.0;
      for (int i = 0; i < 3; ++i)
        for (int d = 0; d < 3; ++d) e += std::pow(g(i, d) - cv.gradient[d].row(q).dot(coeffs[i]), 2);
      sum += cv.weights[q] * e;
    }
  }
  return std::sqrt(sum);
}

}  // namespace hcstokes
