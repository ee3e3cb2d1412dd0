#pragma once

#include <memory>
#include <optional>
#include <string>

#include "hcstokes/assembly.hpp"
#include "hcstokes/linalg.hpp"
#include "hcstokes/spaces.hpp"

namespace hcstokes {

/// Scott-Vogelius discretisation: velocity in continuous vector P_k with zero
/// boundary values, pressure in discontinuous P_{k-1}. The saddle system is
/// factored once and reused for every load.
///
/// For k = 2 the discrete inf-sup condition is not known to hold on these
/// meshes; the solver then works on the consistent singular system.
class StokesProblem {
 public:
  StokesProblem(const Mesh& mesh, int k, SolverOptions options = {});

  const Mesh& mesh() const { return *mesh_; }
  int degree() const { return k_; }
  const Space& velocity() const { return velocity_; }
  const Space& pressure() const { return pressure_; }
  /// Vector discontinuous P_{k-1}, the load space X_h.
  const Space& loads() const { return loads_; }

  const SparseMatrix& stiffness() const { return stiffness_; }        ///< free velocity dofs
  const SparseMatrix& divergence() const { return div_; }             ///< pressure x free velocity
  const SparseMatrix& velocity_mass() const { return velocity_mass_; }  ///< free velocity dofs
  const SparseMatrix& selection() const { return select_; }
  const SaddleSolver& solver() const { return *solver_; }

  /// Right-hand side (f, v) on the free velocity dofs for f in X_h.
  Eigen::VectorXd load_from(const Eigen::VectorXd& f_h) const;
  /// L2 projection of a velocity field (full coefficients) onto X_h.
  Eigen::VectorXd project_velocity(const Eigen::VectorXd& u) const;

 private:
  const Mesh* mesh_;
  int k_;
  Space velocity_;
  Space pressure_;
  Space loads_;
  SparseMatrix select_;
  SparseMatrix stiffness_;
  SparseMatrix div_;
  SparseMatrix velocity_mass_;
  SparseMatrix load_coupling_;  ///< (chi_x, v) for free v, rows free velocity
  SparseMatrix loads_mass_inv_;
  std::unique_ptr<SaddleSolver> solver_;
};

struct StokesSolution {
  FieldVector u;         ///< full velocity coefficients, zero on the boundary
  FieldVector pressure;  ///< multiplier of the divergence constraint, zero mean
  double c = 0.0;        ///< mean multiplier; zero for consistent data
  double energy = 0.0;   ///< (grad u_h, grad u_h)
  double load_work = 0.0;  ///< (f, u_h)
  double max_divergence_moment = 0.0;  ///< max_q |(div u_h, chi_q)| over basis functions
  int iterations = 0;
  double residual = 0.0;
};

StokesSolution solve_stokes(const StokesProblem& problem, const Eigen::VectorXd& rhs_free);
/// Load f in X_h.
StokesSolution solve_stokes(const StokesProblem& problem, const FieldVector& f_h);
/// Smooth load integrated with the given quadrature order.
StokesSolution solve_stokes(const StokesProblem& problem, const VectorFunction& f, int order);

/// Flux reconstruction: p_h in tensor RT_m, phi_h in continuous P_{m+1}
/// (zero mean), eta_h in vector discontinuous P_m with
/// Div p_h + grad phi_h + f_h = 0 and (p_h, p_h) minimal.
class FluxProblem {
 public:
  FluxProblem(const Mesh& mesh, int m, SolverOptions options = {});

  const Mesh& mesh() const { return *mesh_; }
  int degree() const { return m_; }
  const Space& flux() const { return flux_; }
  const Space& potential() const { return potential_; }
  const Space& loads() const { return loads_; }
  const SparseMatrix& flux_mass() const { return flux_mass_; }
  const SparseMatrix& loads_mass() const { return loads_mass_; }
  const SaddleSolver& solver() const { return *solver_; }
  /// Unknowns of the reconstruction system including the mean multiplier.
  int system_size() const;

 private:
  const Mesh* mesh_;
  int m_;
  Space flux_;
  Space potential_;
  Space loads_;
  SparseMatrix flux_mass_;
  SparseMatrix loads_mass_;
  SparseMatrix loads_mass_inv_;
  SparseMatrix div_;
  SparseMatrix grad_;
  std::unique_ptr<SaddleSolver> solver_;
};

struct FluxSolution {
  FieldVector p;
  FieldVector phi;
  FieldVector eta;
  double d = 0.0;  ///< zero-mean multiplier of phi
  double equilibration_residual = 0.0;  ///< ||Div p_h + grad phi_h + f_h|| (L2)
  double flux_energy = 0.0;             ///< (p_h, p_h)
  double load_work = 0.0;               ///< (f_h, eta_h)
  int iterations = 0;
  double residual = 0.0;
};

/// f_h given as coefficients on problem.loads().
FluxSolution solve_flux(const FluxProblem& problem, const Eigen::VectorXd& f_h);
inline FluxSolution reconstruct_flux(const FluxProblem& problem, const FieldVector& f_h) {
  return solve_flux(problem, f_h.coefficients());
}

/// ||p_h - grad u_h|| by quadrature.
double hypercircle_radius(const FieldVector& u, const FieldVector& p);

double compute_C0h(double h);
double compute_Ch(double kappa, double c0h);

struct KappaOptions {
  SolverOptions solver;
  double eig_tol = 1e-8;
  int eig_max_iter = 200;
};

struct KappaResult {
  double kappa = 0.0;
  double kappa_squared = 0.0;
  /// |(f, eta - u) - ||grad u_h - p_h||^2| / ||grad u_h - p_h||^2 at the maximiser.
  double identity_defect = 0.0;
  double eig_residual = 0.0;
  int applications = 0;
  int load_dim = 0;
  int flux_system_dim = 0;
  int stokes_system_dim = 0;
};

/// kappa_h^2 = max over f_h in X_h of (f_h, (K3 - K1) f_h) / ||f_h||^2.
KappaResult compute_kappa(const StokesProblem& stokes, const FluxProblem& flux, const KappaOptions& options = {});
KappaResult compute_kappa(const Mesh& mesh, int k, const KappaOptions& options = {});

/// ||p_h - grad u_h|| + C0h ||f - f_h||; `order` integrates the oscillation term.
double aposteriori_bound(const StokesSolution& u_h, const FluxSolution& flux, const VectorFunction& f,
                         const FieldVector& f_h, double c0h, int order);
double l2_error_bound(double ch, double energy_bound);

struct ErrorCertificate {
  std::string domain;
  int n = 0;
  int k = 0;
  int d = 0;
  int m = 0;
  double h = 0.0;
  int cells = 0;
  int dof = 0;
  double c0h = 0.0;
  double kappa = 0.0;
  double ch = 0.0;
  std::optional<double> aposteriori;
  std::optional<double> l2_bound;
  std::optional<double> true_energy_error;
  bool stability_proven = false;
  double solver_tol = 0.0;
  double eig_tol = 0.0;
  int eig_applications = 0;
  double seconds = 0.0;
};

/// Manufactured Stokes solution u = curl(psi, psi, psi) on the unit cube with
/// psi = (x y z (1-x)(1-y)(1-z))^2, zero pressure and f = -Laplace u.
struct ManufacturedSolution {
  static Eigen::Vector3d velocity(const Point& x);
  static Eigen::Matrix3d gradient(const Point& x);  ///< row i = grad u_i
  static Eigen::Vector3d load(const Point& x);
};

/// ||grad(u - u_h)|| against an exact gradient.
double energy_error(const std::function<Eigen::Matrix3d(const Point&)>& grad_u, const FieldVector& u_h, int order);

}  // namespace hcstokes
