#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "hcstokes/stokes.hpp"

namespace hcstokes {

/// Constant of the Crouzeix-Raviart interpolation estimate used in the
/// nonconforming lower bound.
inline constexpr double kCrConstant = 0.3804;

enum class BoundMethod { ConformingCh, CrNonconforming };
std::string to_string(BoundMethod method);

struct EigenBound {
  int index = 1;
  double upper = 0.0;  ///< discrete eigenvalue
  double lower = 0.0;
  BoundMethod method = BoundMethod::ConformingCh;
  double constant = 0.0;  ///< C_h, or 0.3804 h (h the largest element diameter) for the CR bound
  /// [1/sqrt(upper), 1/sqrt(lower)] for the first eigenvalue.
  std::optional<std::array<double, 2>> cp_interval;
};

struct StokesEigenResult {
  std::vector<double> values;  ///< ascending
  Eigen::MatrixXd modes;       ///< full velocity coefficients, one column per value
  std::vector<double> residuals;
  int applications = 0;
};

/// Smallest eigenvalues of (grad u, grad v) = lambda (u, v) on discretely
/// divergence-free velocities. Each value bounds the exact one from above.
StokesEigenResult solve_stokes_eigen(const StokesProblem& problem, int count, double tol = 1e-8, int max_iter = 200);
StokesEigenResult solve_stokes_eigen(const Mesh& mesh, int k, int count, double tol = 1e-8, int max_iter = 200,
                                     const SolverOptions& options = {});

/// Vector CR P1 velocity (zero on boundary faces), piecewise constant pressure,
/// broken stiffness.
StokesEigenResult solve_cr_eigen(const Mesh& mesh, int count, double tol = 1e-8, int max_iter = 200,
                                 const SolverOptions& options = {});

/// lambda / (1 + ch^2 lambda)
double lower_bound(double lambda_h, double ch);
/// lambda / (1 + (0.3804 h)^2 lambda), h the largest element diameter
/// (sqrt(2) times the sub-cube edge on the block meshes).
double lower_bound_nc(double lambda_nc, double h);

EigenBound make_bound(int index, double upper, BoundMethod method, double constant);
/// Throws std::invalid_argument unless the bound is for the first eigenvalue.
std::array<double, 2> poincare_bounds(const EigenBound& bound);

}  // namespace hcstokes
