#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cfloat>
#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <Eigen/Dense>

#include "hcstokes/stokes.hpp"

using namespace hcstokes;

namespace {

Eigen::VectorXd random_vector(Eigen::Index n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  Eigen::VectorXd v(n);
  for (auto& x : v) x = dist(gen);
  return v;
}

double l2_norm(const Eigen::VectorXd& coeffs, const SparseMatrix& mass) { return std::sqrt(coeffs.dot(mass * coeffs)); }

/// ||div u_h|| at the points of an order-4 rule.
double divergence_norm(const FieldVector& u) {
  const QuadratureRule& rule = quadrature(4);
  double sum = 0.0;
  for (int c = 0; c < u.space().mesh().num_cells(); ++c) {
    const double vol = std::abs(u.space().mesh().signed_volume(c)) * 6.0;
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      const Eigen::Vector3d& x = rule.points[q];
      const Eigen::MatrixXd g = u.gradient(c, x);
      sum += rule.weights[q] * vol * std::pow(g.trace(), 2);
    }
  }
  return std::sqrt(sum);
}

/// max over pressure basis functions of |(div u_h, rho)| / ||rho||.
double max_divergence_moment(const StokesProblem& problem, const StokesSolution& s) {
  const Eigen::VectorXd moments = problem.divergence() * (problem.selection().transpose() * s.u.coefficients());
  const Eigen::VectorXd diag = assemble_mass(problem.pressure()).diagonal();
  return (moments.array().abs() / diag.array().sqrt()).maxCoeff();
}

const Mesh& mesh_for(const std::string& name, int n) {
  static std::map<std::pair<std::string, int>, Mesh> cache;
  auto it = cache.find({name, n});
  if (it == cache.end()) it = cache.emplace(std::pair{name, n}, generate_mesh(domain_by_name(name), n)).first;
  return it->second;
}

}  // namespace

TEST_CASE("Stokes solutions are divergence free and Galerkin") {
  for (const char* name : {"cube", "lshape"})
    for (int n : {1, 2}) {
      CAPTURE(name);
      CAPTURE(n);
      const Mesh& mesh = mesh_for(name, n);
      const StokesProblem problem(mesh, 2);
      const Eigen::VectorXd f = random_vector(problem.loads().dim(), 7 + n);
      const StokesSolution s = solve_stokes(problem, FieldVector(problem.loads(), f));
      CHECK(s.residual <= 1e-10);
      CHECK(s.energy == doctest::Approx(s.load_work).epsilon(1e-9));
      CHECK(s.energy > 0.0);
      // At N = 1 the discretely divergence-free space is trivial and u_h = 0,
      // so the load sets the scale.
      const double scale = std::max(std::sqrt(s.energy), l2_norm(f, assemble_mass(problem.loads())));
      CHECK(divergence_norm(s.u) <= 1e-8 * scale);
      CHECK(max_divergence_moment(problem, s) <= 1e-10 * scale);

      // A u + B^T p = F on the free velocity dofs.
      const Eigen::VectorXd uf = problem.selection().transpose() * s.u.coefficients();
      const Eigen::VectorXd rhs = problem.load_from(f);
      const Eigen::VectorXd r =
          problem.stiffness() * uf + problem.divergence().transpose() * s.pressure.coefficients() - rhs;
      CHECK(r.norm() <= 1e-9 * rhs.norm());
      CHECK(s.c == 0.0);
      CHECK(std::abs(mean_functional(problem.pressure()).dot(s.pressure.coefficients())) < 1e-10);
    }
}

TEST_CASE("degree three solve") {
  const Mesh& mesh = mesh_for("cube", 1);
  const StokesProblem problem(mesh, 3);
  CHECK(problem.velocity().dim() == 3 * (13 + 2 * 38 + 46));
  const Eigen::VectorXd f = random_vector(problem.loads().dim(), 3);
  const StokesSolution s = solve_stokes(problem, FieldVector(problem.loads(), f));
  CHECK(s.energy == doctest::Approx(s.load_work).epsilon(1e-9));
  CHECK(s.energy > 1e-8);
  const double scale = std::max(std::sqrt(s.energy), l2_norm(f, assemble_mass(problem.loads())));
  CHECK(divergence_norm(s.u) <= 1e-8 * scale);
  CHECK(max_divergence_moment(problem, s) <= 1e-10 * scale);
  CHECK_THROWS_AS(StokesProblem(mesh, 1), std::invalid_argument);
  CHECK_THROWS_AS(StokesProblem(mesh, 4), std::invalid_argument);
}

TEST_CASE("flux equilibration and the energy identity") {
  for (const char* name : {"cube", "lshape"})
    for (int n : {1, 2}) {
      CAPTURE(name);
      CAPTURE(n);
      const Mesh& mesh = mesh_for(name, n);
      const StokesProblem stokes(mesh, 2);
      const FluxProblem flux(mesh, 1);
      CHECK(flux.loads().dim() == stokes.loads().dim());
      for (unsigned trial = 0; trial < 10; ++trial) {
        const Eigen::VectorXd f = random_vector(flux.loads().dim(), 100 * n + trial);
        const double fnorm = l2_norm(f, flux.loads_mass());
        const FluxSolution p = solve_flux(flux, f);
        CHECK(p.equilibration_residual <= 1e-9 * fnorm);

        const StokesSolution u = solve_stokes(stokes, stokes.load_from(f));
        const double radius2 = std::pow(hypercircle_radius(u.u, p.p), 2);
        const double form = p.load_work - u.load_work;
        CHECK(std::abs(radius2 - form) <= 1e-8 * radius2);
        // (p_h, p_h) = (f_h, eta_h) for the minimal flux.
        CHECK(p.flux_energy == doctest::Approx(p.load_work).epsilon(1e-8));
      }
    }
}

TEST_CASE("cube flux system sizes") {
  CHECK(FluxProblem(mesh_for("cube", 1), 1).system_size() == 886);
  CHECK(FluxProblem(mesh_for("cube", 2), 1).system_size() == 6774);
  CHECK(FluxProblem(mesh_for("cubeminuscube", 1), 1).system_size() == 5962);
}

TEST_CASE("certificate constants") {
  CHECK(compute_C0h(1.0) == doctest::Approx(0.284));
  CHECK(compute_C0h(0.25) == doctest::Approx(0.071));
  for (double kappa : {0.0, 0.05, 0.134, 1.0})
    for (double h : {1.0, 0.5, 0.125}) {
      const double c0 = compute_C0h(h);
      const double ch = compute_Ch(kappa, c0);
      CHECK(std::abs(ch * ch - (c0 * c0 + kappa * kappa)) <= 4 * DBL_EPSILON * ch * ch);
    }
  CHECK_THROWS_AS(compute_C0h(0.0), std::invalid_argument);
  CHECK_THROWS_AS(compute_Ch(-1.0, 0.1), std::invalid_argument);
  CHECK(l2_error_bound(0.5, 2.0) == 1.0);
}

TEST_CASE("kappa on the unit cube") {
  const KappaResult r = compute_kappa(mesh_for("cube", 1), 2);
  CHECK(r.kappa == doctest::Approx(0.134).epsilon(0.02));
  CHECK(r.kappa_squared == doctest::Approx(r.kappa * r.kappa));
  CHECK(r.identity_defect < 1e-6);
  CHECK(r.flux_system_dim == 886);
  CHECK(r.load_dim == 240);
}

TEST_CASE("manufactured solution") {
  using M = ManufacturedSolution;
  // The field is a curl, hence divergence free, and vanishes on the boundary.
  for (const Point x : {Point(0.3, 0.6, 0.2), Point(0.9, 0.1, 0.45)}) {
    CHECK(std::abs(M::gradient(x).trace()) < 1e-14);
    // Finite differences of the velocity and of the gradient.
    const double e = 1e-5;
    for (int d = 0; d < 3; ++d) {
      const Point dx = Point::Unit(d) * e;
      const Eigen::Vector3d fd = (M::velocity(x + dx) - M::velocity(x - dx)) / (2 * e);
      CHECK((fd - M::gradient(x).col(d)).norm() < 1e-8);
    }
    Eigen::Vector3d lap = Eigen::Vector3d::Zero();
    for (int d = 0; d < 3; ++d) {
      const Point dx = Point::Unit(d) * e;
      lap += (M::gradient(x + dx).col(d) - M::gradient(x - dx).col(d)) / (2 * e);
    }
    CHECK((M::load(x) + lap).norm() < 1e-6 * M::load(x).norm());
  }
  CHECK(M::velocity(Point(0.0, 0.4, 0.7)).norm() == 0.0);
  CHECK(M::velocity(Point(0.3, 1.0, 0.7)).norm() == 0.0);
}

TEST_CASE("error bounds hold for the manufactured solution") {
  using M = ManufacturedSolution;
  double previous = INFINITY;
  for (int n : {1, 2, 4}) {
    CAPTURE(n);
    const Mesh& mesh = mesh_for("cube", n);
    const StokesProblem stokes(mesh, 2);
    const FluxProblem flux(mesh, 1);
    const StokesSolution u = solve_stokes(stokes, M::load, 12);
    const FieldVector f_h = l2_project(M::load, flux.loads(), 12);
    const FluxSolution p = reconstruct_flux(flux, f_h);
    const double c0h = compute_C0h(mesh.h());
    const double bound = aposteriori_bound(u, p, M::load, f_h, c0h, 20);
    const double error = energy_error(M::gradient, u.u, 22);
    CHECK(error > 0.0);
    CHECK(bound >= error);
    CHECK(error < previous);
    previous = error;
    if (n <= 2) {
      const double ch = compute_Ch(compute_kappa(stokes, flux).kappa, c0h);
      const double f_l2 = l2_error(M::load, FieldVector(flux.loads()), 20);
      CHECK(ch * f_l2 >= error);
    }
  }
}

TEST_CASE("trivial loads") {
  const Mesh& mesh = mesh_for("cube", 2);
  const StokesProblem stokes(mesh, 2);
  const StokesSolution zero = solve_stokes(stokes, FieldVector(stokes.loads()));
  CHECK(zero.u.coefficients().norm() == 0.0);

  // A gradient load is balanced by the pressure alone.
  const StokesSolution grad = solve_stokes(stokes, [](const Point&) { return Eigen::Vector3d(1, 1, 1); }, 2);
  CHECK(std::sqrt(grad.energy) < 1e-8);  // ||f|| = sqrt(3)

  const FluxProblem flux(mesh, 1);
  const FluxSolution p = solve_flux(flux, Eigen::VectorXd::Zero(flux.loads().dim()));
  CHECK(p.p.coefficients().norm() == 0.0);
  CHECK(p.phi.coefficients().norm() == 0.0);
  CHECK(p.eta.coefficients().norm() == 0.0);
  CHECK_THROWS_AS(solve_flux(flux, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}
