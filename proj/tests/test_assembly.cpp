#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "hcstokes/assembly.hpp"

using namespace hcstokes;

namespace {

Eigen::MatrixXd dense(const SparseMatrix& a) { return Eigen::MatrixXd(a); }

Eigen::Vector3d e1(const Point&) { return Eigen::Vector3d(1, 0, 0); }

}  // namespace

TEST_CASE("P1 stiffness on a single reference tetrahedron") {
  const Mesh mesh({Point(0, 0, 0), Point(1, 0, 0), Point(0, 1, 0), Point(0, 0, 1)}, {Tet{0, 1, 2, 3}}, 1.0,
                  {MacroInfo{0, 0}}, 1.0 / 6.0);
  const Space p1(mesh, SpaceFamily::Lagrange, 1);
  Eigen::Matrix4d expected;
  expected << 3, -1, -1, -1, -1, 1, 0, 0, -1, 0, 1, 0, -1, 0, 0, 1;
  expected /= 6.0;
  CHECK((dense(assemble_stiffness(p1)) - expected).norm() < 1e-14);
  Eigen::Matrix4d mass = Eigen::Matrix4d::Constant(1.0) + Eigen::Matrix4d::Identity();
  mass /= 120.0;
  CHECK((dense(assemble_mass(p1)) - mass).norm() < 1e-15);
}

TEST_CASE("stiffness kernel and energy of a linear field") {
  const Mesh mesh = generate_mesh(cube_domain(), 1);
  const Space v(mesh, SpaceFamily::Lagrange, 2, 3);
  const SparseMatrix a = assemble_stiffness(v);
  CHECK(symmetry_defect(a) < 1e-12);
  const FieldVector c = interpolate([](const Point&) { return Eigen::Vector3d(1, -2, 3); }, v);
  CHECK((a * c.coefficients()).norm() < 1e-12);
  const FieldVector x = interpolate([](const Point& p) { return Eigen::Vector3d(p[0], 0, 0); }, v);
  CHECK(x.coefficients().dot(a * x.coefficients()) == doctest::Approx(1.0));

  // Exactly three constant fields in the kernel.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense(a));
  int zero = 0;
  for (int i = 0; i < eig.eigenvalues().size(); ++i) zero += std::abs(eig.eigenvalues()[i]) < 1e-10;
  CHECK(zero == 3);
}

TEST_CASE("mass matrices") {
  const Mesh mesh = generate_mesh(lshape_domain(), 1);
  const Space p2(mesh, SpaceFamily::Lagrange, 2, 3);
  const SparseMatrix m = assemble_mass(p2);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(p2.dim());
  CHECK(ones.dot(m * ones) == doctest::Approx(3.0 * 3.0));
  CHECK(symmetry_defect(m) < 1e-12);

  const Space dg(mesh, SpaceFamily::DiscontinuousLagrange, 1);
  const SparseMatrix md = assemble_mass(dg);
  for (int k = 0; k < md.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(md, k); it; ++it) CHECK(it.row() / 4 == it.col() / 4);
  const SparseMatrix inv = inverse_block_mass(dg);
  CHECK((dense(inv * md) - Eigen::MatrixXd::Identity(dg.dim(), dg.dim())).norm() < 1e-9);

  const Mesh fine = generate_mesh(cube_domain(), 4);
  const Space s(fine, SpaceFamily::Lagrange, 2);
  const FieldVector u = interpolate([](const Point& x) { return Eigen::Vector3d(std::sin(M_PI * x[0]), 0, 0); }, s);
  CHECK(u.coefficients().dot(assemble_mass(s) * u.coefficients()) == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("tensor RT mass") {
  const Mesh mesh = generate_mesh(cube_domain(), 1);
  const Space rt(mesh, SpaceFamily::RaviartThomas, 1, 3);
  const SparseMatrix m = assemble_mass(rt);
  CHECK(symmetry_defect(m) < 1e-12);
  Eigen::VectorXd c(rt.dim());
  const Space row(mesh, SpaceFamily::RaviartThomas, 1);
  for (int k = 0; k < 3; ++k) {
    Eigen::Vector3d dir = Eigen::Vector3d::Zero();
    dir[(k + 1) % 3] = 1.0;
    c.segment(k * row.dim(), row.dim()) = interpolate([&](const Point&) { return dir; }, row).coefficients();
  }
  CHECK(c.dot(m * c) == doctest::Approx(3.0));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense(m), Eigen::EigenvaluesOnly);
  CHECK(eig.eigenvalues()[0] > 0.0);
}

TEST_CASE("divergence coupling for Scott-Vogelius pairs") {
  const Mesh mesh = generate_mesh(cube_domain(), 1);
  const Space v(mesh, SpaceFamily::Lagrange, 2, 3);
  const Space q(mesh, SpaceFamily::DiscontinuousLagrange, 1);
  const SparseMatrix b = assemble_div_pressure(v, q);
  CHECK((b * interpolate(e1, v).coefficients()).norm() < 1e-13);
  const FieldVector x = interpolate([](const Point& p) -> Eigen::Vector3d { return p; }, v);
  const Eigen::VectorXd one_q = interpolate([](const Point&) { return Eigen::Vector3d(1, 0, 0); }, q).coefficients();
  CHECK(one_q.dot(b * x.coefficients()) == doctest::Approx(3.0));

  const Space v0(mesh, SpaceFamily::Lagrange, 2, 3, Constraint::ZeroBoundary);
  const SparseMatrix b0 = b * selection_matrix(v0);
  const Eigen::VectorXd row = b0.transpose() * one_q;
  CHECK(row.norm() < 1e-12);
}

TEST_CASE("RT divergence and gradient coupling") {
  const Mesh mesh = generate_mesh(cube_domain(), 1);
  const Space rt(mesh, SpaceFamily::RaviartThomas, 1, 3);
  const Space x(mesh, SpaceFamily::DiscontinuousLagrange, 1, 3);
  const SparseMatrix d = assemble_div_rt(rt, x);
  const SparseMatrix minv = inverse_block_mass(x);

  // Surjectivity of Div onto the vector DG space.
  Eigen::FullPivLU<Eigen::MatrixXd> lu(dense(d));
  CHECK(lu.rank() == x.dim());

  // M^-1 D p is the L2 divergence; integrating over the cube gives the boundary flux.
  const Space row(mesh, SpaceFamily::RaviartThomas, 1);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(rt.dim());
  p.head(row.dim()) = interpolate([](const Point& y) { return Eigen::Vector3d(y[0] * y[1], y[2], y[0]); }, row).coefficients();
  const Eigen::VectorXd div = minv * (d * p);
  const Eigen::VectorXd ones = interpolate([](const Point&) { return Eigen::Vector3d(1, 1, 1); }, x).coefficients();
  // div (xy, z, x) = y, integral 1/2 (first tensor row only).
  CHECK(ones.dot(assemble_mass(x) * div) == doctest::Approx(0.5));

  const Space u(mesh, SpaceFamily::Lagrange, 2);
  const SparseMatrix g = assemble_grad_coupling(u, x);
  CHECK((g * Eigen::VectorXd::Ones(u.dim())).norm() < 1e-13);
  const Eigen::VectorXd grad = minv * (g * interpolate([](const Point& y) { return Eigen::Vector3d(y[0], 0, 0); }, u).coefficients());
  const Eigen::VectorXd expected = l2_project(e1, x, 2).coefficients();
  CHECK((grad - expected).norm() < 1e-12);
}

TEST_CASE("load vectors") {
  const Mesh mesh = generate_mesh(cube_domain(), 1);
  const Space p1(mesh, SpaceFamily::Lagrange, 1);
  CHECK(assemble_load([](const Point&) { return Eigen::Vector3d(1, 0, 0); }, p1, 1).sum() == doctest::Approx(1.0));
  CHECK(assemble_load([](const Point&) { return Eigen::Vector3d::Zero(); }, p1, 1).norm() == 0.0);
  const Space p2(mesh, SpaceFamily::Lagrange, 2);
  // sum of P2 basis is 1, so the entries add up to the integral of x^2 y.
  CHECK(assemble_load([](const Point& x) { return Eigen::Vector3d(x[0] * x[0] * x[1], 0, 0); }, p2, 5).sum() ==
        doctest::Approx(1.0 / 6.0));
}

TEST_CASE("parallel assembly reproduces the serial reference bit for bit") {
  const Mesh mesh = generate_mesh(cube_domain(), 2);
  const Space v(mesh, SpaceFamily::Lagrange, 3, 3);
  const SparseMatrix a = assemble_stiffness(v, Execution::Serial);
  const SparseMatrix b = assemble_stiffness(v, Execution::Parallel);
  REQUIRE(a.nonZeros() == b.nonZeros());
  CHECK(std::equal(a.valuePtr(), a.valuePtr() + a.nonZeros(), b.valuePtr()));
  CHECK(std::equal(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros(), b.innerIndexPtr()));
  const Space rt(mesh, SpaceFamily::RaviartThomas, 2, 3);
  const SparseMatrix m1 = assemble_mass(rt, Execution::Serial);
  const SparseMatrix m2 = assemble_mass(rt, Execution::Parallel);
  CHECK(std::equal(m1.valuePtr(), m1.valuePtr() + m1.nonZeros(), m2.valuePtr()));
}

TEST_CASE("matrix market export") {
  SparseMatrix a(2, 2);
  a.insert(0, 0) = 1.5;
  a.insert(1, 0) = -2.0;
  std::ostringstream out;
  write_matrix_market(a, out);
  CHECK(out.str() == "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.5\n2 1 -2\n");
}
