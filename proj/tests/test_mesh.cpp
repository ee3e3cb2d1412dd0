#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include <Eigen/Geometry>

#include "hcstokes/mesh.hpp"

using namespace hcstokes;

TEST_CASE("unit cube, one sub-cube") {
  const Mesh mesh = generate_mesh(cube_domain(), 1);
  CHECK(mesh.num_cells() == 20);
  CHECK(mesh.num_vertices() == 13);
  CHECK(mesh.num_edges() == 38);
  CHECK(mesh.num_faces() == 46);
  CHECK(mesh.h() == doctest::Approx(1.0));
  // Euler characteristic of a ball.
  CHECK(mesh.num_vertices() - mesh.num_edges() + mesh.num_faces() - mesh.num_cells() == 1);
  CHECK(validate_mesh(mesh).ok());
  CHECK(mesh.boundary_faces().size() == 12);
}

TEST_CASE("cell counts follow 20 n^3 per block") {
  CHECK(generate_mesh(cube_domain(), 2).num_cells() == 160);
  CHECK(generate_mesh(cube_domain(), 4).num_cells() == 1280);
  CHECK(generate_mesh(lshape_domain(), 1).num_cells() == 60);
  CHECK(generate_mesh(cube_minus_cube_domain(), 1).num_cells() == 140);
}

TEST_CASE("generated meshes validate and keep the macro map") {
  for (const auto& spec : {cube_domain(), lshape_domain(), cube_minus_cube_domain()}) {
    for (int n : {1, 2}) {
      const Mesh mesh = generate_mesh(spec, n);
      const auto report = validate_mesh(mesh);
      CHECK(report.ok());
      CHECK(report.volume_relative_error < 1e-12);
      double total = 0.0;
      for (int c = 0; c < mesh.num_cells(); ++c) total += mesh.signed_volume(c);
      CHECK(total == doctest::Approx(spec.volume()));
      REQUIRE(mesh.macro_map().size() == static_cast<std::size_t>(mesh.num_cells()));
      // Four children per parent tetrahedron, five parents per sub-cube.
      std::map<int, int> per_parent;
      std::set<int> cubes;
      for (const auto& m : mesh.macro_map()) {
        ++per_parent[m.parent_tet];
        cubes.insert(m.sub_cube);
      }
      for (const auto& [p, count] : per_parent) CHECK(count == 4);
      CHECK(cubes.size() * 5 == per_parent.size());
    }
  }
}

TEST_CASE("each face has at most two cells and interior faces exactly two") {
  const Mesh mesh = generate_mesh(lshape_domain(), 2);
  int boundary = 0;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    CHECK(mesh.face_multiplicity(f) <= 2);
    if (mesh.is_boundary_face(f)) ++boundary;
  }

  // Lateral area 8, top and bottom 3 each.
  double area = 0.0;
  for (const auto& bf : mesh.boundary_faces()) {
    const auto& t = mesh.tets()[bf.tet];
    const auto& fv = kTetFaces[bf.local_face];
    const Point a = mesh.vertices()[t[fv[0]]], b = mesh.vertices()[t[fv[1]]], c = mesh.vertices()[t[fv[2]]];
    area += 0.5 * (b - a).cross(c - a).norm();
  }
  CHECK(area == doctest::Approx(14.0));
  CHECK(boundary == static_cast<int>(mesh.boundary_faces().size()));
}

TEST_CASE("validation flags an inverted cell and a missing block") {
  const Mesh good = generate_mesh(cube_domain(), 1);
  auto tets = good.tets();
  std::swap(tets[3][0], tets[3][1]);
  const Mesh flipped(good.vertices(), tets, 1.0, good.macro_map(), 1.0);
  const auto r = validate_mesh(flipped);
  CHECK_FALSE(r.ok());
  CHECK(r.orientation_violations == std::vector<int>{3});

  auto fewer = good.tets();
  fewer.pop_back();
  auto macro = good.macro_map();
  macro.pop_back();
  const Mesh holed(good.vertices(), fewer, 1.0, macro, 1.0);
  const auto r2 = validate_mesh(holed);
  CHECK(r2.volume_mismatch);
}

TEST_CASE("domain checks") {
  DomainSpec bad;
  CHECK_THROWS_AS(check_domain(bad), std::invalid_argument);
  bad.blocks = {{0, 0, 0}, {2, 0, 0}};
  CHECK_THROWS_AS(check_domain(bad), std::invalid_argument);
  bad.blocks = {{0, 0, 0}, {0, 0, 0}};
  CHECK_THROWS_AS(check_domain(bad), std::invalid_argument);
  CHECK_THROWS_AS(domain_by_name("torus"), std::invalid_argument);
  CHECK(domain_by_name("cubeminuscube").blocks.size() == 7);
  CHECK(cube_minus_cube_domain().z_extent_blocks() == 2);
  CHECK(lshape_domain().z_extent_blocks() == 1);
}

TEST_CASE("vtk output lists every cell") {
  const Mesh mesh = generate_mesh(cube_domain(), 1);
  std::ostringstream out;
  write_vtk(mesh, out);
  const std::string s = out.str();
  CHECK(s.find("CELLS 20 100") != std::string::npos);
  CHECK(s.find("POINTS 13") != std::string::npos);
}

TEST_CASE("a displaced interior vertex folds the mesh") {
  const Mesh good = generate_mesh(cube_domain(), 1);
  auto verts = good.vertices();
  // Cell 0 has the barycenter of its macro tetrahedron as vertex 0.
  const int g = good.tets()[0][0];
  verts[g] += Point(3.0, 3.0, 3.0);
  const Mesh folded(verts, good.tets(), 1.0, good.macro_map(), 1.0);
  const auto r = validate_mesh(folded);
  CHECK_FALSE(r.ok());
  CHECK_FALSE(r.orientation_violations.empty());
  CHECK(r.volume_mismatch);
}

TEST_CASE("block-local split pattern") {
  const Mesh checker = generate_mesh(lshape_domain(), 1);
  const Mesh local = generate_mesh(lshape_domain(), 1, SplitPattern::BlockLocal);
  CHECK(local.num_cells() == 60);
  CHECK(validate_mesh(checker).ok());
  // Two interfaces, each cut by crossing diagonals: two triangles per side.
  const auto r = validate_mesh(local);
  CHECK(r.interior_boundary_faces.size() == 8);
  CHECK(r.orientation_violations.empty());
  CHECK_FALSE(r.volume_mismatch);
  CHECK(local.num_faces() == checker.num_faces() + 4);
  CHECK(local.num_edges() == checker.num_edges() + 2);

  // Even subdivisions shift the pattern by whole periods.
  const Mesh even = generate_mesh(lshape_domain(), 2, SplitPattern::BlockLocal);
  CHECK(validate_mesh(even).ok());
  CHECK(even.num_faces() == generate_mesh(lshape_domain(), 2).num_faces());
}
