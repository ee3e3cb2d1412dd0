#include "hcstokes/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

namespace hcstokes {

double DomainSpec::volume() const {
  return static_cast<double>(blocks.size()) * scale * scale * scale;
}

int DomainSpec::z_extent_blocks() const {
  if (blocks.empty()) return 0;
  auto [lo, hi] = std::minmax_element(blocks.begin(), blocks.end(),
                                      [](const auto& a, const auto& b) { return a[2] < b[2]; });
  return (*hi)[2] - (*lo)[2] + 1;
}

DomainSpec cube_domain() { return {"cube", {{0, 0, 0}}, 1.0}; }

DomainSpec lshape_domain() { return {"lshape", {{-1, 0, 0}, {0, 0, 0}, {0, -1, 0}}, 1.0}; }

DomainSpec cube_minus_cube_domain() {
  DomainSpec spec{"cubeminuscube", {}, 1.0};
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i)
        if (!(i == 1 && j == 1 && k == 1)) spec.blocks.push_back({i, j, k});
  return spec;
}

DomainSpec domain_by_name(std::string_view name) {
  if (name == "cube") return cube_domain();
  if (name == "lshape") return lshape_domain();
  if (name == "cubeminuscube") return cube_minus_cube_domain();
  throw std::invalid_argument("unknown domain '" + std::string(name) +
                              "' (expected cube, lshape or cubeminuscube)");
}

DomainSpec load_domain_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open block file " + path.string());
  nlohmann::json j;
  in >> j;
  DomainSpec spec;
  spec.name = j.value("name", path.stem().string());
  spec.scale = j.value("scale", 1.0);
  for (const auto& b : j.at("blocks")) spec.blocks.push_back({b.at(0), b.at(1), b.at(2)});
  check_domain(spec);
  return spec;
}

void check_domain(const DomainSpec& spec) {
  if (spec.blocks.empty()) throw std::invalid_argument("domain has no blocks");
  if (!(spec.scale > 0.0)) throw std::invalid_argument("block scale must be positive");
  std::set<LatticeCoord> seen;
  for (const auto& b : spec.blocks)
    if (!seen.insert(b).second)
      throw std::invalid_argument("duplicate block (" + std::to_string(b[0]) + "," +
                                  std::to_string(b[1]) + "," + std::to_string(b[2]) + ")");

  std::set<LatticeCoord> reached{spec.blocks.front()};
  std::queue<LatticeCoord> todo;
  todo.push(spec.blocks.front());
  while (!todo.empty()) {
    const auto b = todo.front();
    todo.pop();
    for (int axis = 0; axis < 3; ++axis)
      for (int step : {-1, 1}) {
        auto nb = b;
        nb[axis] += step;
        if (seen.count(nb) && reached.insert(nb).second) todo.push(nb);
      }
  }
  if (reached.size() != seen.size()) throw std::invalid_argument("block set is not face-connected");
}

Mesh::Mesh(std::vector<Point> vertices, std::vector<Tet> tets, double h,
           std::vector<MacroInfo> macro_map, double domain_volume)
    : vertices_(std::move(vertices)),
      tets_(std::move(tets)),
      h_(h),
      macro_(std::move(macro_map)),
      domain_volume_(domain_volume) {
  for (const auto& t : tets_)
    for (int v : t)
      if (v < 0 || v >= num_vertices()) throw std::invalid_argument("tet references missing vertex");
  if (macro_.empty()) macro_.resize(tets_.size());
  build_topology();
}

void Mesh::build_topology() {
  std::map<std::array<int, 2>, int> edge_ids;
  std::map<std::array<int, 3>, int> face_ids;
  cell_edges_.resize(6 * tets_.size());
  cell_faces_.resize(4 * tets_.size());

  for (int c = 0; c < num_cells(); ++c) {
    const auto& t = tets_[c];
    for (int e = 0; e < 6; ++e) {
      std::array<int, 2> key{t[kTetEdges[e][0]], t[kTetEdges[e][1]]};
      std::sort(key.begin(), key.end());
      auto [it, inserted] = edge_ids.try_emplace(key, static_cast<int>(edges_.size()));
      if (inserted) edges_.push_back(key);
      cell_edges_[6 * c + e] = it->second;
    }
    for (int f = 0; f < 4; ++f) {
      std::array<int, 3> key{t[kTetFaces[f][0]], t[kTetFaces[f][1]], t[kTetFaces[f][2]]};
      std::sort(key.begin(), key.end());
      auto [it, inserted] = face_ids.try_emplace(key, static_cast<int>(faces_.size()));
      if (inserted) {
        faces_.push_back(key);
        face_cells_.push_back({c, -1});
        face_count_.push_back(1);
      } else {
        if (face_cells_[it->second][1] < 0) face_cells_[it->second][1] = c;
        ++face_count_[it->second];
      }
      cell_faces_[4 * c + f] = it->second;
    }
  }

  boundary_vertex_.assign(vertices_.size(), false);
  boundary_edge_.assign(edges_.size(), false);
  std::map<std::array<int, 2>, int> edge_lookup;
  for (int e = 0; e < num_edges(); ++e) edge_lookup[edges_[e]] = e;
  for (int c = 0; c < num_cells(); ++c)
    for (int f = 0; f < 4; ++f) {
      const int face = cell_faces_[4 * c + f];
      if (face_count_[face] != 1) continue;
      boundary_faces_.push_back({c, f});
      const auto& fv = faces_[face];
      for (int v : fv) boundary_vertex_[v] = true;
      for (auto [a, b] : {std::pair{0, 1}, std::pair{0, 2}, std::pair{1, 2}})
        boundary_edge_[edge_lookup.at({fv[a], fv[b]})] = true;
    }
}

Eigen::Matrix3d Mesh::jacobian(int cell) const {
  const auto& t = tets_[cell];
  Eigen::Matrix3d j;
  for (int i = 0; i < 3; ++i) j.col(i) = vertices_[t[i + 1]] - vertices_[t[0]];
  return j;
}

double Mesh::signed_volume(int cell) const { return jacobian(cell).determinant() / 6.0; }

Point Mesh::barycenter(int cell) const {
  const auto& t = tets_[cell];
  return 0.25 * (vertices_[t[0]] + vertices_[t[1]] + vertices_[t[2]] + vertices_[t[3]]);
}

namespace {

using Key = std::array<std::int64_t, 3>;

/// Cube corner (a, b, c) with a, b, c in {0, 1}, encoded as a + 2b + 4c.
constexpr std::array<std::array<int, 3>, 8> kCorner{
    {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {0, 0, 1}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}}};

/// Corners adjacent along a cube edge.
std::array<int, 3> corner_neighbours(int corner) { return {corner ^ 1, corner ^ 2, corner ^ 4}; }

}  // namespace

Mesh generate_mesh(const DomainSpec& spec, int n, SplitPattern pattern) {
  if (n < 1) throw std::invalid_argument("subdivision count must be at least 1");
  check_domain(spec);

  const double h = spec.scale / n;
  const double unit = h / 4.0;  // vertex keys are integer multiples of h/4

  std::map<Key, int> vertex_ids;
  std::vector<Point> vertices;
  auto vertex = [&](const Key& key) {
    auto [it, inserted] = vertex_ids.try_emplace(key, static_cast<int>(vertices.size()));
    if (inserted) vertices.emplace_back(key[0] * unit, key[1] * unit, key[2] * unit);
    return it->second;
  };

  std::vector<Tet> tets;
  std::vector<MacroInfo> macro;
  tets.reserve(20 * spec.blocks.size() * n * n * n);
  macro.reserve(tets.capacity());

  int sub_cube = 0;
  int parent = 0;
  for (const auto& block : spec.blocks) {
    for (int c = 0; c < n; ++c)
      for (int b = 0; b < n; ++b)
        for (int a = 0; a < n; ++a, ++sub_cube) {
          const std::array<std::int64_t, 3> origin{block[0] * n + a, block[1] * n + b,
                                                   block[2] * n + c};
          std::array<Key, 8> corner_key;
          for (int q = 0; q < 8; ++q) {
            for (int d = 0; d < 3; ++d) corner_key[q][d] = 4 * (origin[d] + kCorner[q][d]);
          }

          // Core tetrahedron on the corners of one parity, plus one corner
          // tetrahedron per corner of the other. Shared faces then use the same diagonal.
          std::vector<std::array<int, 4>> five;
          std::array<int, 4> core{};
          int nc = 0;
          for (int q = 0; q < 8; ++q) {
            const auto shift = pattern == SplitPattern::BlockLocal ? a + b + c : origin[0] + origin[1] + origin[2];
            const auto parity = (shift + kCorner[q][0] + kCorner[q][1] + kCorner[q][2]) & 1;
            if (parity == (pattern == SplitPattern::EvenCore ? 0 : 1))
              core[nc++] = q;
            else {
              const auto nb = corner_neighbours(q);
              five.push_back({q, nb[0], nb[1], nb[2]});
            }
          }
          five.insert(five.begin(), core);

          for (const auto& corners : five) {
            std::array<Key, 4> keys;
            for (int i = 0; i < 4; ++i) keys[i] = corner_key[corners[i]];
            // orient positively
            auto vol = [&](const std::array<Key, 4>& k) {
              Eigen::Matrix3d m;
              for (int i = 0; i < 3; ++i)
                for (int d = 0; d < 3; ++d) m(d, i) = static_cast<double>(k[i + 1][d] - k[0][d]);
              return m.determinant();
            };
            if (vol(keys) < 0) std::swap(keys[2], keys[3]);

            Key centre{};
            for (int d = 0; d < 3; ++d)
              centre[d] = (keys[0][d] + keys[1][d] + keys[2][d] + keys[3][d]) / 4;

            std::array<int, 4> ids;
            for (int i = 0; i < 4; ++i) ids[i] = vertex(keys[i]);
            const int g = vertex(centre);
            for (int i = 0; i < 4; ++i) {
              Tet child = ids;
              child[i] = g;
              tets.push_back(child);
              macro.push_back({parent, sub_cube});
            }
            ++parent;
          }
        }
  }
  return Mesh(std::move(vertices), std::move(tets), h, std::move(macro), spec.volume());
}

ValidationReport validate_mesh(const Mesh& mesh) {
  ValidationReport report;
  const auto& v = mesh.vertices();
  double total = 0.0;
  double max_vol = 0.0;
  for (int c = 0; c < mesh.num_cells(); ++c) max_vol = std::max(max_vol, std::abs(mesh.signed_volume(c)));
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const double vol = mesh.signed_volume(c);
    total += std::abs(vol);
    if (vol <= 1e-14 * max_vol) report.orientation_violations.push_back(c);
  }

  for (int f = 0; f < mesh.num_faces(); ++f) {
    if (mesh.face_multiplicity(f) > 2) {
      report.nonconforming_faces.push_back(f);
      continue;
    }
    if (mesh.is_boundary_face(f)) continue;
    // The two cells must lie on opposite sides of the shared face.
    const auto& fv = mesh.faces()[f];
    const Point normal = (v[fv[1]] - v[fv[0]]).cross(v[fv[2]] - v[fv[0]]);
    std::array<double, 2> side{};
    for (int s = 0; s < 2; ++s) {
      const auto& t = mesh.tets()[mesh.face_cells(f)[s]];
      for (int vert : t)
        if (vert != fv[0] && vert != fv[1] && vert != fv[2]) side[s] = normal.dot(v[vert] - v[fv[0]]);
    }
    if (!(side[0] * side[1] < 0.0)) report.nonconforming_faces.push_back(f);
  }

  if (mesh.domain_volume() > 0.0) {
    report.volume_relative_error = std::abs(total - mesh.domain_volume()) / mesh.domain_volume();
    report.volume_mismatch = report.volume_relative_error > 1e-12;
  }

  std::map<std::array<int, 2>, int> edge_use;
  for (const auto& bf : mesh.boundary_faces()) {
    const auto& fv = mesh.faces()[mesh.cell_face(bf.tet, bf.local_face)];
    edge_use[{fv[0], fv[1]}]++;
    edge_use[{fv[0], fv[2]}]++;
    edge_use[{fv[1], fv[2]}]++;
  }
  for (const auto& [edge, count] : edge_use)
    if (count != 2) report.open_boundary_edges.push_back(edge);

  // Boundary faces that touch back to back lie inside the domain: the two
  // sides of a block interface were cut along different diagonals.
  struct Side {
    int face;
    Point normal;
    Point centre;
  };
  std::map<std::array<std::int64_t, 4>, std::vector<Side>> planes;
  const double snap = 1e9 / std::max(mesh.h(), 1e-300);
  for (const auto& bf : mesh.boundary_faces()) {
    const int f = mesh.cell_face(bf.tet, bf.local_face);
    const auto& fv = mesh.faces()[f];
    Point n = (v[fv[1]] - v[fv[0]]).cross(v[fv[2]] - v[fv[0]]).normalized();
    if (n.dot(v[mesh.tets()[bf.tet][bf.local_face]] - v[fv[0]]) > 0.0) n = -n;
    const Point centre = 0.6 * v[fv[0]] + 0.25 * v[fv[1]] + 0.15 * v[fv[2]];  // off every median
    Point axis = n;
    if (axis[0] < 0 || (axis[0] == 0 && (axis[1] < 0 || (axis[1] == 0 && axis[2] < 0)))) axis = -axis;
    std::array<std::int64_t, 4> key;
    for (int d = 0; d < 3; ++d) key[d] = std::llround(axis[d] * 1e9);
    key[3] = std::llround(axis.dot(centre) * snap);
    planes[key].push_back({f, n, centre});
  }
  for (const auto& [key, sides] : planes) {
    for (const auto& a : sides)
      for (const auto& b : sides) {
        if (a.normal.dot(b.normal) > 0.0) continue;
        // Is a generic point of a inside triangle b?
        const auto& fv = mesh.faces()[b.face];
        const Point p0 = v[fv[0]], p1 = v[fv[1]], p2 = v[fv[2]];
        const double area = (p1 - p0).cross(p2 - p0).dot(b.normal);
        const double l0 = (p1 - a.centre).cross(p2 - a.centre).dot(b.normal) / area;
        const double l1 = (p2 - a.centre).cross(p0 - a.centre).dot(b.normal) / area;
        if (l0 > 1e-12 && l1 > 1e-12 && 1.0 - l0 - l1 > 1e-12) {
          report.interior_boundary_faces.push_back(a.face);
          break;
        }
      }
  }
  std::sort(report.interior_boundary_faces.begin(), report.interior_boundary_faces.end());
  return report;
}

MeshStats mesh_statistics(const Mesh& mesh) {
  MeshStats s;
  s.num_cells = mesh.num_cells();
  s.num_vertices = mesh.num_vertices();
  s.num_edges = mesh.num_edges();
  s.num_faces = mesh.num_faces();
  s.h = mesh.h();
  if (mesh.num_cells() > 0) {
    s.min_volume = s.max_volume = mesh.signed_volume(0);
    for (int c = 1; c < mesh.num_cells(); ++c) {
      const double vol = mesh.signed_volume(c);
      s.min_volume = std::min(s.min_volume, vol);
      s.max_volume = std::max(s.max_volume, vol);
    }
  }
  for (const auto& e : mesh.edges())
    s.max_diameter = std::max(s.max_diameter, (mesh.vertices()[e[1]] - mesh.vertices()[e[0]]).norm());
  return s;
}

void write_vtk(const Mesh& mesh, std::ostream& out) {
  out << "# vtk DataFile Version 3.0\nhcstokes mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_vertices() << " double\n";
  out.precision(17);
  for (const auto& p : mesh.vertices()) out << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';
  out << "CELLS " << mesh.num_cells() << ' ' << 5 * mesh.num_cells() << '\n';
  for (const auto& t : mesh.tets()) out << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  out << "CELL_TYPES " << mesh.num_cells() << '\n';
  for (int c = 0; c < mesh.num_cells(); ++c) out << "10\n";
  out << "CELL_DATA " << mesh.num_cells() << "\nSCALARS sub_cube int 1\nLOOKUP_TABLE default\n";
  for (const auto& m : mesh.macro_map()) out << m.sub_cube << '\n';
}

std::string mesh_to_json(const Mesh& mesh) {
  nlohmann::json j;
  j["schema"] = 1;
  j["h"] = mesh.h();
  auto& verts = j["vertices"] = nlohmann::json::array();
  for (const auto& p : mesh.vertices()) verts.push_back({p[0], p[1], p[2]});
  auto& tets = j["tets"] = nlohmann::json::array();
  for (const auto& t : mesh.tets()) tets.push_back({t[0], t[1], t[2], t[3]});
  return j.dump();
}

}  // namespace hcstokes
