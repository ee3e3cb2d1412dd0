#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace hcstokes {

using Point = Eigen::Vector3d;
using Tet = std::array<int, 4>;
using LatticeCoord = std::array<int, 3>;

/// A polyhedral domain made of axis-aligned lattice cubes of edge `scale`.
/// Block (i, j, k) occupies [i, i+1] x [j, j+1] x [k, k+1] times `scale`.
struct DomainSpec {
  std::string name = "custom";
  std::vector<LatticeCoord> blocks;
  double scale = 1.0;

  double volume() const;
  /// Number of blocks spanned along z.
  int z_extent_blocks() const;
};

DomainSpec cube_domain();
/// ((-1,1)^2 \ [-1,0]^2) x (0,1): three unit blocks.
DomainSpec lshape_domain();
/// (0,2)^3 \ [1,2]^3: seven unit blocks.
DomainSpec cube_minus_cube_domain();

/// Looks up `cube`, `lshape` or `cubeminuscube`; throws std::invalid_argument otherwise.
DomainSpec domain_by_name(std::string_view name);

/// Reads {"blocks": [[i,j,k], ...], "scale": s} from a JSON file.
DomainSpec load_domain_json(const std::filesystem::path& path);

/// Throws std::invalid_argument if the block set is empty, has duplicates or is
/// not face-connected.
void check_domain(const DomainSpec& spec);

struct MacroInfo {
  int parent_tet = -1;  ///< index of the 5-split tetrahedron the cell came from
  int sub_cube = -1;    ///< index of the sub-cube the parent tetrahedron belongs to
};

struct BoundaryFace {
  int tet = -1;
  int local_face = -1;  ///< local face i is opposite local vertex i
};

/// Local edge (a, b) ordering used for tetrahedra everywhere in the library.
inline constexpr std::array<std::array<int, 2>, 6> kTetEdges{
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

/// Local face i is the face opposite local vertex i, vertices listed ascending.
inline constexpr std::array<std::array<int, 3>, 4> kTetFaces{
    {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};

/// Tetrahedral mesh with derived edge/face topology. Immutable after construction.
class Mesh {
 public:
  Mesh() = default;
  Mesh(std::vector<Point> vertices, std::vector<Tet> tets, double h,
       std::vector<MacroInfo> macro_map, double domain_volume);

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<Tet>& tets() const { return tets_; }
  const std::vector<MacroInfo>& macro_map() const { return macro_; }
  const std::vector<BoundaryFace>& boundary_faces() const { return boundary_faces_; }

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_cells() const { return static_cast<int>(tets_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  int num_faces() const { return static_cast<int>(faces_.size()); }

  /// Sub-cube edge length.
  double h() const { return h_; }
  double domain_volume() const { return domain_volume_; }

  /// Global edges as ascending vertex pairs.
  const std::vector<std::array<int, 2>>& edges() const { return edges_; }
  /// Global faces as ascending vertex triples.
  const std::vector<std::array<int, 3>>& faces() const { return faces_; }
  int cell_edge(int cell, int local) const { return cell_edges_[6 * cell + local]; }
  int cell_face(int cell, int local) const { return cell_faces_[4 * cell + local]; }
  /// Cells adjacent to a face; the second entry is -1 on the boundary.
  const std::array<int, 2>& face_cells(int face) const { return face_cells_[face]; }
  bool is_boundary_face(int face) const { return face_cells_[face][1] < 0; }
  /// Number of cells referencing each face; more than two signals a broken mesh.
  int face_multiplicity(int face) const { return face_count_[face]; }
  bool is_boundary_vertex(int v) const { return boundary_vertex_[v]; }
  bool is_boundary_edge(int e) const { return boundary_edge_[e]; }

  /// Columns are v1-v0, v2-v0, v3-v0.
  Eigen::Matrix3d jacobian(int cell) const;
  double signed_volume(int cell) const;
  Point barycenter(int cell) const;

 private:
  void build_topology();

  std::vector<Point> vertices_;
  std::vector<Tet> tets_;
  double h_ = 0.0;
  std::vector<MacroInfo> macro_;
  double domain_volume_ = 0.0;

  std::vector<std::array<int, 2>> edges_;
  std::vector<std::array<int, 3>> faces_;
  std::vector<int> cell_edges_;
  std::vector<int> cell_faces_;
  std::vector<std::array<int, 2>> face_cells_;
  std::vector<int> face_count_;
  std::vector<BoundaryFace> boundary_faces_;
  std::vector<bool> boundary_vertex_;
  std::vector<bool> boundary_edge_;
};

/// Orientation of the five-tetrahedron split.
///
/// OddCore and EvenCore alternate it with the global lattice parity, putting
/// the core tetrahedron on the odd (even) sub-cube corners; both are
/// face-conforming and coincide up to reflection when n is odd. BlockLocal
/// restarts the OddCore pattern in every block; when n is odd, neighbouring
/// blocks then cut their shared square along crossing diagonals, the two
/// sides do not share faces and each side is treated as boundary.
enum class SplitPattern { OddCore, EvenCore, BlockLocal };

/// Zhang-style mesh: every block is cut into n^3 sub-cubes, each sub-cube into
/// five tetrahedra, and every tetrahedron into four around its barycenter.
Mesh generate_mesh(const DomainSpec& spec, int n, SplitPattern pattern = SplitPattern::OddCore);

struct ValidationReport {
  std::vector<int> orientation_violations;   ///< cells with non-positive volume
  std::vector<int> nonconforming_faces;      ///< faces shared wrongly or folded
  bool volume_mismatch = false;
  double volume_relative_error = 0.0;
  std::vector<std::array<int, 2>> open_boundary_edges;  ///< edges not closed by two boundary faces
  std::vector<int> interior_boundary_faces;  ///< boundary faces overlapping another boundary face back to back

  bool ok() const {
    return orientation_violations.empty() && nonconforming_faces.empty() && !volume_mismatch &&
           open_boundary_edges.empty() &&
           interior_boundary_faces.empty();
  }
};

ValidationReport validate_mesh(const Mesh& mesh);

struct MeshStats {
  int num_cells = 0;
  int num_vertices = 0;
  int num_edges = 0;
  int num_faces = 0;
  double h = 0.0;
  double min_volume = 0.0;
  double max_volume = 0.0;
  double max_diameter = 0.0;  ///< longest edge
};

MeshStats mesh_statistics(const Mesh& mesh);

/// Legacy VTK ASCII unstructured grid, cell type 10.
void write_vtk(const Mesh& mesh, std::ostream& out);
/// {"schema": 1, "vertices": [...], "tets": [...], "h": h}
std::string mesh_to_json(const Mesh& mesh);

}  // namespace hcstokes
