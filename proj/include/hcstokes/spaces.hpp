#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hcstokes/elements.hpp"
#include "hcstokes/mesh.hpp"

namespace hcstokes {

enum class SpaceFamily { Lagrange, DiscontinuousLagrange, RaviartThomas, CrouzeixRaviart };
enum class Constraint { None, ZeroBoundary, ZeroMean };

std::string to_string(SpaceFamily family);

using ScalarFunction = std::function<double(const Point&)>;
using VectorFunction = std::function<Eigen::Vector3d(const Point&)>;

/// Reference-element data tabulated at the points of one quadrature rule.
struct ReferenceTabulation {
  const QuadratureRule* rule = nullptr;
  Eigen::MatrixXd values;                   ///< nq x n (scalar) or nq x raw (RT)
  std::array<Eigen::MatrixXd, 3> gradient;  ///< scalar families: d/dx_hat_d, nq x n
  std::array<Eigen::MatrixXd, 3> vector;    ///< RT raw components, nq x raw
  Eigen::MatrixXd divergence;               ///< RT raw divergence, nq x raw
};

/// Physical basis data on one cell. For scalar families `values` and
/// `gradient` are filled, for Raviart-Thomas `vector` and `divergence`.
struct CellValues {
  int cell = -1;
  Eigen::VectorXd weights;                  ///< quadrature weight times |det J|
  Eigen::MatrixXd points;                   ///< nq x 3 physical points
  Eigen::MatrixXd values;                   ///< nq x n
  std::array<Eigen::MatrixXd, 3> gradient;  ///< nq x n each
  std::array<Eigen::MatrixXd, 3> vector;    ///< nq x n each
  Eigen::MatrixXd divergence;               ///< nq x n
};

/// A finite element space on a mesh: scalar family replicated over
/// `components` (vector Lagrange, vector DG, tensor RT as three RT rows).
///
/// Global numbering is component-major: dof (c, i) lives at c * scalar_dim + i.
/// The mesh must outlive the space.
class Space {
 public:
  Space(const Mesh& mesh, SpaceFamily family, int degree, int components = 1,
        Constraint constraint = Constraint::None);

  const Mesh& mesh() const { return *mesh_; }
  SpaceFamily family() const { return family_; }
  int degree() const { return degree_; }
  int components() const { return components_; }
  Constraint constraint() const { return constraint_; }
  const ReferenceElement& element() const { return *element_; }

  int scalar_dim() const { return scalar_dim_; }
  int dim() const { return components_ * scalar_dim_; }
  int dofs_per_cell() const { return element_->dim(); }
  std::span<const int> cell_dofs(int cell) const {
    return {cell_dofs_.data() + static_cast<std::size_t>(cell) * dofs_per_cell(),
            static_cast<std::size_t>(dofs_per_cell())};
  }
  int index(int component, int scalar_dof) const { return component * scalar_dim_ + scalar_dof; }

  /// Scalar dofs supported on the domain boundary.
  const std::vector<bool>& boundary_dofs() const { return boundary_; }
  /// Full-space indices that remain free under the space constraint
  /// (all of them unless ZeroBoundary).
  const std::vector<int>& free_dofs() const { return free_; }

  bool continuous() const { return family_ == SpaceFamily::Lagrange; }
  bool vector_valued_element() const { return family_ == SpaceFamily::RaviartThomas; }

  /// Raviart-Thomas coefficients (raw -> basis) for the cell's vertex ordering.
  const Eigen::MatrixXd& rt_coefficients(int cell) const;

  /// Cached reference tabulation; thread safe.
  const ReferenceTabulation& reference(int order) const;

  /// Physical basis values on a cell for a tabulation obtained from reference().
  CellValues tabulate(const ReferenceTabulation& ref, int cell) const;

 private:
  const Mesh* mesh_ = nullptr;
  SpaceFamily family_;
  int degree_;
  int components_;
  Constraint constraint_;
  std::shared_ptr<const ReferenceElement> element_;
  int scalar_dim_ = 0;
  std::vector<int> cell_dofs_;
  std::vector<bool> boundary_;
  std::vector<int> free_;

  mutable std::mutex cache_lock_;
  mutable std::map<int, std::unique_ptr<ReferenceTabulation>> cache_;
};

/// Coefficient vector on a space.
class FieldVector {
 public:
  FieldVector(const Space& space, Eigen::VectorXd coefficients);
  explicit FieldVector(const Space& space);

  const Space& space() const { return *space_; }
  const Eigen::VectorXd& coefficients() const { return coeffs_; }
  Eigen::VectorXd& coefficients() { return coeffs_; }

  /// Values at the reference point `xref` of `cell`: components x 3 for RT
  /// (row c is the c-th RT row), components x 1 otherwise.
  Eigen::MatrixXd value(int cell, const Eigen::Vector3d& xref) const;
  /// Scalar families: components x 3 physical gradient.
  Eigen::MatrixXd gradient(int cell, const Eigen::Vector3d& xref) const;
  /// RT: divergence of each row (components entries).
  Eigen::VectorXd divergence(int cell, const Eigen::Vector3d& xref) const;

  /// {"schema":1, "family", "degree", "components", "dim", "coefficients", "cell_dofs"}.
  /// Coefficients follow the global numbering; `cell_dofs` lists, element by
  /// element, the global index of every local dof.
  std::string to_json() const;
  static FieldVector from_json(const Space& space, const std::string& text);
  void write_binary(const std::filesystem::path& path) const;
  static FieldVector read_binary(const Space& space, const std::filesystem::path& path);

 private:
  const Space* space_;
  Eigen::VectorXd coeffs_;
};

/// Element-wise L2 projection onto a discontinuous space. `order` is the
/// quadrature order used for `f`; it must be supplied because f may not be a
/// polynomial.
FieldVector l2_project(const VectorFunction& f, const Space& target, int order);
/// Projection of a field defined on the same mesh; exact quadrature is chosen.
FieldVector l2_project(const FieldVector& source, const Space& target);

/// Mean functional m with m . coeffs = integral of the (single component)
/// scalar field. Used as a Lagrange multiplier row for zero-mean constraints.
Eigen::VectorXd mean_functional(const Space& space);

/// Coefficients of the nodal/Lagrange or RT interpolant of a smooth field.
/// Lagrange: nodal interpolation; DG: L2 projection (order 2 * degree + 4).
FieldVector interpolate(const VectorFunction& f, const Space& space);

/// L2 norm of (f - field) computed with the given quadrature order.
double l2_error(const VectorFunction& f, const FieldVector& field, int order);

}  // namespace hcstokes
