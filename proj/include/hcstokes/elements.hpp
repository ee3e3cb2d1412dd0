#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

namespace hcstokes {

/// Quadrature on the reference tetrahedron with vertices 0, e1, e2, e3.
/// Weights sum to 1/6.
struct QuadratureRule {
  int order = 0;
  std::vector<Eigen::Vector3d> points;
  std::vector<double> weights;

  int size() const { return static_cast<int>(points.size()); }
  /// (1 - x - y - z, x, y, z)
  std::array<double, 4> barycentric(int q) const;
};

/// Quadrature on the reference triangle (0,0), (1,0), (0,1). Weights sum to 1/2.
struct TriangleRule {
  int order = 0;
  std::vector<Eigen::Vector2d> points;
  std::vector<double> weights;

  int size() const { return static_cast<int>(points.size()); }
};

inline constexpr int kMaxQuadratureOrder = 24;

/// Collapsed Gauss-Jacobi rule exact for polynomials of total degree <= order.
/// Rules are cached; the returned reference stays valid for the program lifetime.
const QuadratureRule& quadrature(int order);
const TriangleRule& triangle_quadrature(int order);

/// Gauss-Jacobi nodes and weights on [0, 1] for the weight (1 - t)^alpha.
void gauss_jacobi(int n, int alpha, std::vector<double>& nodes, std::vector<double>& weights);

enum class ElementFamily { Lagrange, RaviartThomas, CrouzeixRaviart };

enum class Entity { Vertex, Edge, Face, Interior };

struct DofDescriptor {
  Entity entity = Entity::Interior;
  int entity_index = 0;  ///< local vertex/edge/face number
  int moment = 0;        ///< index of the node or moment on that entity
};

using MultiIndex = std::array<int, 4>;

/// Reference-element basis on the unit tetrahedron.
///
/// Lagrange and Crouzeix-Raviart bases are scalar and nodal. Raviart-Thomas
/// bases are vector valued; their degrees of freedom are normal moments
/// against P_m on each face plus interior moments against (P_{m-1})^3.
class ReferenceElement {
 public:
  ElementFamily family() const { return family_; }
  int degree() const { return degree_; }
  int dim() const { return static_cast<int>(dofs_.size()); }
  bool vector_valued() const { return family_ == ElementFamily::RaviartThomas; }
  const std::vector<DofDescriptor>& dofs() const { return dofs_; }

  /// Lagrange nodes as barycentric multi-indices (sum = degree).
  const std::vector<MultiIndex>& nodes() const { return nodes_; }
  Eigen::Vector3d node_point(int i) const;

  /// Scalar families: one value per basis function.
  Eigen::VectorXd values(const Eigen::Vector3d& x) const;
  /// Scalar families: dim x 3 reference gradients.
  Eigen::MatrixXd gradients(const Eigen::Vector3d& x) const;

  /// Raviart-Thomas: dim x 3 values.
  Eigen::MatrixXd vector_values(const Eigen::Vector3d& x) const;
  /// Raviart-Thomas: divergence of each basis function.
  Eigen::VectorXd divergence(const Eigen::Vector3d& x) const;
  /// Raviart-Thomas degrees of freedom of a field given on the reference cell,
  /// with face moments oriented by `vertex_keys` (see rt_coefficients).
  Eigen::VectorXd apply_dofs(const std::function<Eigen::Vector3d(const Eigen::Vector3d&)>& field,
                             const std::array<int, 4>& vertex_keys = {0, 1, 2, 3}) const;

  /// Raviart-Thomas spanning set (P_m)^3 + x * homogeneous P_m.
  int raw_dim() const { return static_cast<int>(raw_.size()); }
  Eigen::MatrixXd raw_values(const Eigen::Vector3d& x) const;
  Eigen::VectorXd raw_divergence(const Eigen::Vector3d& x) const;

  /// Coefficients C (raw_dim x dim) turning the spanning set into the dual
  /// basis whose face moments use the face vertices in ascending order of
  /// `vertex_keys` (typically global vertex numbers). Face moments are
  /// integrals of p.(u x w) q over the face parametrisation, which Piola
  /// mapping preserves, so neighbouring cells agree on shared faces.
  /// Only meaningful for Raviart-Thomas; all 24 orderings are precomputed.
  const Eigen::MatrixXd& rt_coefficients(const std::array<int, 4>& vertex_keys) const;

  friend std::shared_ptr<const ReferenceElement> lagrange_element(int k);
  friend std::shared_ptr<const ReferenceElement> rt_element(int m);
  friend std::shared_ptr<const ReferenceElement> cr_element();

 private:
  struct RawField {
    int component = -1;          ///< -1 marks x * monomial
    std::array<int, 3> power{};  ///< monomial exponents
  };

  Eigen::MatrixXd build_rt_coefficients(const std::array<int, 4>& vertex_keys) const;
  Eigen::VectorXd rt_dofs(const std::function<Eigen::Vector3d(const Eigen::Vector3d&)>& field,
                          const std::array<int, 4>& vertex_keys) const;

  ElementFamily family_ = ElementFamily::Lagrange;
  int degree_ = 0;
  std::vector<DofDescriptor> dofs_;
  std::vector<MultiIndex> nodes_;
  std::vector<RawField> raw_;
  std::vector<std::array<int, 3>> interior_moments_;
  std::array<Eigen::MatrixXd, 24> rt_cache_;
};

/// Nodal P_k, 0 <= k <= 4 (k = 0 is the constant element).
std::shared_ptr<const ReferenceElement> lagrange_element(int k);
/// RT_m with 0 <= m <= 2; dimension (m+1)(m+2)(m+4)/2.
std::shared_ptr<const ReferenceElement> rt_element(int m);
/// P1 nodal at face barycenters; basis i belongs to the face opposite vertex i.
std::shared_ptr<const ReferenceElement> cr_element();

/// All exponent triples with total degree <= deg (or == deg when homogeneous).
std::vector<std::array<int, 3>> monomial_exponents(int deg, bool homogeneous = false);

/// Index 0..23 of the permutation pattern of four distinct keys.
int rank_pattern(const std::array<int, 4>& keys);

}  // namespace hcstokes
