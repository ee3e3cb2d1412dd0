#include "hcstokes/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

namespace hcstokes {

std::string to_string(SpaceFamily family) {
  switch (family) {
    case SpaceFamily::Lagrange: return "lagrange";
    case SpaceFamily::DiscontinuousLagrange: return "dg";
    case SpaceFamily::RaviartThomas: return "rt";
    case SpaceFamily::CrouzeixRaviart: return "cr";
  }
  return "unknown";
}

namespace {

/// Position of the face-interior node (i, j) in the element's enumeration.
int face_node_index(int k, int i, int j) {
  int idx = 0;
  for (int a = 1; a < k; ++a)
    for (int b = 1; a + b < k; ++b) {
      if (a == i && b == j) return idx;
      ++idx;
    }
  throw std::logic_error("face node outside lattice");
}

int local_edge(int a, int b) {
  for (int e = 0; e < 6; ++e)
    if ((kTetEdges[e][0] == a && kTetEdges[e][1] == b) || (kTetEdges[e][0] == b && kTetEdges[e][1] == a))
      return e;
  throw std::logic_error("not an edge");
}

}  // namespace

Space::Space(const Mesh& mesh, SpaceFamily family, int degree, int components, Constraint constraint)
    : mesh_(&mesh), family_(family), degree_(degree), components_(components), constraint_(constraint) {
  if (components < 1 || components > 3) throw std::invalid_argument("components must be 1..3");
  switch (family) {
    case SpaceFamily::Lagrange:
      if (degree < 1) throw std::invalid_argument("continuous Lagrange needs degree >= 1");
      element_ = lagrange_element(degree);
      break;
    case SpaceFamily::DiscontinuousLagrange: element_ = lagrange_element(degree); break;
    case SpaceFamily::RaviartThomas: element_ = rt_element(degree); break;
    case SpaceFamily::CrouzeixRaviart:
      if (degree != 1) throw std::invalid_argument("Crouzeix-Raviart is degree 1 only");
      element_ = cr_element();
      break;
  }

  const int nc = mesh.num_cells();
  const int n = element_->dim();
  cell_dofs_.resize(static_cast<std::size_t>(nc) * n);
  const auto& dofs = element_->dofs();

  switch (family) {
    case SpaceFamily::DiscontinuousLagrange: {
      scalar_dim_ = nc * n;
      for (int i = 0; i < nc * n; ++i) cell_dofs_[i] = i;
      boundary_.assign(scalar_dim_, false);
      break;
    }
    case SpaceFamily::CrouzeixRaviart: {
      scalar_dim_ = mesh.num_faces();
      boundary_.assign(scalar_dim_, false);
      for (int f = 0; f < mesh.num_faces(); ++f) boundary_[f] = mesh.is_boundary_face(f);
      for (int c = 0; c < nc; ++c)
        for (int i = 0; i < 4; ++i) cell_dofs_[4 * c + i] = mesh.cell_face(c, i);
      break;
    }
    case SpaceFamily::RaviartThomas: {
      const int per_face = (degree + 1) * (degree + 2) / 2;
      const int interior = n - 4 * per_face;
      const int face_block = mesh.num_faces() * per_face;
      scalar_dim_ = face_block + nc * interior;
      boundary_.assign(scalar_dim_, false);
      for (int c = 0; c < nc; ++c)
        for (int i = 0; i < n; ++i) {
          const auto& d = dofs[i];
          const int g = d.entity == Entity::Face
                            ? mesh.cell_face(c, d.entity_index) * per_face + d.moment
                            : face_block + c * interior + d.moment;
          cell_dofs_[static_cast<std::size_t>(c) * n + i] = g;
          if (d.entity == Entity::Face) boundary_[g] = mesh.is_boundary_face(mesh.cell_face(c, d.entity_index));
        }
      break;
    }
    case SpaceFamily::Lagrange: {
      const int k = degree;
      const int nv = mesh.num_vertices();
      const int per_edge = k - 1;
      const int per_face = (k - 1) * (k - 2) / 2;
      const int per_cell = (k - 1) * (k - 2) * (k - 3) / 6;
      const int edge_base = nv;
      const int face_base = edge_base + mesh.num_edges() * per_edge;
      const int cell_base = face_base + mesh.num_faces() * per_face;
      scalar_dim_ = cell_base + nc * per_cell;
      boundary_.assign(scalar_dim_, false);
      const auto& nodes = element_->nodes();
      for (int c = 0; c < nc; ++c) {
        const auto& t = mesh.tets()[c];
        for (int i = 0; i < n; ++i) {
          const auto& a = nodes[i];
          std::vector<int> support;
          for (int v = 0; v < 4; ++v)
            if (a[v] > 0) support.push_back(v);
          int g = -1;
          bool on_boundary = false;
          if (support.size() == 1) {
            g = t[support[0]];
            on_boundary = mesh.is_boundary_vertex(g);
          } else if (support.size() == 2) {
            const int e = mesh.cell_edge(c, local_edge(support[0], support[1]));
            const int hi = t[support[0]] > t[support[1]] ? support[0] : support[1];
            g = edge_base + e * per_edge + (a[hi] - 1);
            on_boundary = mesh.is_boundary_edge(e);
          } else if (support.size() == 3) {
            int missing = 0;
            while (a[missing] > 0) ++missing;
            const int f = mesh.cell_face(c, missing);
            std::array<int, 3> sv{support[0], support[1], support[2]};
            std::sort(sv.begin(), sv.end(), [&](int x, int y) { return t[x] < t[y]; });
            g = face_base + f * per_face + face_node_index(k, a[sv[1]], a[sv[2]]);
            on_boundary = mesh.is_boundary_face(f);
          } else {
            g = cell_base + c * per_cell + dofs[i].moment;
          }
          cell_dofs_[static_cast<std::size_t>(c) * n + i] = g;
          boundary_[g] = on_boundary;
        }
      }
      break;
    }
  }

  for (int comp = 0; comp < components_; ++comp)
    for (int i = 0; i < scalar_dim_; ++i)
      if (constraint_ != Constraint::ZeroBoundary || !boundary_[i]) free_.push_back(index(comp, i));
}

const Eigen::MatrixXd& Space::rt_coefficients(int cell) const {
  const auto& t = mesh_->tets()[cell];
  return element_->rt_coefficients({t[0], t[1], t[2], t[3]});
}

const ReferenceTabulation& Space::reference(int order) const {
  std::lock_guard guard(cache_lock_);
  auto& slot = cache_[order];
  if (slot) return *slot;
  auto tab = std::make_unique<ReferenceTabulation>();
  const auto& rule = quadrature(order);
  tab->rule = &rule;
  const int nq = rule.size();
  if (vector_valued_element()) {
    const int nr = element_->raw_dim();
    for (auto& m : tab->vector) m.resize(nq, nr);
    tab->divergence.resize(nq, nr);
    for (int q = 0; q < nq; ++q) {
      const Eigen::MatrixXd raw = element_->raw_values(rule.points[q]);
      for (int d = 0; d < 3; ++d) tab->vector[d].row(q) = raw.col(d).transpose();
      tab->divergence.row(q) = element_->raw_divergence(rule.points[q]).transpose();
    }
  } else {
    const int n = element_->dim();
    tab->values.resize(nq, n);
    for (auto& m : tab->gradient) m.resize(nq, n);
    for (int q = 0; q < nq; ++q) {
      tab->values.row(q) = element_->values(rule.points[q]).transpose();
      const Eigen::MatrixXd g = element_->gradients(rule.points[q]);
      for (int d = 0; d < 3; ++d) tab->gradient[d].row(q) = g.col(d).transpose();
    }
  }
  slot = std::move(tab);
  return *slot;
}

CellValues Space::tabulate(const ReferenceTabulation& ref, int cell) const {
  CellValues cv;
  cv.cell = cell;
  const auto& rule = *ref.rule;
  const int nq = rule.size();
  const Eigen::Matrix3d jac = mesh_->jacobian(cell);
  const double det = jac.determinant();
  const Point& origin = mesh_->vertices()[mesh_->tets()[cell][0]];

  cv.weights.resize(nq);
  cv.points.resize(nq, 3);
  for (int q = 0; q < nq; ++q) {
    cv.weights[q] = rule.weights[q] * std::abs(det);
    cv.points.row(q) = (origin + jac * rule.points[q]).transpose();
  }

  if (vector_valued_element()) {
    const Eigen::MatrixXd& coeff = rt_coefficients(cell);
    std::array<Eigen::MatrixXd, 3> ref_basis;
    for (int d = 0; d < 3; ++d) ref_basis[d] = ref.vector[d] * coeff;
    for (int d = 0; d < 3; ++d)
      cv.vector[d] = (jac(d, 0) * ref_basis[0] + jac(d, 1) * ref_basis[1] + jac(d, 2) * ref_basis[2]) / det;
    cv.divergence = ref.divergence * coeff / det;
  } else {
    const Eigen::Matrix3d inv_t = jac.inverse().transpose();
    cv.values = ref.values;
    for (int d = 0; d < 3; ++d)
      cv.gradient[d] = inv_t(d, 0) * ref.gradient[0] + inv_t(d, 1) * ref.gradient[1] + inv_t(d, 2) * ref.gradient[2];
  }
  return cv;
}

FieldVector::FieldVector(const Space& space, Eigen::VectorXd coefficients)
    : space_(&space), coeffs_(std::move(coefficients)) {
  if (coeffs_.size() != space.dim())
    throw std::invalid_argument("coefficient vector length " + std::to_string(coeffs_.size()) +
                                " does not match space dimension " + std::to_string(space.dim()));
}

FieldVector::FieldVector(const Space& space) : space_(&space), coeffs_(Eigen::VectorXd::Zero(space.dim())) {}

Eigen::MatrixXd FieldVector::value(int cell, const Eigen::Vector3d& xref) const {
  const Space& s = *space_;
  const auto dofs = s.cell_dofs(cell);
  const int n = s.dofs_per_cell();
  if (s.vector_valued_element()) {
    const Eigen::Matrix3d jac = s.mesh().jacobian(cell);
    const Eigen::MatrixXd basis = s.rt_coefficients(cell).transpose() * s.element().raw_values(xref);  // n x 3
    const Eigen::MatrixXd phys = (jac * basis.transpose()) / jac.determinant();                       // 3 x n
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(s.components(), 3);
    for (int c = 0; c < s.components(); ++c)
      for (int i = 0; i < n; ++i) out.row(c) += coeffs_[s.index(c, dofs[i])] * phys.col(i).transpose();
    return out;
  }
  const Eigen::VectorXd phi = s.element().values(xref);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(s.components(), 1);
  for (int c = 0; c < s.components(); ++c)
    for (int i = 0; i < n; ++i) out(c, 0) += coeffs_[s.index(c, dofs[i])] * phi[i];
  return out;
}

Eigen::MatrixXd FieldVector::gradient(int cell, const Eigen::Vector3d& xref) const {
  const Space& s = *space_;
  if (s.vector_valued_element()) throw std::logic_error("gradient() is for scalar families");
  const auto dofs = s.cell_dofs(cell);
  const Eigen::MatrixXd g = s.element().gradients(xref) * s.mesh().jacobian(cell).inverse();  // n x 3
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(s.components(), 3);
  for (int c = 0; c < s.components(); ++c)
    for (int i = 0; i < s.dofs_per_cell(); ++i) out.row(c) += coeffs_[s.index(c, dofs[i])] * g.row(i);
  return out;
}

Eigen::VectorXd FieldVector::divergence(int cell, const Eigen::Vector3d& xref) const {
  const Space& s = *space_;
  if (!s.vector_valued_element()) throw std::logic_error("divergence() is for RT spaces");
  const auto dofs = s.cell_dofs(cell);
  const double det = s.mesh().jacobian(cell).determinant();
  const Eigen::VectorXd div = s.rt_coefficients(cell).transpose() * s.element().raw_divergence(xref) / det;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(s.components());
  for (int c = 0; c < s.components(); ++c)
    for (int i = 0; i < s.dofs_per_cell(); ++i) out[c] += coeffs_[s.index(c, dofs[i])] * div[i];
  return out;
}

std::string FieldVector::to_json() const {
  const Space& s = *space_;
  nlohmann::json j;
  j["schema"] = 1;
  j["family"] = to_string(s.family());
  j["degree"] = s.degree();
  j["components"] = s.components();
  j["dim"] = s.dim();
  j["coefficients"] = std::vector<double>(coeffs_.data(), coeffs_.data() + coeffs_.size());
  auto& cells = j["cell_dofs"] = nlohmann::json::array();
  for (int c = 0; c < s.mesh().num_cells(); ++c) {
    auto row = nlohmann::json::array();
    for (int comp = 0; comp < s.components(); ++comp)
      for (int d : s.cell_dofs(c)) row.push_back(s.index(comp, d));
    cells.push_back(std::move(row));
  }
  return j.dump();
}

FieldVector FieldVector::from_json(const Space& space, const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.at("schema").get<int>() != 1) throw std::runtime_error("unsupported field schema");
  if (j.at("family").get<std::string>() != to_string(space.family()) || j.at("degree").get<int>() != space.degree() ||
      j.at("components").get<int>() != space.components())
    throw std::runtime_error("field does not match the target space");
  const auto values = j.at("coefficients").get<std::vector<double>>();
  return FieldVector(space, Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
}

void FieldVector::write_binary(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::int64_t n = coeffs_.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(coeffs_.data()), static_cast<std::streamsize>(n * sizeof(double)));
}

FieldVector FieldVector::read_binary(const Space& space, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::int64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (n != space.dim()) throw std::runtime_error("binary field length does not match space");
  Eigen::VectorXd v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("truncated binary field " + path.string());
  return FieldVector(space, std::move(v));
}

namespace {

/// Field values at the quadrature points of a tabulated cell: nq x components
/// for scalar families, nq x (3 * components) for RT rows.
Eigen::MatrixXd values_at_points(const FieldVector& field, const CellValues& cv) {
  const Space& s = field.space();
  const auto dofs = s.cell_dofs(cv.cell);
  const int n = s.dofs_per_cell();
  const int nq = static_cast<int>(cv.weights.size());
  const int width = s.vector_valued_element() ? 3 : 1;
  Eigen::MatrixXd out(nq, width * s.components());
  for (int c = 0; c < s.components(); ++c) {
    Eigen::VectorXd local(n);
    for (int i = 0; i < n; ++i) local[i] = field.coefficients()[s.index(c, dofs[i])];
    if (s.vector_valued_element())
      for (int d = 0; d < 3; ++d) out.col(3 * c + d) = cv.vector[d] * local;
    else
      out.col(c) = cv.values * local;
  }
  return out;
}

void require_dg(const Space& target) {
  if (target.family() != SpaceFamily::DiscontinuousLagrange)
    throw std::invalid_argument("L2 projection target must be a discontinuous space");
}

}  // namespace

FieldVector l2_project(const VectorFunction& f, const Space& target, int order) {
  require_dg(target);
  const auto& ref = target.reference(std::max(order, 2 * target.degree()));
  FieldVector out(target);
  const int n = target.dofs_per_cell();
  for (int c = 0; c < target.mesh().num_cells(); ++c) {
    const CellValues cv = target.tabulate(ref, c);
    const Eigen::MatrixXd wphi = cv.weights.asDiagonal() * cv.values;
    const Eigen::LLT<Eigen::MatrixXd> mass(cv.values.transpose() * wphi);
    Eigen::MatrixXd fq(cv.weights.size(), target.components());
    for (int q = 0; q < fq.rows(); ++q) {
      const Eigen::Vector3d v = f(cv.points.row(q).transpose());
      for (int comp = 0; comp < target.components(); ++comp) fq(q, comp) = v[comp];
    }
    const Eigen::MatrixXd local = mass.solve(wphi.transpose() * fq);
    const auto dofs = target.cell_dofs(c);
    for (int comp = 0; comp < target.components(); ++comp)
      for (int i = 0; i < n; ++i) out.coefficients()[target.index(comp, dofs[i])] = local(i, comp);
  }
  return out;
}

FieldVector l2_project(const FieldVector& source, const Space& target) {
  require_dg(target);
  const Space& s = source.space();
  if (&s.mesh() != &target.mesh()) throw std::invalid_argument("projection across different meshes");
  if (s.vector_valued_element()) throw std::invalid_argument("projection of RT fields is not supported");
  if (s.components() != target.components()) throw std::invalid_argument("component count mismatch");
  const int order = s.degree() + target.degree();
  const auto& ref_t = target.reference(std::max(order, 2 * target.degree()));
  const auto& ref_s = s.reference(std::max(order, 2 * target.degree()));
  FieldVector out(target);
  const int n = target.dofs_per_cell();
  for (int c = 0; c < target.mesh().num_cells(); ++c) {
    const CellValues cv = target.tabulate(ref_t, c);
    const Eigen::MatrixXd fq = values_at_points(source, s.tabulate(ref_s, c));
    const Eigen::MatrixXd wphi = cv.weights.asDiagonal() * cv.values;
    const Eigen::MatrixXd local = (cv.values.transpose() * wphi).llt().solve(wphi.transpose() * fq);
    const auto dofs = target.cell_dofs(c);
    for (int comp = 0; comp < target.components(); ++comp)
      for (int i = 0; i < n; ++i) out.coefficients()[target.index(comp, dofs[i])] = local(i, comp);
  }
  return out;
}

Eigen::VectorXd mean_functional(const Space& space) {
  if (space.vector_valued_element()) throw std::invalid_argument("mean functional needs a scalar family");
  const auto& ref = space.reference(std::max(1, space.degree()));
  Eigen::VectorXd m = Eigen::VectorXd::Zero(space.dim());
  for (int c = 0; c < space.mesh().num_cells(); ++c) {
    const CellValues cv = space.tabulate(ref, c);
    const Eigen::VectorXd local = cv.values.transpose() * cv.weights;
    const auto dofs = space.cell_dofs(c);
    for (int i = 0; i < space.dofs_per_cell(); ++i) m[space.index(0, dofs[i])] += local[i];
  }
  return m;
}

FieldVector interpolate(const VectorFunction& f, const Space& space) {
  const Mesh& mesh = space.mesh();
  switch (space.family()) {
    case SpaceFamily::DiscontinuousLagrange:
      return l2_project(f, space, std::min(kMaxQuadratureOrder, 2 * space.degree() + 4));
    case SpaceFamily::Lagrange:
    case SpaceFamily::CrouzeixRaviart: {
      FieldVector out(space);
      for (int c = 0; c < mesh.num_cells(); ++c) {
        const Eigen::Matrix3d jac = mesh.jacobian(c);
        const Point& origin = mesh.vertices()[mesh.tets()[c][0]];
        const auto dofs = space.cell_dofs(c);
        for (int i = 0; i < space.dofs_per_cell(); ++i) {
          const Eigen::Vector3d v = f(origin + jac * space.element().node_point(i));
          for (int comp = 0; comp < space.components(); ++comp) out.coefficients()[space.index(comp, dofs[i])] = v[comp];
        }
      }
      return out;
    }
    case SpaceFamily::RaviartThomas: {
      if (space.components() != 1) throw std::invalid_argument("RT interpolation is per row; use a scalar RT space");
      FieldVector out(space);
      for (int c = 0; c < mesh.num_cells(); ++c) {
        const Eigen::Matrix3d jac = mesh.jacobian(c);
        const Eigen::Matrix3d back = jac.determinant() * jac.inverse();
        const Point& origin = mesh.vertices()[mesh.tets()[c][0]];
        const auto& t = mesh.tets()[c];
        const Eigen::VectorXd dofs_val = space.element().apply_dofs(
            [&](const Eigen::Vector3d& xr) -> Eigen::Vector3d { return back * f(origin + jac * xr); },
            {t[0], t[1], t[2], t[3]});
        const auto dofs = space.cell_dofs(c);
        for (int i = 0; i < space.dofs_per_cell(); ++i) out.coefficients()[dofs[i]] = dofs_val[i];
      }
      return out;
    }
  }
  throw std::logic_error("unreachable");
}

double l2_error(const VectorFunction& f, const FieldVector& field, int order) {
  const Space& s = field.space();
  const auto& ref = s.reference(order);
  const int width = s.vector_valued_element() ? 3 : s.components();
  double sum = 0.0;
  for (int c = 0; c < s.mesh().num_cells(); ++c) {
    const CellValues cv = s.tabulate(ref, c);
    const Eigen::MatrixXd vals = values_at_points(field, cv);
    for (int q = 0; q < vals.rows(); ++q) {
      const Eigen::Vector3d fx = f(cv.points.row(q).transpose());
      double e2 = 0.0;
      for (int d = 0; d < width; ++d) e2 += std::pow(fx[d] - vals(q, d), 2);
      sum += cv.weights[q] * e2;
    }
  }
  return std::sqrt(sum);
}

}  // namespace hcstokes
