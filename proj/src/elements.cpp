#include "hcstokes/elements.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "hcstokes/mesh.hpp"

namespace hcstokes {

std::array<double, 4> QuadratureRule::barycentric(int q) const {
  const auto& p = points[q];
  return {1.0 - p[0] - p[1] - p[2], p[0], p[1], p[2]};
}

void gauss_jacobi(int n, int alpha, std::vector<double>& nodes, std::vector<double>& weights) {
  // Golub-Welsch on [-1, 1] with weight (1 - x)^alpha, then mapped to [0, 1].
  const double a = alpha;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double s = 2.0 * i + a;
    jac(i, i) = (i == 0 && alpha == 0) ? 0.0 : (0.0 - a * a) / (s * (s + 2.0));
    if (i + 1 < n) {
      const double k = i + 1.0;
      const double t = 2.0 * k + a;
      const double b = std::sqrt(4.0 * k * (k + a) * k * (k + a) / (t * t * (t + 1.0) * (t - 1.0)));
      jac(i, i + 1) = jac(i + 1, i) = b;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jac);
  const double mu0 = std::pow(2.0, a + 1.0) / (a + 1.0);  // integral of (1-x)^alpha on [-1,1]
  nodes.resize(n);
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const double v0 = eig.eigenvectors()(0, i);
    nodes[i] = 0.5 * (eig.eigenvalues()[i] + 1.0);
    weights[i] = mu0 * v0 * v0 / std::pow(2.0, a + 1.0);
  }
}

namespace {

QuadratureRule make_tet_rule(int order) {
  const int n = std::max(1, (order + 2) / 2);
  std::vector<double> xa, wa, xb, wb, xc, wc;
  gauss_jacobi(n, 0, xa, wa);
  gauss_jacobi(n, 1, xb, wb);
  gauss_jacobi(n, 2, xc, wc);
  QuadratureRule rule;
  rule.order = order;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double a = xa[i], b = xb[j], c = xc[k];
        rule.points.emplace_back(a * (1.0 - b) * (1.0 - c), b * (1.0 - c), c);
        rule.weights.push_back(wa[i] * wb[j] * wc[k]);
      }
  return rule;
}

TriangleRule make_triangle_rule(int order) {
  const int n = std::max(1, (order + 2) / 2);
  std::vector<double> xa, wa, xb, wb;
  gauss_jacobi(n, 0, xa, wa);
  gauss_jacobi(n, 1, xb, wb);
  TriangleRule rule;
  rule.order = order;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      rule.points.emplace_back(xa[i] * (1.0 - xb[j]), xb[j]);
      rule.weights.push_back(wa[i] * wb[j]);
    }
  return rule;
}

void check_order(int order) {
  if (order < 0 || order > kMaxQuadratureOrder)
    throw std::invalid_argument("unsupported quadrature order " + std::to_string(order));
}

double monomial(const Eigen::Vector3d& x, const std::array<int, 3>& p) {
  return std::pow(x[0], p[0]) * std::pow(x[1], p[1]) * std::pow(x[2], p[2]);
}

const std::array<Eigen::Vector3d, 4> kRefVertex{Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 0),
                                                Eigen::Vector3d(0, 1, 0), Eigen::Vector3d(0, 0, 1)};

const std::array<Eigen::Vector3d, 4> kBaryGrad{Eigen::Vector3d(-1, -1, -1), Eigen::Vector3d(1, 0, 0),
                                               Eigen::Vector3d(0, 1, 0), Eigen::Vector3d(0, 0, 1)};

std::array<double, 4> bary(const Eigen::Vector3d& x) { return {1.0 - x[0] - x[1] - x[2], x[0], x[1], x[2]}; }

/// Face vertices (local numbers) sorted by key.
std::array<int, 3> face_order(int face, const std::array<int, 4>& keys) {
  auto f = kTetFaces[face];
  std::sort(f.begin(), f.end(), [&](int a, int b) { return keys[a] < keys[b]; });
  return f;
}

/// Exponent pairs (i, j) with i + j <= m for face moments.
std::vector<std::array<int, 2>> face_moments(int m) {
  std::vector<std::array<int, 2>> out;
  for (int i = 0; i <= m; ++i)
    for (int j = 0; j + i <= m; ++j) out.push_back({i, j});
  return out;
}

}  // namespace

const QuadratureRule& quadrature(int order) {
  check_order(order);
  static std::mutex lock;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard guard(lock);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, make_tet_rule(order)).first;
  return it->second;
}

const TriangleRule& triangle_quadrature(int order) {
  check_order(order);
  static std::mutex lock;
  static std::map<int, TriangleRule> cache;
  std::lock_guard guard(lock);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, make_triangle_rule(order)).first;
  return it->second;
}

std::vector<std::array<int, 3>> monomial_exponents(int deg, bool homogeneous) {
  std::vector<std::array<int, 3>> out;
  for (int total = homogeneous ? deg : 0; total <= deg; ++total)
    for (int a = total; a >= 0; --a)
      for (int b = total - a; b >= 0; --b) out.push_back({a, b, total - a - b});
  return out;
}

int rank_pattern(const std::array<int, 4>& keys) {
  // Lehmer code of the ranks.
  int code = 0;
  for (int i = 0; i < 4; ++i) {
    int smaller = 0;
    for (int j = i + 1; j < 4; ++j)
      if (keys[j] < keys[i]) ++smaller;
    code = code * (4 - i) + smaller;
  }
  return code;
}

Eigen::Vector3d ReferenceElement::node_point(int i) const {
  if (family_ == ElementFamily::CrouzeixRaviart) {
    Eigen::Vector3d p = Eigen::Vector3d::Zero();
    for (int v : kTetFaces[i]) p += kRefVertex[v] / 3.0;
    return p;
  }
  if (degree_ == 0) return Eigen::Vector3d::Constant(0.25);
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  for (int v = 0; v < 4; ++v) p += kRefVertex[v] * (static_cast<double>(nodes_[i][v]) / degree_);
  return p;
}

Eigen::VectorXd ReferenceElement::values(const Eigen::Vector3d& x) const {
  const auto l = bary(x);
  Eigen::VectorXd out(dim());
  if (family_ == ElementFamily::CrouzeixRaviart) {
    for (int i = 0; i < 4; ++i) out[i] = 1.0 - 3.0 * l[i];
    return out;
  }
  if (family_ != ElementFamily::Lagrange) throw std::logic_error("values() needs a scalar element");
  const int k = degree_;
  for (int n = 0; n < dim(); ++n) {
    double v = 1.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < nodes_[n][i]; ++j) v *= (k * l[i] - j) / (j + 1.0);
    out[n] = v;
  }
  return out;
}

Eigen::MatrixXd ReferenceElement::gradients(const Eigen::Vector3d& x) const {
  const auto l = bary(x);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim(), 3);
  if (family_ == ElementFamily::CrouzeixRaviart) {
    for (int i = 0; i < 4; ++i) out.row(i) = -3.0 * kBaryGrad[i].transpose();
    return out;
  }
  if (family_ != ElementFamily::Lagrange) throw std::logic_error("gradients() needs a scalar element");
  const int k = degree_;
  for (int n = 0; n < dim(); ++n) {
    std::array<double, 4> f{}, df{};
    for (int i = 0; i < 4; ++i) {
      f[i] = 1.0;
      df[i] = 0.0;
      for (int j = 0; j < nodes_[n][i]; ++j) {
        const double factor = (k * l[i] - j) / (j + 1.0);
        df[i] = df[i] * factor + f[i] * k / (j + 1.0);
        f[i] *= factor;
      }
    }
    for (int i = 0; i < 4; ++i) {
      double rest = df[i];
      for (int o = 0; o < 4; ++o)
        if (o != i) rest *= f[o];
      out.row(n) += rest * kBaryGrad[i].transpose();
    }
  }
  return out;
}

Eigen::MatrixXd ReferenceElement::raw_values(const Eigen::Vector3d& x) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(raw_dim(), 3);
  for (int i = 0; i < raw_dim(); ++i) {
    const double mono = monomial(x, raw_[i].power);
    if (raw_[i].component >= 0)
      out(i, raw_[i].component) = mono;
    else
      out.row(i) = mono * x.transpose();
  }
  return out;
}

Eigen::VectorXd ReferenceElement::raw_divergence(const Eigen::Vector3d& x) const {
  Eigen::VectorXd out(raw_dim());
  for (int i = 0; i < raw_dim(); ++i) {
    const auto& p = raw_[i].power;
    const int c = raw_[i].component;
    if (c >= 0) {
      if (p[c] == 0) {
        out[i] = 0.0;
      } else {
        auto q = p;
        --q[c];
        out[i] = p[c] * monomial(x, q);
      }
    } else {
      out[i] = (3.0 + p[0] + p[1] + p[2]) * monomial(x, p);
    }
  }
  return out;
}

Eigen::MatrixXd ReferenceElement::vector_values(const Eigen::Vector3d& x) const {
  if (family_ != ElementFamily::RaviartThomas) throw std::logic_error("vector_values() needs RT");
  return rt_coefficients({0, 1, 2, 3}).transpose() * raw_values(x);
}

Eigen::VectorXd ReferenceElement::divergence(const Eigen::Vector3d& x) const {
  if (family_ != ElementFamily::RaviartThomas) throw std::logic_error("divergence() needs RT");
  return rt_coefficients({0, 1, 2, 3}).transpose() * raw_divergence(x);
}

Eigen::VectorXd ReferenceElement::apply_dofs(
    const std::function<Eigen::Vector3d(const Eigen::Vector3d&)>& field,
    const std::array<int, 4>& vertex_keys) const {
  if (family_ != ElementFamily::RaviartThomas) throw std::logic_error("apply_dofs() needs RT");
  return rt_dofs(field, vertex_keys);
}

Eigen::VectorXd ReferenceElement::rt_dofs(
    const std::function<Eigen::Vector3d(const Eigen::Vector3d&)>& field,
    const std::array<int, 4>& vertex_keys) const {
  const int m = degree_;
  const auto& tri = triangle_quadrature(2 * m + 2);
  const auto& tet = quadrature(2 * m + 2);
  const auto tests = face_moments(m);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim());
  int row = 0;
  for (int f = 0; f < 4; ++f) {
    const auto fv = face_order(f, vertex_keys);
    const Eigen::Vector3d u = kRefVertex[fv[1]] - kRefVertex[fv[0]];
    const Eigen::Vector3d w = kRefVertex[fv[2]] - kRefVertex[fv[0]];
    const Eigen::Vector3d n = u.cross(w);
    for (const auto& t : tests) {
      double s = 0.0;
      for (int q = 0; q < tri.size(); ++q) {
        const auto& mu = tri.points[q];
        const Eigen::Vector3d x = kRefVertex[fv[0]] + mu[0] * u + mu[1] * w;
        s += tri.weights[q] * field(x).dot(n) * std::pow(mu[0], t[0]) * std::pow(mu[1], t[1]);
      }
      out[row++] = s;
    }
  }
  for (int c = 0; c < 3; ++c)
    for (const auto& p : interior_moments_) {
      double s = 0.0;
      for (int q = 0; q < tet.size(); ++q) s += tet.weights[q] * field(tet.points[q])[c] * monomial(tet.points[q], p);
      out[row++] = s;
    }
  return out;
}

Eigen::MatrixXd ReferenceElement::build_rt_coefficients(const std::array<int, 4>& vertex_keys) const {
  Eigen::MatrixXd dual(dim(), raw_dim());
  for (int j = 0; j < raw_dim(); ++j) {
    dual.col(j) = rt_dofs([&](const Eigen::Vector3d& x) -> Eigen::Vector3d { return raw_values(x).row(j).transpose(); },
                          vertex_keys);
  }
  return dual.fullPivLu().inverse();
}

const Eigen::MatrixXd& ReferenceElement::rt_coefficients(const std::array<int, 4>& vertex_keys) const {
  return rt_cache_[rank_pattern(vertex_keys)];
}

std::shared_ptr<const ReferenceElement> lagrange_element(int k) {
  if (k < 0 || k > 4) throw std::invalid_argument("unsupported Lagrange degree " + std::to_string(k));
  static std::mutex lock;
  static std::map<int, std::shared_ptr<const ReferenceElement>> cache;
  std::lock_guard guard(lock);
  if (auto it = cache.find(k); it != cache.end()) return it->second;

  auto e = std::make_shared<ReferenceElement>();
  e->family_ = ElementFamily::Lagrange;
  e->degree_ = k;
  if (k == 0) {
    e->nodes_.push_back({0, 0, 0, 0});
    e->dofs_.push_back({Entity::Interior, 0, 0});
  } else {
    for (int v = 0; v < 4; ++v) {
      MultiIndex a{};
      a[v] = k;
      e->nodes_.push_back(a);
      e->dofs_.push_back({Entity::Vertex, v, 0});
    }
    for (int ed = 0; ed < 6; ++ed)
      for (int t = 1; t < k; ++t) {
        MultiIndex a{};
        a[kTetEdges[ed][0]] = k - t;
        a[kTetEdges[ed][1]] = t;
        e->nodes_.push_back(a);
        e->dofs_.push_back({Entity::Edge, ed, t - 1});
      }
    for (int f = 0; f < 4; ++f) {
      int idx = 0;
      for (int i = 1; i < k; ++i)
        for (int j = 1; i + j < k; ++j) {
          MultiIndex a{};
          a[kTetFaces[f][0]] = k - i - j;
          a[kTetFaces[f][1]] = i;
          a[kTetFaces[f][2]] = j;
          e->nodes_.push_back(a);
          e->dofs_.push_back({Entity::Face, f, idx++});
        }
    }
    int idx = 0;
    for (int i = 1; i < k; ++i)
      for (int j = 1; i + j < k; ++j)
        for (int l = 1; i + j + l < k; ++l) {
          e->nodes_.push_back({k - i - j - l, i, j, l});
          e->dofs_.push_back({Entity::Interior, 0, idx++});
        }
  }
  cache.emplace(k, e);
  return e;
}

std::shared_ptr<const ReferenceElement> rt_element(int m) {
  if (m < 0 || m > 2) throw std::invalid_argument("unsupported Raviart-Thomas degree " + std::to_string(m));
  static std::mutex lock;
  static std::map<int, std::shared_ptr<const ReferenceElement>> cache;
  std::lock_guard guard(lock);
  if (auto it = cache.find(m); it != cache.end()) return it->second;

  auto e = std::make_shared<ReferenceElement>();
  e->family_ = ElementFamily::RaviartThomas;
  e->degree_ = m;
  for (int c = 0; c < 3; ++c)
    for (const auto& p : monomial_exponents(m)) e->raw_.push_back({c, p});
  for (const auto& p : monomial_exponents(m, true)) e->raw_.push_back({-1, p});

  const int per_face = static_cast<int>(face_moments(m).size());
  for (int f = 0; f < 4; ++f)
    for (int i = 0; i < per_face; ++i) e->dofs_.push_back({Entity::Face, f, i});
  if (m > 0) e->interior_moments_ = monomial_exponents(m - 1);
  for (int i = 0; i < 3 * static_cast<int>(e->interior_moments_.size()); ++i)
    e->dofs_.push_back({Entity::Interior, 0, i});

  if (e->dim() != e->raw_dim()) throw std::logic_error("RT dof count mismatch");

  // All 24 vertex orderings.
  std::array<int, 4> perm{0, 1, 2, 3};
  do {
    e->rt_cache_[rank_pattern(perm)] = e->build_rt_coefficients(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));

  cache.emplace(m, e);
  return e;
}

std::shared_ptr<const ReferenceElement> cr_element() {
  static const std::shared_ptr<const ReferenceElement> element = [] {
    auto e = std::make_shared<ReferenceElement>();
    e->family_ = ElementFamily::CrouzeixRaviart;
    e->degree_ = 1;
    for (int f = 0; f < 4; ++f) e->dofs_.push_back({Entity::Face, f, 0});
    return e;
  }();
  return element;
}

}  // namespace hcstokes
