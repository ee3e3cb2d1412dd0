#include "hcstokes/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#ifdef HCSTOKES_HAVE_CHOLMOD
#include <Eigen/CholmodSupport>
#endif

namespace hcstokes {

struct SpdFactor::Impl {
#ifdef HCSTOKES_HAVE_CHOLMOD
  Eigen::CholmodSimplicialLLT<SparseMatrix, Eigen::Lower> llt;
#else
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower> llt;
#endif
};

SpdFactor::SpdFactor() : impl_(std::make_unique<Impl>()) {}
SpdFactor::SpdFactor(const SparseMatrix& a) : SpdFactor() { compute(a); }
SpdFactor::~SpdFactor() = default;
SpdFactor::SpdFactor(SpdFactor&&) noexcept = default;
SpdFactor& SpdFactor::operator=(SpdFactor&&) noexcept = default;

void SpdFactor::compute(const SparseMatrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("factorization needs a square matrix");
  n_ = a.rows();
  if (n_ == 0) return;
  impl_->llt.compute(a);
  if (impl_->llt.info() != Eigen::Success) throw std::runtime_error("Cholesky factorization failed (matrix not SPD)");
}

Eigen::VectorXd SpdFactor::solve(const Eigen::VectorXd& b) const {
  if (n_ == 0) return b;
  return impl_->llt.solve(b);
}

const char* SpdFactor::backend() {
#ifdef HCSTOKES_HAVE_CHOLMOD
  return "cholmod-simplicial";
#else
  return "eigen-simplicial";
#endif
}

namespace {

double trace(const SparseMatrix& a) {
  double t = 0.0;
  for (Eigen::Index i = 0; i < std::min(a.rows(), a.cols()); ++i) t += a.coeff(i, i);
  return t;
}

SparseMatrix identity(Eigen::Index n) {
  SparseMatrix i(n, n);
  i.setIdentity();
  return i;
}

std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

}  // namespace

SaddleSolver::SaddleSolver(SparseMatrix a, SparseMatrix b, SparseMatrix w_inv, SolverOptions options)
    : a_(std::move(a)), b_(std::move(b)), w_inv_(std::move(w_inv)), options_(options) {
  if (a_.rows() != a_.cols()) throw std::invalid_argument("A must be square");
  if (b_.rows() > 0 && b_.cols() != a_.cols()) throw std::invalid_argument("B has the wrong number of columns");
  if (b_.cols() == 0 && b_.rows() == 0) b_.resize(0, a_.cols());
  if (w_inv_.size() == 0) w_inv_ = identity(b_.rows());
  if (w_inv_.rows() != b_.rows() || w_inv_.cols() != b_.rows()) throw std::invalid_argument("W^-1 has the wrong size");
  if (!(options_.tol > 0.0 && options_.tol < 1.0)) throw std::invalid_argument("solver tolerance must lie in (0, 1)");
  bt_ = b_.transpose();

  const SparseMatrix grad_div = bt_ * w_inv_ * b_;
  const double ta = trace(a_);
  const double tb = trace(grad_div);
  const double scale = (ta > 0.0 && tb > 0.0) ? ta / tb : 1.0;
  r_ = (options_.penalty > 0.0 ? options_.penalty : 1e2) * scale;
  if (b_.rows() == 0) r_ = 0.0;
  SparseMatrix k = a_ + r_ * grad_div;
  k.prune(0.0);
  factor_.compute(k);
}

double SaddleSolver::residual(const Eigen::VectorXd& f, const Eigen::VectorXd& g, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& y, Eigen::VectorXd* rf, Eigen::VectorXd* rg) const {
  Eigen::VectorXd r1 = f - a_ * x - bt_ * y;
  Eigen::VectorXd r2 = g - b_ * x;
  const double bnorm = std::sqrt(f.squaredNorm() + g.squaredNorm());
  const double rnorm = std::sqrt(r1.squaredNorm() + r2.squaredNorm());
  if (rf) *rf = std::move(r1);
  if (rg) *rg = std::move(r2);
  return bnorm > 0.0 ? rnorm / bnorm : rnorm;
}

SaddleSolution SaddleSolver::solve(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
  if (f.size() != a_.rows() || g.size() != b_.rows()) throw std::invalid_argument("right-hand side has the wrong size");
  if (f.squaredNorm() + g.squaredNorm() == 0.0)
    return {Eigen::VectorXd::Zero(a_.rows()), Eigen::VectorXd::Zero(b_.rows()), 0, 0.0};
  return options_.method == SaddleMethod::Minres ? solve_minres(f, g) : solve_uzawa(f, g);
}

SaddleSolution SaddleSolver::solve_uzawa(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
  SaddleSolution s{Eigen::VectorXd::Zero(a_.rows()), Eigen::VectorXd::Zero(b_.rows()), 0, 0.0};
  Eigen::VectorXd rf, rg;
  s.residual = residual(f, g, s.x, s.y, &rf, &rg);
  double best = s.residual;
  int stalled = 0;
  while (s.residual > options_.tol) {
    if (s.iterations >= options_.max_iter || stalled >= 8) {
      // A consistent system drives the constraint residual to zero; a
      // persistent constraint residual means g has a component outside range(B).
      const double bnorm = std::sqrt(f.squaredNorm() + g.squaredNorm());
      if (rg.norm() > 0.5 * s.residual * bnorm && stalled >= 8)
        throw InconsistentSystem("saddle system is singular and inconsistent (constraint residual " +
                                 sci(rg.norm() / bnorm) + ")");
      throw NonConvergence("saddle solve stopped at relative residual " + sci(s.residual) + " after " +
                           std::to_string(s.iterations) + " iterations");
    }
    s.x += factor_.solve(rf + r_ * (bt_ * (w_inv_ * rg)));
    if (b_.rows() > 0) s.y -= r_ * (w_inv_ * (g - b_ * s.x));
    ++s.iterations;
    s.residual = residual(f, g, s.x, s.y, &rf, &rg);
    if (s.residual < 0.9 * best) {
      best = s.residual;
      stalled = 0;
    } else {
      ++stalled;
    }
  }
  return s;
}

SaddleSolution SaddleSolver::solve_minres(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
  // MINRES on the augmented system [[A + r B^T W^-1 B, B^T], [B, 0]], which has
  // the same solution, preconditioned by diag(A + r B^T W^-1 B, W / r).
  const Eigen::Index n = a_.rows();
  const Eigen::Index m = b_.rows();
  const Eigen::VectorXd f_aug = f + r_ * (bt_ * (w_inv_ * g));
  Eigen::VectorXd rhs(n + m);
  rhs << f_aug, g;

  auto apply = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(n + m);
    const Eigen::VectorXd vx = v.head(n);
    const Eigen::VectorXd vy = v.tail(m);
    out.head(n) = a_ * vx + r_ * (bt_ * (w_inv_ * (b_ * vx))) + bt_ * vy;
    out.tail(m) = b_ * vx;
    return out;
  };
  auto precond = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(n + m);
    out.head(n) = factor_.solve(v.head(n));
    if (m > 0) out.tail(m) = r_ > 0.0 ? Eigen::VectorXd(r_ * (w_inv_ * v.tail(m))) : Eigen::VectorXd(v.tail(m));
    return out;
  };

  SaddleSolution s{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(m), 0, 1.0};
  Eigen::VectorXd z_all = Eigen::VectorXd::Zero(n + m);
  for (int restart = 0; restart < 4 && s.residual > options_.tol; ++restart) {
    Eigen::VectorXd v = rhs - apply(z_all);
    Eigen::VectorXd v_old = Eigen::VectorXd::Zero(n + m);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n + m), w_old = w;
    Eigen::VectorXd z = precond(v);
    double gamma = std::sqrt(std::max(0.0, z.dot(v)));
    double gamma_old = 1.0;
    double eta = gamma;
    const double eta0 = gamma;
    double s_old = 0.0, s_cur = 0.0, c_old = 1.0, c_cur = 1.0;
    while (s.iterations < options_.max_iter && std::abs(eta) > 0.1 * options_.tol * eta0 && gamma > 0.0) {
      z /= gamma;
      const Eigen::VectorXd q = apply(z);
      const double delta = q.dot(z);
      Eigen::VectorXd v_new = q - (delta / gamma) * v - (gamma / gamma_old) * v_old;
      Eigen::VectorXd z_new = precond(v_new);
      const double gamma_new = std::sqrt(std::max(0.0, z_new.dot(v_new)));
      const double a0 = c_cur * delta - c_old * s_cur * gamma;
      const double a1 = std::sqrt(a0 * a0 + gamma_new * gamma_new);
      const double a2 = s_cur * delta + c_old * c_cur * gamma;
      const double a3 = s_old * gamma;
      const double c_new = a0 / a1;
      const double s_new = gamma_new / a1;
      Eigen::VectorXd w_new = (z - a3 * w_old - a2 * w) / a1;
      z_all += c_new * eta * w_new;
      eta = -s_new * eta;
      w_old = std::move(w);
      w = std::move(w_new);
      v_old = std::move(v);
      v = std::move(v_new);
      z = std::move(z_new);
      gamma_old = gamma;
      gamma = gamma_new;
      s_old = s_cur;
      s_cur = s_new;
      c_old = c_cur;
      c_cur = c_new;
      ++s.iterations;
    }
    s.x = z_all.head(n);
    s.y = z_all.tail(m);
    s.residual = residual(f, g, s.x, s.y);
    if (s.iterations >= options_.max_iter) break;
  }
  if (s.residual > options_.tol)
    throw NonConvergence("MINRES stopped at relative residual " + sci(s.residual));
  return s;
}

SaddleSolution solve_saddle(const SaddleSystem& system, const SolverOptions& options) {
  const SaddleSolver solver(system.a, system.b, system.w_inv, options);
  const Eigen::VectorXd g = system.g.size() ? system.g : Eigen::VectorXd::Zero(solver.dual_dim());
  return solver.solve(system.f, g);
}

namespace {

/// Lanczos for the largest eigenvalues of an M-self-adjoint operator, started
/// from `start`. Full reorthogonalisation (twice) in the M inner product.
EigenResult lanczos_run(const LinearOperator& op, const SparseMatrix& m, const Eigen::VectorXd& start, int count,
                            double tol, int max_iter) {
  const Eigen::Index n = m.rows();
  if (count < 1) throw std::invalid_argument("eigenvalue count must be positive");
  if (count > n) throw std::invalid_argument("requested more eigenvalues than the space dimension");
  if (!(tol > 0.0 && tol < 1.0)) throw std::invalid_argument("eigen tolerance must lie in (0, 1)");
  const int steps = static_cast<int>(std::min<Eigen::Index>(max_iter, n));

  auto mnorm = [&](const Eigen::VectorXd& v) { return std::sqrt(std::max(0.0, v.dot(m * v))); };

  EigenResult out;
  Eigen::MatrixXd basis(n, steps + 1);
  Eigen::MatrixXd mbasis(n, steps + 1);
  std::vector<double> alpha, beta;
  double nrm = mnorm(start);
  if (nrm == 0.0) throw std::invalid_argument("Lanczos start vector is zero in the M norm");
  basis.col(0) = start / nrm;
  mbasis.col(0) = m * basis.col(0);

  Eigen::VectorXd ritz;
  Eigen::MatrixXd ritz_vectors;
  int converged_steps = 0;
  bool invariant = false;
  for (int j = 0; j < steps; ++j) {
    Eigen::VectorXd w = op(basis.col(j));
    ++out.iterations;
    alpha.push_back(mbasis.col(j).dot(w));
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXd coeff = mbasis.leftCols(j + 1).transpose() * w;
      w -= basis.leftCols(j + 1) * coeff;
    }
    const double b = mnorm(w);

    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(j + 1, j + 1);
    for (int i = 0; i <= j; ++i) {
      t(i, i) = alpha[i];
      if (i < j) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(t);
    ritz = eig.eigenvalues();
    ritz_vectors = eig.eigenvectors();
    out.ritz_history.push_back(ritz[j]);

    const double scale = std::max(std::abs(ritz[j]), std::abs(ritz[0]));
    invariant = b <= 1e-13 * std::max(scale, 1e-300);
    if (j + 1 >= count) {
      bool done = true;
      for (int i = 0; i < count; ++i) {
        const int idx = j - i;
        if (std::abs(b * ritz_vectors(j, idx)) > 0.1 * tol * std::abs(ritz[idx])) done = false;
      }
      if (done || invariant) {
        converged_steps = j + 1;
        break;
      }
    }
    if (invariant) {
      converged_steps = j + 1;
      break;
    }
    beta.push_back(b);
    basis.col(j + 1) = w / b;
    mbasis.col(j + 1) = m * basis.col(j + 1);
  }
  if (converged_steps == 0)
    throw NonConvergence("Lanczos did not converge in " + std::to_string(steps) + " operator applications");
  const int k = converged_steps;
  if (count > k) throw std::invalid_argument("requested more eigenvalues than the invariant subspace holds");

  out.vectors.resize(n, count);
  for (int i = 0; i < count; ++i) {
    const int idx = k - 1 - i;
    Eigen::VectorXd x = basis.leftCols(k) * ritz_vectors.col(idx);
    x /= mnorm(x);
    const double theta = ritz[idx];
    const Eigen::VectorXd r = op(x) - theta * x;
    ++out.iterations;
    const double res = mnorm(r) / std::max(std::abs(theta), 1e-300);
    if (res > tol)
      throw NonConvergence("eigenpair residual " + sci(res) + " exceeds tolerance " + sci(tol));
    out.values.push_back(theta);
    out.residuals.push_back(res);
    out.vectors.col(i) = x;
  }
  // Ascending order.
  std::reverse(out.values.begin(), out.values.end());
  std::reverse(out.residuals.begin(), out.residuals.end());
  out.vectors = out.vectors.rowwise().reverse().eval();
  return out;
}

Eigen::VectorXd start_vector(Eigen::Index n, unsigned seed);

/// A single Krylov space holds one vector per distinct eigenvalue. For more
/// than one eigenvalue, rerun on the M-orthogonal complement of the pairs found
/// so far until no larger value turns up, which recovers multiplicities.
EigenResult lanczos_largest(const LinearOperator& op, const SparseMatrix& m, const Eigen::VectorXd& start, int count,
                            double tol, int max_iter) {
  EigenResult best = lanczos_run(op, m, start, count, tol, max_iter);
  if (count == 1) return best;
  for (int round = 0; round < count; ++round) {
    // M-orthonormal basis of the accepted vectors.
    Eigen::MatrixXd x = best.vectors;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index i = 0; i < j; ++i) x.col(j) -= x.col(i) * x.col(i).dot(m * x.col(j));
      x.col(j) /= std::sqrt(x.col(j).dot(m * x.col(j)));
    }
    const Eigen::MatrixXd mx = m * x;
    auto project = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return v - x * (mx.transpose() * v); };
    const LinearOperator deflated = [&](const Eigen::VectorXd& v) { return project(op(project(v))); };

    EigenResult extra;
    try {
      // The original start has no component along unfound copies of a
      // repeated eigenvalue, so draw a fresh one and map it through the operator.
      extra = lanczos_run(deflated, m, deflated(start_vector(m.rows(), 20131 + round + 1)), 1, tol, max_iter);
      ++best.iterations;
    } catch (const std::invalid_argument&) {
      break;  // the complement is empty
    }
    best.iterations += extra.iterations;
    const double floor = best.values.front();
    if (!(extra.values.back() > floor + tol * std::abs(floor))) break;

    // Replace the smallest accepted pair and restore ascending order.
    best.values.front() = extra.values.back();
    best.residuals.front() = extra.residuals.back();
    best.vectors.col(0) = extra.vectors.col(extra.vectors.cols() - 1);
    std::vector<int> order(count);
    for (int i = 0; i < count; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return best.values[a] < best.values[b]; });
    EigenResult sorted = best;
    for (int i = 0; i < count; ++i) {
      sorted.values[i] = best.values[order[i]];
      sorted.residuals[i] = best.residuals[order[i]];
      sorted.vectors.col(i) = best.vectors.col(order[i]);
    }
    best = std::move(sorted);
  }
  return best;
}

Eigen::VectorXd start_vector(Eigen::Index n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

}  // namespace

EigenResult eig_largest(const LinearOperator& op, const SparseMatrix& m, double tol, int max_iter, int count) {
  return lanczos_largest(op, m, start_vector(m.rows(), 20131), count, tol, max_iter);
}

EigenResult eig_smallest_constrained(const SaddleSolver& solver, const SparseMatrix& m, int count, double tol,
                                     int max_iter) {
  LinearOperator inverse = [&](const Eigen::VectorXd& v) { return solver.solve(m * v).x; };
  // Starting from S M r puts the Krylov space inside ker C.
  const Eigen::VectorXd start = inverse(start_vector(m.rows(), 20131));
  EigenResult r = lanczos_largest(inverse, m, start, count, tol, max_iter);
  ++r.iterations;
  for (double& v : r.values) v = 1.0 / v;
  // Inverting reverses the order; the residual of (1/theta, x) for A - lambda M
  // measured through the inverse is the same relative quantity.
  std::reverse(r.values.begin(), r.values.end());
  std::reverse(r.residuals.begin(), r.residuals.end());
  r.vectors = r.vectors.rowwise().reverse().eval();
  return r;
}

EigenResult eig_smallest_constrained(const SparseMatrix& a, const SparseMatrix& m, const SparseMatrix& c, int count,
                                     double tol, int max_iter, const SparseMatrix& w_inv,
                                     const SolverOptions& options) {
  SolverOptions inner = options;
  inner.tol = std::min(options.tol, 1e-3 * tol);
  const SaddleSolver solver(a, c, w_inv, inner);
  return eig_smallest_constrained(solver, m, count, tol, max_iter);
}

}  // namespace hcstokes
