#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace hcstokes {

using SparseMatrix = Eigen::SparseMatrix<double>;

class NonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InconsistentSystem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cholesky factorization of a sparse SPD matrix (CHOLMOD when available).
class SpdFactor {
 public:
  SpdFactor();
  explicit SpdFactor(const SparseMatrix& a);
  ~SpdFactor();
  SpdFactor(SpdFactor&&) noexcept;
  SpdFactor& operator=(SpdFactor&&) noexcept;

  void compute(const SparseMatrix& a);
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::Index rows() const { return n_; }
  static const char* backend();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Eigen::Index n_ = 0;
};

enum class SaddleMethod { AugmentedLagrangian, Minres };

struct SolverOptions {
  double tol = 1e-10;  ///< relative residual of the full system
  int max_iter = 500;
  /// Augmentation parameter relative to trace(A) / trace(B^T W^-1 B); zero picks the default.
  double penalty = 0.0;
  SaddleMethod method = SaddleMethod::AugmentedLagrangian;
};

/// [[A, B^T], [B, 0]] with A symmetric positive semidefinite and positive
/// definite on ker B. `w_inv` is the inverse of an SPD metric on the
/// multiplier space (a block-diagonal mass inverse in practice); identity when
/// left empty.
struct SaddleSystem {
  SparseMatrix a;
  SparseMatrix b;
  SparseMatrix w_inv;
  Eigen::VectorXd f;
  Eigen::VectorXd g;
};

struct SaddleSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  int iterations = 0;
  double residual = 0.0;  ///< relative residual of the full system
};

/// Reusable solver: the augmented block A + r B^T W^-1 B is factored once.
///
/// The iteration is augmented-Lagrangian Uzawa in residual form (or MINRES
/// preconditioned by the augmented block). Singular systems are accepted when
/// consistent; the multiplier is then determined up to ker B^T.
class SaddleSolver {
 public:
  SaddleSolver(SparseMatrix a, SparseMatrix b, SparseMatrix w_inv, SolverOptions options = {});

  SaddleSolution solve(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const;
  SaddleSolution solve(const Eigen::VectorXd& f) const { return solve(f, Eigen::VectorXd::Zero(b_.rows())); }

  Eigen::Index primal_dim() const { return a_.rows(); }
  Eigen::Index dual_dim() const { return b_.rows(); }
  double penalty() const { return r_; }
  const SolverOptions& options() const { return options_; }

 private:
  SaddleSolution solve_uzawa(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const;
  SaddleSolution solve_minres(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const;
  double residual(const Eigen::VectorXd& f, const Eigen::VectorXd& g, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& y, Eigen::VectorXd* rf = nullptr, Eigen::VectorXd* rg = nullptr) const;

  SparseMatrix a_, b_, bt_, w_inv_;
  SolverOptions options_;
  double r_ = 1.0;
  SpdFactor factor_;
};

SaddleSolution solve_saddle(const SaddleSystem& system, const SolverOptions& options = {});

struct EigenResult {
  std::vector<double> values;           ///< ascending
  Eigen::MatrixXd vectors;              ///< columns, M-normalised
  std::vector<double> residuals;        ///< relative residual of each pair, verified post hoc
  int iterations = 0;                   ///< operator applications
  std::vector<double> ritz_history;     ///< extreme Ritz value after each step of the first Krylov run
};

using LinearOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Largest eigenvalues of an operator that is self-adjoint in the M inner
/// product (for a pencil A x = lambda M x pass x -> M^-1 A x). Lanczos with
/// full reorthogonalisation and deflated restarts for repeated eigenvalues;
/// residual ||Op x - lambda x||_M <= tol |lambda|.
EigenResult eig_largest(const LinearOperator& op, const SparseMatrix& m, double tol = 1e-8, int max_iter = 200,
                        int count = 1);

/// The `count` smallest eigenvalues of A v = lambda M v on {v : C v = 0} by
/// shift-invert Lanczos; each inverse application is one saddle solve.
EigenResult eig_smallest_constrained(const SparseMatrix& a, const SparseMatrix& m, const SparseMatrix& c, int count,
                                     double tol = 1e-8, int max_iter = 200, const SparseMatrix& w_inv = {},
                                     const SolverOptions& options = {});

/// Same, reusing an existing saddle solver for [[A, C^T], [C, 0]].
EigenResult eig_smallest_constrained(const SaddleSolver& solver, const SparseMatrix& m, int count, double tol = 1e-8,
                                     int max_iter = 200);

}  // namespace hcstokes
