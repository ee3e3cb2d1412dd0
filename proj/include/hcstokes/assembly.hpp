#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "hcstokes/spaces.hpp"

namespace hcstokes {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Serial runs the element loop in cell order on the calling thread and is the
/// reference the OpenMP path is tested against. Both scatter in cell order, so
/// the results are bit-identical.
enum class Execution { Serial, Parallel };

/// Local matrix of one cell given the tabulated row and column spaces. The
/// local layout is component-major: local index (c, i) = c * n + i.
using CellKernel = std::function<Eigen::MatrixXd(const CellValues& row, const CellValues& col)>;

/// Generic element loop: rows indexed by `row_space`, columns by `col_space`.
SparseMatrix assemble(const Space& row_space, const Space& col_space, int order, const CellKernel& kernel,
                      Execution exec = Execution::Parallel);

/// (grad u, grad v) for every component; CR spaces give the broken form.
SparseMatrix assemble_stiffness(const Space& v, Execution exec = Execution::Parallel);
/// (u, v); for tensor RT spaces the row-wise sum (p, q).
SparseMatrix assemble_mass(const Space& space, Execution exec = Execution::Parallel);
/// (u, chi) with rows in `rows` and columns in `cols`; equal component counts.
SparseMatrix assemble_mixed_mass(const Space& rows, const Space& cols, Execution exec = Execution::Parallel);
/// B[q, v] = (div v, chi_q) for vector v and scalar q.
SparseMatrix assemble_div_pressure(const Space& v, const Space& q, Execution exec = Execution::Parallel);
/// D[x, p] = (Div p, chi_x): row c of the tensor p against component c of x.
SparseMatrix assemble_div_rt(const Space& rt, const Space& x, Execution exec = Execution::Parallel);
/// G[x, psi] = (grad psi, chi_x) for a scalar psi and a vector x.
SparseMatrix assemble_grad_coupling(const Space& u, const Space& x, Execution exec = Execution::Parallel);
/// (f, v) for every component of v.
Eigen::VectorXd assemble_load(const VectorFunction& f, const Space& v, int order,
                              Execution exec = Execution::Parallel);

/// Inverse of the block-diagonal mass matrix of a discontinuous space,
/// inverted cell by cell.
SparseMatrix inverse_block_mass(const Space& dg, Execution exec = Execution::Parallel);

/// n x free selection matrix (column j is the unit vector of free dof j).
SparseMatrix selection_matrix(const Space& space);

/// MatrixMarket coordinate format, general real.
void write_matrix_market(const SparseMatrix& a, std::ostream& out);

/// Largest |A_ij - A_ji|.
double symmetry_defect(const SparseMatrix& a);

}  // namespace hcstokes
