#pragma once

#include "ccbm/mesh.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <complex>
#include <iosfwd>
#include <memory>
#include <stdexcept>

namespace ccbm {

using Complex = std::complex<double>;
/// Complex P1 coefficients, one per mesh node.
using ComplexNodalField = Eigen::VectorXcd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using ComplexSparseMatrix = Eigen::SparseMatrix<Complex>;

/// Solver failure, singular factorization or residual above tolerance.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Real P1 building blocks on one mesh.
struct FemOperators {
  SparseMatrix K;        // volume stiffness
  SparseMatrix M;        // volume mass
  SparseMatrix M_sigma;  // edge mass on sigma
  SparseMatrix M_gamma;  // edge mass on gamma
};

SparseMatrix assemble_stiffness(const TriMesh& m);
SparseMatrix assemble_mass(const TriMesh& m);
SparseMatrix assemble_boundary_mass(const TriMesh& m, BoundaryLabel label);
/// Arc-length stiffness of the P1 trace on the labeled edges.
SparseMatrix assemble_boundary_stiffness(const TriMesh& m, BoundaryLabel label);

/// Throws if either boundary has no edges.
FemOperators assemble_operators(const TriMesh& m);

/// K + s*i*rho*M_sigma + alpha*M_gamma with s = +1 (state) or -1 (adjoints).
ComplexSparseMatrix assemble_forms(const FemOperators& ops, double alpha, double rho, int sigma_coupling_sign);
ComplexSparseMatrix assemble_forms(const TriMesh& m, double alpha, double rho, int sigma_coupling_sign);

/// M_sigma*(g + i*rho*f) + M*source. g and f are nodal vectors (only sigma
/// entries matter); null pointers stand for zero.
ComplexNodalField assemble_load(const FemOperators& ops, const ComplexNodalField* volume_source,
                                const Eigen::VectorXd* g, const Eigen::VectorXd* f, double rho);

/// Sparse LU factorization reused for several right-hand sides.
class ComplexSolver {
public:
  explicit ComplexSolver(const ComplexSparseMatrix& A, double residual_tolerance = 1e-10);
  ComplexNodalField solve(const ComplexNodalField& b) const;
  const ComplexSparseMatrix& matrix() const { return A_; }

private:
  ComplexSparseMatrix A_;
  double tol_;
  std::unique_ptr<Eigen::SparseLU<ComplexSparseMatrix, Eigen::COLAMDOrdering<int>>> lu_;
};

ComplexNodalField solve(const ComplexSparseMatrix& A, const ComplexNodalField& b);

/// Solves the SPD system A x = b with x fixed to `values` where `fixed` is
/// true. Rows of b for fixed nodes are ignored.
Eigen::VectorXd solve_spd_with_dirichlet(const SparseMatrix& A, const Eigen::VectorXd& b, const std::vector<bool>& fixed,
                                         const Eigen::VectorXd& values);

/// Neumann trace t on sigma from M_sigma t = (A u - load) restricted to sigma
/// rows. A is the operator without the sigma Neumann term. Entries off sigma
/// are zero.
Eigen::VectorXd consistent_flux_on_sigma(const TriMesh& m, const SparseMatrix& A, const Eigen::VectorXd& u,
                                         const Eigen::VectorXd& load);

/// Arc-length derivative of a nodal field at the gamma nodes, in the order
/// of boundary_loop(m, gamma).
Eigen::VectorXcd tangential_gradient_on_gamma(const TriMesh& m, const ComplexNodalField& field);
/// Same for a loop given explicitly.
Eigen::VectorXcd tangential_gradient(const TriMesh& m, const std::vector<int>& loop, const ComplexNodalField& field);

/// Coordinate dump "i j re im", one nonzero per line.
void write_coordinate(std::ostream& os, const ComplexSparseMatrix& A);

}  // namespace ccbm
