#include "ccbm/fem.hpp"

#include <Eigen/SparseCholesky>
#include <fmt/format.h>

#include <ostream>

namespace ccbm {

namespace {

using Triplet = Eigen::Triplet<double>;

SparseMatrix from_triplets(int n, const std::vector<Triplet>& t) {
  SparseMatrix A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

}  // namespace

SparseMatrix assemble_stiffness(const TriMesh& m) {
  std::vector<Triplet> t;
  t.reserve(9 * m.triangles.size());
  for (const auto& tri : m.triangles) {
    const Vec2& a = m.nodes[tri[0]];
    const Vec2& b = m.nodes[tri[1]];
    const Vec2& c = m.nodes[tri[2]];
    const double area = triangle_signed_area(a, b, c);
    // Rotated edge vectors are area-scaled basis gradients.
    const std::array<Vec2, 3> e{c - b, a - c, b - a};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) t.emplace_back(tri[i], tri[j], e[i].dot(e[j]) / (4.0 * area));
  }
  return from_triplets(m.num_nodes(), t);
}

SparseMatrix assemble_mass(const TriMesh& m) {
  std::vector<Triplet> t;
  t.reserve(9 * m.triangles.size());
  for (const auto& tri : m.triangles) {
    const double area = triangle_signed_area(m.nodes[tri[0]], m.nodes[tri[1]], m.nodes[tri[2]]);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) t.emplace_back(tri[i], tri[j], area / 12.0 * (i == j ? 2.0 : 1.0));
  }
  return from_triplets(m.num_nodes(), t);
}

SparseMatrix assemble_boundary_mass(const TriMesh& m, BoundaryLabel label) {
  std::vector<Triplet> t;
  for (const auto& e : m.boundary_edges) {
    if (e.label != label) continue;
    const double L = (m.nodes[e.nodes[0]] - m.nodes[e.nodes[1]]).norm();
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) t.emplace_back(e.nodes[i], e.nodes[j], L / 6.0 * (i == j ? 2.0 : 1.0));
  }
  return from_triplets(m.num_nodes(), t);
}

SparseMatrix assemble_boundary_stiffness(const TriMesh& m, BoundaryLabel label) {
  std::vector<Triplet> t;
  for (const auto& e : m.boundary_edges) {
    if (e.label != label) continue;
    const double L = (m.nodes[e.nodes[0]] - m.nodes[e.nodes[1]]).norm();
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) t.emplace_back(e.nodes[i], e.nodes[j], (i == j ? 1.0 : -1.0) / L);
  }
  return from_triplets(m.num_nodes(), t);
}

FemOperators assemble_operators(const TriMesh& m) {
  bool has_sigma = false, has_gamma = false;
  for (const auto& e : m.boundary_edges) {
    has_sigma = has_sigma || e.label == BoundaryLabel::sigma;
    has_gamma = has_gamma || e.label == BoundaryLabel::gamma;
  }
  if (!has_sigma || !has_gamma) throw NumericalError("assembly needs both sigma and gamma edges");
  return {assemble_stiffness(m), assemble_mass(m), assemble_boundary_mass(m, BoundaryLabel::sigma),
          assemble_boundary_mass(m, BoundaryLabel::gamma)};
}

ComplexSparseMatrix assemble_forms(const FemOperators& ops, double alpha, double rho, int sign) {
  if (sign != 1 && sign != -1) throw std::invalid_argument("sigma coupling sign must be +1 or -1");
  ComplexSparseMatrix A = ops.K.cast<Complex>();
  A += (Complex(0.0, sign * rho) * ops.M_sigma.cast<Complex>());
  A += (Complex(alpha, 0.0) * ops.M_gamma.cast<Complex>());
  A.makeCompressed();
  return A;
}

ComplexSparseMatrix assemble_forms(const TriMesh& m, double alpha, double rho, int sign) {
  return assemble_forms(assemble_operators(m), alpha, rho, sign);
}

ComplexNodalField assemble_load(const FemOperators& ops, const ComplexNodalField* source, const Eigen::VectorXd* g,
                                const Eigen::VectorXd* f, double rho) {
  const Eigen::Index n = ops.K.rows();
  ComplexNodalField b = ComplexNodalField::Zero(n);
  if (g) b.real() += ops.M_sigma * *g;
  if (f) b.imag() += rho * (ops.M_sigma * *f);
  if (source) {
    b.real() += ops.M * source->real();
    b.imag() += ops.M * source->imag();
  }
  return b;
}

ComplexSolver::ComplexSolver(const ComplexSparseMatrix& A, double tol)
    : A_(A), tol_(tol), lu_(std::make_unique<Eigen::SparseLU<ComplexSparseMatrix, Eigen::COLAMDOrdering<int>>>()) {
  A_.makeCompressed();
  lu_->compute(A_);
  if (lu_->info() != Eigen::Success)
    throw NumericalError("sparse LU factorization failed: " + lu_->lastErrorMessage());
}

ComplexNodalField ComplexSolver::solve(const ComplexNodalField& b) const {
  const double bn = b.norm();
  if (bn == 0.0) return ComplexNodalField::Zero(b.size());
  ComplexNodalField x = lu_->solve(b);
  if (lu_->info() != Eigen::Success) throw NumericalError("sparse LU solve failed");
  double res = (A_ * x - b).norm() / bn;
  if (!(res <= tol_)) {
    // One step of iterative refinement before giving up.
    x += lu_->solve(b - A_ * x);
    res = (A_ * x - b).norm() / bn;
  }
  if (!(res <= tol_)) throw NumericalError(fmt::format("complex solve residual {} exceeds {}", res, tol_));
  return x;
}

ComplexNodalField solve(const ComplexSparseMatrix& A, const ComplexNodalField& b) { return ComplexSolver(A).solve(b); }

Eigen::VectorXd solve_spd_with_dirichlet(const SparseMatrix& A, const Eigen::VectorXd& b, const std::vector<bool>& fixed,
                                         const Eigen::VectorXd& values) {
  const int n = static_cast<int>(A.rows());
  std::vector<int> free_index(n, -1);
  int nf = 0;
  for (int i = 0; i < n; ++i)
    if (!fixed[i]) free_index[i] = nf++;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i)
    if (fixed[i]) x[i] = values[i];
  if (nf == 0) return x;

  std::vector<Triplet> t;
  Eigen::VectorXd rhs(nf);
  for (int i = 0; i < n; ++i)
    if (!fixed[i]) rhs[free_index[i]] = b[i];
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
      const int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
      if (fixed[r]) continue;
      if (fixed[c])
        rhs[free_index[r]] -= it.value() * x[c];
      else
        t.emplace_back(free_index[r], free_index[c], it.value());
    }
  SparseMatrix Aff(nf, nf);
  Aff.setFromTriplets(t.begin(), t.end());
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(Aff);
  if (ldlt.info() != Eigen::Success) throw NumericalError("SPD factorization failed");
  Eigen::VectorXd xf = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !xf.allFinite()) throw NumericalError("SPD solve failed");
  const double rn = rhs.norm();
  if (rn > 0) {
    const double res = (Aff * xf - rhs).norm() / rn;
    if (!(res <= 1e-10)) throw NumericalError(fmt::format("SPD solve residual {} exceeds 1e-10", res));
  }
  for (int i = 0; i < n; ++i)
    if (!fixed[i]) x[i] = xf[free_index[i]];
  return x;
}

Eigen::VectorXd consistent_flux_on_sigma(const TriMesh& m, const SparseMatrix& A, const Eigen::VectorXd& u,
                                         const Eigen::VectorXd& load) {
  const auto sigma = boundary_node_mask(m, BoundaryLabel::sigma);
  std::vector<int> idx(m.num_nodes(), -1);
  int ns = 0;
  for (int i = 0; i < m.num_nodes(); ++i)
    if (sigma[i]) idx[i] = ns++;
  if (ns == 0) throw NumericalError("consistent flux needs sigma edges");
  const Eigen::VectorXd r = A * u - load;
  const SparseMatrix Ms = assemble_boundary_mass(m, BoundaryLabel::sigma);
  std::vector<Triplet> t;
  for (int k = 0; k < Ms.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(Ms, k); it; ++it)
      if (sigma[it.row()] && sigma[it.col()]) t.emplace_back(idx[it.row()], idx[it.col()], it.value());
  SparseMatrix Mss(ns, ns);
  Mss.setFromTriplets(t.begin(), t.end());
  Eigen::VectorXd rs(ns);
  for (int i = 0; i < m.num_nodes(); ++i)
    if (sigma[i]) rs[idx[i]] = r[i];
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(Mss);
  if (ldlt.info() != Eigen::Success) throw NumericalError("sigma mass matrix is singular");
  const Eigen::VectorXd ts = ldlt.solve(rs);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m.num_nodes());
  for (int i = 0; i < m.num_nodes(); ++i)
    if (sigma[i]) out[i] = ts[idx[i]];
  return out;
}

Eigen::VectorXcd tangential_gradient(const TriMesh& m, const std::vector<int>& loop, const ComplexNodalField& field) {
  const std::size_t n = loop.size();
  Eigen::VectorXcd d(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const int prev = loop[(k + n - 1) % n], cur = loop[k], next = loop[(k + 1) % n];
    const double lm = (m.nodes[cur] - m.nodes[prev]).norm();
    const double lp = (m.nodes[next] - m.nodes[cur]).norm();
    const Complex dm = (field[cur] - field[prev]) / lm;
    const Complex dp = (field[next] - field[cur]) / lp;
    // Second-order on non-uniform spacing.
    d[static_cast<Eigen::Index>(k)] = (dp * lm + dm * lp) / (lm + lp);
  }
  return d;
}

Eigen::VectorXcd tangential_gradient_on_gamma(const TriMesh& m, const ComplexNodalField& field) {
  return tangential_gradient(m, boundary_loop(m, BoundaryLabel::gamma), field);
}

void write_coordinate(std::ostream& os, const ComplexSparseMatrix& A) {
  for (int k = 0; k < A.outerSize(); ++k)
    for (ComplexSparseMatrix::InnerIterator it(A, k); it; ++it)
      os << fmt::format("{} {} {} {}\n", it.row(), it.col(), it.value().real(), it.value().imag());
}

}  // namespace ccbm
