#pragma once

#include "ccbm/fem.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>

namespace ccbm {

struct RobinConfig {
  double alpha = 1.0;  // Robin coefficient on gamma
  double rho = 1.0;    // weight of the complex coupling on sigma
  void validate() const;
};

/// Dirichlet trace f and Neumann trace g sampled at the sigma nodes of the
/// synthesis mesh, listed counterclockwise.
struct CauchyData {
  std::vector<Vec2> points;
  Eigen::VectorXd f;
  Eigen::VectorXd g;
};

/// Cauchy data carried by the sigma nodes of a particular mesh, stored as
/// full nodal vectors (zero off sigma).
struct SigmaTraces {
  Eigen::VectorXd f;
  Eigen::VectorXd g;
};

/// Linear interpolation of the data along its own sigma polyline, evaluated
/// at the nearest polyline point of every sigma node of m.
SigmaTraces traces_on_mesh(const CauchyData& data, const TriMesh& m);

void write_cauchy(std::ostream& os, const CauchyData& d);
CauchyData read_cauchy(std::istream& is);
void save_cauchy(const std::string& path, const CauchyData& d);
CauchyData load_cauchy(const std::string& path);

enum class AdjointKind { p1, p2, q, w, lambda };
std::string to_string(AdjointKind k);

/// Auxiliary variable, multiplier and box constraint a <= v <= b of the
/// augmented Lagrangian, as nodal fields on the current mesh.
struct AdmmState {
  Eigen::VectorXd v;
  Eigen::VectorXd lambda;
  double gamma = 0.001;
  double a = -std::numeric_limits<double>::infinity();
  double b = std::numeric_limits<double>::infinity();
};

/// Moves v and lambda onto another mesh with transfer_field.
AdmmState transfer_admm_state(const AdmmState& s, const TriMesh& src, const TriMesh& dst);

/// u = f on sigma, du/dn + alpha u = 0 on gamma. f is a nodal vector; only
/// its sigma entries are used.
Eigen::VectorXd solve_dirichlet_forward(const TriMesh& m, const Eigen::VectorXd& f, double alpha);

/// Forward solve, multiplicative noise u_delta = (1 + delta*xi) u with
/// xi ~ N(0, 0.5^2) per node, then g by consistent flux of u_delta.
CauchyData synthesize_cauchy(const TriMesh& m, const Eigen::VectorXd& f, double alpha, double delta,
                             std::uint64_t seed);

/// The complex Robin problem on one mesh, with the state and adjoint
/// matrices factored once.
class CcbmSystem {
public:
  CcbmSystem(const TriMesh& m, SigmaTraces data, RobinConfig cfg);

  const TriMesh& mesh() const { return mesh_; }
  const FemOperators& ops() const { return ops_; }
  const SigmaTraces& data() const { return data_; }
  const RobinConfig& config() const { return cfg_; }

  /// (K + i rho M_sigma + alpha M_gamma) u = M_sigma (g + i rho f).
  ComplexNodalField solve_state() const;
  /// (K - i rho M_sigma + alpha M_gamma) p = M source(kind).
  ComplexNodalField solve_adjoint(AdjointKind kind, const ComplexNodalField& u, const AdmmState* admm) const;
  ComplexNodalField adjoint_source(AdjointKind kind, const ComplexNodalField& u, const AdmmState* admm) const;

private:
  TriMesh mesh_;
  FemOperators ops_;
  SigmaTraces data_;
  RobinConfig cfg_;
  ComplexSolver state_solver_;
  ComplexSolver adjoint_solver_;
};

/// 1/2 int |u2|^2.
double cost_J(const FemOperators& ops, const ComplexNodalField& u);
/// int 1/2|u2|^2 + gamma/2 |u1 - v|^2 + lambda (u1 - v).
double cost_Y(const FemOperators& ops, const ComplexNodalField& u, const AdmmState& admm);
/// L2 norm of a real nodal field.
double l2_norm(const FemOperators& ops, const Eigen::VectorXd& x);

}  // namespace ccbm
