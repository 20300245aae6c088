#pragma once

#include "ccbm/descent.hpp"

#include <functional>
#include <iosfwd>
#include <limits>

namespace ccbm {

struct AdmmConfig {
  double gamma = 0.001;
  double a = -std::numeric_limits<double>::infinity();
  double b = std::numeric_limits<double>::infinity();
  double lambda0 = 0.001;
  double v0 = 1.0;
  /// Start from v = u1 on the initial shape instead of the constant v0.
  bool v0_from_state = false;
  int outer = 20;   // N
  int inner = 10;   // SGBD iterations per SP1
  GradientKind kind = GradientKind::glambda1;
  /// Stop early once the primal residual drops below this (0 disables).
  double residual_tol = 0.0;
  void validate() const;
};

/// max(a, min(b, phi)) nodewise.
Eigen::VectorXd project_K(const Eigen::VectorXd& phi, double a, double b);

/// lambda + gamma (u1 - v).
Eigen::VectorXd update_multiplier(const Eigen::VectorXd& lambda, double gamma, const Eigen::VectorXd& u1,
                                  const Eigen::VectorXd& v);

struct OuterRecord {
  int outer_iter = 0;
  double Y = 0;  // SP1 objective at the new shape, old (v, lambda)
  double J = 0;
  double primal_residual = 0;  // |u1 - v| in L2 after SP2
  double hausdorff = 0;
  double lambda_norm = 0;
};

struct AdmmResult {
  TriMesh mesh;
  AdmmState state;
  std::vector<OuterRecord> outer;
  std::vector<IterationRecord> inner;  // all SGBD iterations, renumbered consecutively
  bool aborted = false;
  std::string message;
};

/// Called after every outer iteration with its index, mesh and state.
using OuterCallback = std::function<void(int, const TriMesh&, const AdmmState&)>;

AdmmResult admm_sgbd(const TriMesh& m0, const CauchyData& data, const RobinConfig& cfg, const AdmmConfig& acfg,
                     const DescentConfig& dcfg, const Polyline* target = nullptr, const OuterCallback& callback = {},
                     const IterationCallback& inner_callback = {});

void write_outer_history(std::ostream& os, const std::vector<OuterRecord>& rows);
/// "x y v lambda" per node.
void write_admm_state(std::ostream& os, const TriMesh& m, const AdmmState& s);

}  // namespace ccbm
