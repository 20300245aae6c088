#include "ccbm/admm.hpp"

#include <fmt/format.h>

#include <optional>
#include <ostream>

namespace ccbm {

void AdmmConfig::validate() const {
  if (!(gamma > 0)) throw std::invalid_argument("admm.gamma must be positive");
  if (!(a <= b)) throw std::invalid_argument("admm.a must not exceed admm.b");
  if (outer < 1) throw std::invalid_argument("admm.outer must be at least 1");
  if (inner < 0) throw std::invalid_argument("admm.inner must be nonnegative");
  if (!is_admm_kind(kind)) throw std::invalid_argument("admm.kind must be an ADMM gradient kind");
  if (!std::isfinite(lambda0) || (!v0_from_state && !std::isfinite(v0)))
    throw std::invalid_argument("admm.lambda0 and admm.v0 must be finite");
}

Eigen::VectorXd project_K(const Eigen::VectorXd& phi, double a, double b) {
  if (!(a <= b)) throw std::invalid_argument("projection bounds must satisfy a <= b");
  return phi.cwiseMax(a).cwiseMin(b);
}

Eigen::VectorXd update_multiplier(const Eigen::VectorXd& lambda, double gamma, const Eigen::VectorXd& u1,
                                  const Eigen::VectorXd& v) {
  if (lambda.size() != u1.size() || v.size() != u1.size())
    throw std::invalid_argument("multiplier update: field sizes differ");
  return lambda + gamma * (u1 - v);
}

AdmmResult admm_sgbd(const TriMesh& m0, const CauchyData& data, const RobinConfig& cfg, const AdmmConfig& acfg,
                     const DescentConfig& dcfg, const Polyline* target, const OuterCallback& callback,
                     const IterationCallback& inner_callback) {
  acfg.validate();
  dcfg.validate();
  AdmmResult res;
  res.mesh = m0;
  res.state.gamma = acfg.gamma;
  res.state.a = acfg.a;
  res.state.b = acfg.b;
  res.state.lambda = Eigen::VectorXd::Constant(m0.num_nodes(), acfg.lambda0);
  if (acfg.v0_from_state) {
    CcbmSystem sys(m0, traces_on_mesh(data, m0), cfg);
    res.state.v = sys.solve_state().real();
  } else {
    res.state.v = Eigen::VectorXd::Constant(m0.num_nodes(), acfg.v0);
  }

  DescentConfig inner_cfg = dcfg;
  inner_cfg.max_inner = acfg.inner;
  int inner_offset = 0;

  for (int k = 0; k < acfg.outer; ++k) {
    // SP1: shape update with (v^k, lambda^k) frozen.
    IterationCallback cb;
    if (inner_callback) cb = [&](int it, const TriMesh& m) { inner_callback(inner_offset + it, m); };
    DescentResult sp1 = sgbd_inner_loop(res.mesh, data, cfg, &res.state, acfg.kind, inner_cfg, target, cb);
    for (auto r : sp1.history) {
      r.iter += inner_offset;
      res.inner.push_back(r);
    }
    inner_offset += static_cast<int>(sp1.history.size());
    res.mesh = std::move(sp1.mesh);
    res.state = std::move(*sp1.admm);
    if (sp1.aborted) {
      res.aborted = true;
      res.message = fmt::format("outer iteration {}: {}", k, sp1.message);
      break;
    }

    std::optional<CcbmSystem> solved;
    ComplexNodalField u;
    try {
      solved.emplace(res.mesh, traces_on_mesh(data, res.mesh), cfg);
      u = solved->solve_state();
    } catch (const NumericalError& e) {
      res.aborted = true;
      res.message = fmt::format("outer iteration {}: {}", k, e.what());
      break;
    }
    const CcbmSystem& sys = *solved;
    OuterRecord rec;
    rec.outer_iter = k;
    rec.Y = cost_Y(sys.ops(), u, res.state);
    rec.J = cost_J(sys.ops(), u);

    // SP2 and SP3.
    const Eigen::VectorXd u1 = u.real();
    const Eigen::VectorXd v = project_K(u1 + res.state.lambda / res.state.gamma, res.state.a, res.state.b);
    res.state.lambda = update_multiplier(res.state.lambda, res.state.gamma, u1, v);
    res.state.v = v;

    rec.primal_residual = l2_norm(sys.ops(), u1 - v);
    rec.lambda_norm = l2_norm(sys.ops(), res.state.lambda);
    rec.hausdorff = target ? hausdorff_distance(boundary_polyline(res.mesh, BoundaryLabel::gamma), *target)
                           : std::numeric_limits<double>::quiet_NaN();
    res.outer.push_back(rec);
    if (callback) callback(k, res.mesh, res.state);
    if (acfg.residual_tol > 0 && rec.primal_residual < acfg.residual_tol) {
      res.message = "primal residual tolerance reached";
      break;
    }
  }
  return res;
}

void write_outer_history(std::ostream& os, const std::vector<OuterRecord>& rows) {
  os << "outer_iter,Y,J,primal_residual,hausdorff,lambda_norm\n";
  for (const auto& r : rows)
    os << fmt::format("{},{},{},{},{},{}\n", r.outer_iter, r.Y, r.J, r.primal_residual, r.hausdorff, r.lambda_norm);
}

void write_admm_state(std::ostream& os, const TriMesh& m, const AdmmState& s) {
  for (int i = 0; i < m.num_nodes(); ++i)
    os << fmt::format("{} {} {} {}\n", m.nodes[i].x(), m.nodes[i].y(), s.v[i], s.lambda[i]);
}

}  // namespace ccbm
