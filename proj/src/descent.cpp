#include "ccbm/descent.hpp"

#include <Eigen/SparseCholesky>
#include <fmt/format.h>

#include <cmath>
#include <ostream>

namespace ccbm {

void DescentConfig::validate() const {
  if (!(beta > 0 && beta <= 1)) throw std::invalid_argument("descent.beta must lie in (0, 1]");
  if (!(mu > 0)) throw std::invalid_argument("descent.mu must be positive");
  if (max_inner < 0) throw std::invalid_argument("descent.max_inner must be nonnegative");
  if (!(eps > 0)) throw std::invalid_argument("descent.eps must be positive");
  if (!(backtrack_factor > 0 && backtrack_factor < 1))
    throw std::invalid_argument("descent.backtrack_factor must lie in (0, 1)");
  if (max_backtracks < 0) throw std::invalid_argument("descent.max_backtracks must be nonnegative");
}

NodalVectorField sobolev_extension(const TriMesh& m, const GammaGeometry& geo, const BoundaryScalarField& G,
                                   double beta) {
  if (!(beta > 0 && beta <= 1)) throw std::invalid_argument("beta must lie in (0, 1]");
  if (G.size() != static_cast<Eigen::Index>(geo.loop.size()))
    throw std::invalid_argument("shape gradient does not match the gamma loop");
  const int n = m.num_nodes();
  SparseMatrix A = beta * assemble_stiffness(m);
  if (beta < 1) A += (1 - beta) * assemble_boundary_stiffness(m, BoundaryLabel::gamma);

  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 2);
  for (const auto& e : m.boundary_edges) {
    if (e.label != BoundaryLabel::gamma) continue;
    const int i = e.nodes[0], j = e.nodes[1];
    const Vec2 d = m.nodes[j] - m.nodes[i];
    const double L = d.norm();
    const Eigen::RowVector2d nrm(d.y() / L, -d.x() / L);
    const double gi = G[geo.position[i]], gj = G[geo.position[j]];
    rhs.row(i) -= L / 6.0 * (2 * gi + gj) * nrm;
    rhs.row(j) -= L / 6.0 * (gi + 2 * gj) * nrm;
  }

  const auto sigma = boundary_node_mask(m, BoundaryLabel::sigma);
  std::vector<int> idx(n, -1);
  int nf = 0;
  for (int i = 0; i < n; ++i)
    if (!sigma[i]) idx[i] = nf++;
  if (nf == n) throw NumericalError("extension needs sigma nodes");
  std::vector<Eigen::Triplet<double>> t;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it)
      if (!sigma[it.row()] && !sigma[it.col()]) t.emplace_back(idx[it.row()], idx[it.col()], it.value());
  SparseMatrix Aff(nf, nf);
  Aff.setFromTriplets(t.begin(), t.end());
  Eigen::MatrixXd bf(nf, 2);
  for (int i = 0; i < n; ++i)
    if (!sigma[i]) bf.row(idx[i]) = rhs.row(i);
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(Aff);
  if (ldlt.info() != Eigen::Success) throw NumericalError("extension system is singular");
  const Eigen::MatrixXd xf = ldlt.solve(bf);
  if (!xf.allFinite()) throw NumericalError("extension solve produced non-finite values");
  NodalVectorField theta = NodalVectorField::Zero(n, 2);
  for (int i = 0; i < n; ++i)
    if (!sigma[i]) theta.row(i) = xf.row(idx[i]);
  return theta;
}

double h1_norm_squared(const FemOperators& ops, const NodalVectorField& theta) {
  double s = 0;
  for (int c = 0; c < 2; ++c) {
    const Eigen::VectorXd x = theta.col(c);
    s += x.dot(ops.K * x) + x.dot(ops.M * x);
  }
  return s;
}

double step_size(double cost, const NodalVectorField& theta, double mu, const FemOperators& ops, bool squared) {
  const double n2 = h1_norm_squared(ops, theta);
  if (!(n2 > 0)) return 0.0;
  return mu * cost / (squared ? n2 : std::sqrt(n2));
}

namespace {

struct Evaluation {
  double cost = 0;      // J or Y
  double step_cost = 0; // value entering the step rule
  double dd = 0;
  NodalVectorField theta;
  FemOperators ops;
};

Evaluation evaluate(const TriMesh& m, const SigmaTraces& tr, const RobinConfig& cfg, const AdmmState* admm,
                    GradientKind kind, double beta) {
  CcbmSystem sys(m, tr, cfg);
  const ComplexNodalField u = sys.solve_state();
  Evaluation ev;
  const double J = cost_J(sys.ops(), u);
  ev.cost = admm ? cost_Y(sys.ops(), u, *admm) : J;
  // The step rule falls back to J when Y <= 0.
  ev.step_cost = ev.cost > 0 ? ev.cost : J;
  const GammaGeometry geo(m);
  const AdjointFields adj = compute_adjoints(sys, kind, u, admm);
  const BoundaryScalarField G = shape_gradient(kind, m, geo, u, adj, admm, cfg.alpha);
  ev.theta = sobolev_extension(m, geo, G, beta);
  ev.dd = directional_derivative(m, geo, G, ev.theta);
  ev.ops = sys.ops();
  return ev;
}

double cost_only(const TriMesh& m, const SigmaTraces& tr, const RobinConfig& cfg, const AdmmState* admm) {
  CcbmSystem sys(m, tr, cfg);
  const ComplexNodalField u = sys.solve_state();
  return admm ? cost_Y(sys.ops(), u, *admm) : cost_J(sys.ops(), u);
}

}  // namespace

DescentResult sgbd_inner_loop(const TriMesh& m0, const CauchyData& data, const RobinConfig& cfg,
                              const AdmmState* admm, GradientKind kind, const DescentConfig& dcfg,
                              const Polyline* target, const IterationCallback& callback) {
  dcfg.validate();
  cfg.validate();
  if (!admm && is_admm_kind(kind)) throw std::invalid_argument("gradient " + to_string(kind) + " needs an ADMM state");
  if (admm && !is_admm_kind(kind)) throw std::invalid_argument("ADMM descent needs an ADMM gradient kind");
  const double h = dcfg.h > 0 ? dcfg.h : m0.h_target;

  DescentResult res;
  res.mesh = m0;
  if (admm) res.admm = *admm;

  for (int it = 0; it < dcfg.max_inner; ++it) {
    const TriMesh& m = res.mesh;
    const AdmmState* st = res.admm ? &*res.admm : nullptr;
    const SigmaTraces tr = traces_on_mesh(data, m);
    Evaluation ev;
    try {
      ev = evaluate(m, tr, cfg, st, kind, dcfg.beta);
    } catch (const NumericalError& e) {
      res.aborted = true;
      res.message = fmt::format("iteration {}: {}", it, e.what());
      break;
    }

    IterationRecord rec;
    rec.iter = it;
    rec.cost = ev.cost;
    rec.grad_norm = std::abs(ev.dd);
    rec.hausdorff = target ? hausdorff_distance(boundary_polyline(m, BoundaryLabel::gamma), *target)
                           : std::numeric_limits<double>::quiet_NaN();
    rec.min_quality = min_quality(m);

    if (dcfg.stop_on_eps && rec.grad_norm < dcfg.eps) {
      res.history.push_back(rec);
      res.message = "gradient tolerance reached";
      break;
    }
    double t = step_size(ev.step_cost, ev.theta, dcfg.mu, ev.ops, dcfg.squared_norm);
    if (!(t > 0)) {
      res.history.push_back(rec);
      res.message = "zero step";
      break;
    }

    std::optional<TriMesh> moved;
    for (int b = 0; b <= dcfg.max_backtracks; ++b, t *= dcfg.backtrack_factor) {
      moved = deform(m, ev.theta, t);
      if (!moved) continue;
      if (dcfg.armijo) {
        std::optional<AdmmState> ms;
        if (st) ms = transfer_admm_state(*st, m, *moved);
        double c = 0;
        try {
          c = cost_only(*moved, tr, cfg, ms ? &*ms : nullptr);
        } catch (const NumericalError&) {
          moved.reset();
          continue;
        }
        if (c > ev.cost + dcfg.armijo_c * t * ev.dd) {
          moved.reset();
          continue;
        }
      }
      break;
    }
    if (!moved) {
      res.history.push_back(rec);
      res.aborted = true;
      res.message = fmt::format("no admissible step after {} backtracks at iteration {}", dcfg.max_backtracks, it);
      break;
    }
    const auto sigma = boundary_node_mask(m, BoundaryLabel::sigma);
    for (int i = 0; i < m.num_nodes(); ++i)
      if (sigma[i] && moved->nodes[i] != m.nodes[i]) throw NumericalError("deformation moved the outer boundary");

    TriMesh next = std::move(*moved);
    if (res.admm) res.admm = transfer_admm_state(*res.admm, m, next);
    rec.step = t;
    rec.min_quality = min_quality(next);
    if (rec.min_quality < dcfg.remesh_quality) {
      try {
        TriMesh fresh = remesh(next, h);
        if (res.admm) res.admm = transfer_admm_state(*res.admm, next, fresh);
        next = std::move(fresh);
      } catch (const GeometryError& e) {
        res.history.push_back(rec);
        res.aborted = true;
        res.message = fmt::format("remeshing failed at iteration {}: {}", it, e.what());
        break;
      }
      rec.remeshed = true;
      rec.min_quality = min_quality(next);
    }
    res.history.push_back(rec);
    res.mesh = std::move(next);
    if (callback) callback(it, res.mesh);
  }
  return res;
}

void write_history(std::ostream& os, const std::vector<IterationRecord>& rows) {
  os << "iter,cost,grad_norm,hausdorff,step,min_quality,remeshed\n";
  for (const auto& r : rows)
    os << fmt::format("{},{},{},{},{},{},{}\n", r.iter, r.cost, r.grad_norm, r.hausdorff, r.step, r.min_quality,
                      r.remeshed ? 1 : 0);
}

}  // namespace ccbm
