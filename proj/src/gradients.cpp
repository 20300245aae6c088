#include "ccbm/gradients.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace ccbm {

GradientKind parse_gradient_kind(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "g1") return GradientKind::g1;
  if (s == "g2") return GradientKind::g2;
  if (s == "gq") return GradientKind::gq;
  if (s == "gw") return GradientKind::gw;
  if (s == "glambda1") return GradientKind::glambda1;
  if (s == "glambda2") return GradientKind::glambda2;
  if (s == "gsharp1") return GradientKind::gsharp1;
  if (s == "gsharp2") return GradientKind::gsharp2;
  throw std::invalid_argument("unknown gradient kind '" + name + "'");
}

std::string to_string(GradientKind kind) {
  switch (kind) {
    case GradientKind::g1: return "G1";
    case GradientKind::g2: return "G2";
    case GradientKind::gq: return "GQ";
    case GradientKind::gw: return "GW";
    case GradientKind::glambda1: return "GLAMBDA1";
    case GradientKind::glambda2: return "GLAMBDA2";
    case GradientKind::gsharp1: return "GSHARP1";
    case GradientKind::gsharp2: return "GSHARP2";
  }
  return "?";
}

bool is_admm_kind(GradientKind kind) { return kind != GradientKind::g1 && kind != GradientKind::g2; }

std::vector<AdjointKind> required_adjoints(GradientKind kind) {
  switch (kind) {
    case GradientKind::g1: return {AdjointKind::p1};
    case GradientKind::g2: return {AdjointKind::p2};
    case GradientKind::gq: return {AdjointKind::q};
    case GradientKind::gw: return {AdjointKind::w};
    case GradientKind::glambda1: return {AdjointKind::p1, AdjointKind::lambda};
    case GradientKind::glambda2: return {AdjointKind::p1, AdjointKind::p2, AdjointKind::lambda};
    case GradientKind::gsharp1: return {AdjointKind::p1};
    case GradientKind::gsharp2: return {AdjointKind::p2};
  }
  return {};
}

GammaGeometry::GammaGeometry(const TriMesh& m, double h) : loop(boundary_loop(m, BoundaryLabel::gamma)) {
  position.assign(m.nodes.size(), -1);
  for (std::size_t k = 0; k < loop.size(); ++k) position[loop[k]] = static_cast<int>(k);
  Polyline p;
  for (int v : loop) p.vertices.push_back(m.nodes[v]);
  if (!(h > 0)) h = m.h_target;
  if (!(h > 0)) h = perimeter(p) / static_cast<double>(p.size());
  const auto k = discrete_curvature(p, BoundarySide::inner);
  kappa.resize(static_cast<Eigen::Index>(k.size()));
  for (std::size_t i = 0; i < k.size(); ++i) kappa[static_cast<Eigen::Index>(i)] = std::clamp(k[i], -1.0 / h, 1.0 / h);
}

BoundaryScalarField psi_gamma(const TriMesh& m, const GammaGeometry& geo, const ComplexNodalField& u,
                              const ComplexNodalField& psi, double alpha) {
  const Eigen::VectorXcd du = tangential_gradient(m, geo.loop, u);
  const Eigen::VectorXcd dp = tangential_gradient(m, geo.loop, psi);
  BoundaryScalarField out(du.size());
  for (Eigen::Index k = 0; k < du.size(); ++k) {
    const int i = geo.loop[static_cast<std::size_t>(k)];
    const double c = alpha * alpha - alpha * geo.kappa[k];
    out[k] = du[k].real() * dp[k].imag() - du[k].imag() * dp[k].real() +
             c * (psi[i].real() * u[i].imag() - psi[i].imag() * u[i].real());
  }
  return out;
}

BoundaryScalarField psi_dagger(const TriMesh& m, const GammaGeometry& geo, const ComplexNodalField& u,
                               const ComplexNodalField& psi, double alpha) {
  const Eigen::VectorXcd du = tangential_gradient(m, geo.loop, u);
  const Eigen::VectorXcd dp = tangential_gradient(m, geo.loop, psi);
  BoundaryScalarField out(du.size());
  for (Eigen::Index k = 0; k < du.size(); ++k) {
    const int i = geo.loop[static_cast<std::size_t>(k)];
    const double c = alpha * alpha - alpha * geo.kappa[k];
    out[k] = du[k].real() * dp[k].real() + du[k].imag() * dp[k].imag() -
             c * (u[i].real() * psi[i].real() + u[i].imag() * psi[i].imag());
  }
  return out;
}

const ComplexNodalField& AdjointFields::get(AdjointKind kind) const {
  const std::optional<ComplexNodalField>* f = nullptr;
  switch (kind) {
    case AdjointKind::p1: f = &p1; break;
    case AdjointKind::p2: f = &p2; break;
    case AdjointKind::q: f = &q; break;
    case AdjointKind::w: f = &w; break;
    case AdjointKind::lambda: f = &lambda; break;
  }
  if (!f || !f->has_value()) throw std::invalid_argument("missing adjoint field '" + to_string(kind) + "'");
  return **f;
}

void AdjointFields::set(AdjointKind kind, ComplexNodalField value) {
  switch (kind) {
    case AdjointKind::p1: p1 = std::move(value); break;
    case AdjointKind::p2: p2 = std::move(value); break;
    case AdjointKind::q: q = std::move(value); break;
    case AdjointKind::w: w = std::move(value); break;
    case AdjointKind::lambda: lambda = std::move(value); break;
  }
}

AdjointFields compute_adjoints(const CcbmSystem& sys, GradientKind kind, const ComplexNodalField& u,
                               const AdmmState* admm) {
  AdjointFields adj;
  for (AdjointKind a : required_adjoints(kind)) adj.set(a, sys.solve_adjoint(a, u, admm));
  return adj;
}

BoundaryScalarField shape_gradient(GradientKind kind, const TriMesh& m, const GammaGeometry& geo,
                                   const ComplexNodalField& u, const AdjointFields& adj, const AdmmState* admm,
                                   double alpha) {
  if (u.size() != m.num_nodes()) throw std::invalid_argument("state does not match the mesh");
  const auto n = static_cast<Eigen::Index>(geo.loop.size());
  BoundaryScalarField half_u2sq(n), penalty = BoundaryScalarField::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double u2 = u[geo.loop[static_cast<std::size_t>(k)]].imag();
    half_u2sq[k] = 0.5 * u2 * u2;
  }
  if (is_admm_kind(kind)) {
    if (!admm) throw std::invalid_argument("gradient " + to_string(kind) + " needs an ADMM state");
    for (Eigen::Index k = 0; k < n; ++k) {
      const int i = geo.loop[static_cast<std::size_t>(k)];
      const double r = u[i].real() - admm->v[i];
      penalty[k] = 0.5 * admm->gamma * r * r + admm->lambda[i] * r;
    }
  }
  auto g1 = [&] { return BoundaryScalarField(half_u2sq + psi_gamma(m, geo, u, adj.get(AdjointKind::p1), alpha)); };
  auto g2 = [&] { return BoundaryScalarField(half_u2sq - psi_dagger(m, geo, u, adj.get(AdjointKind::p2), alpha)); };
  auto lambda_term = [&] { return BoundaryScalarField(penalty - psi_dagger(m, geo, u, adj.get(AdjointKind::lambda), alpha)); };
  switch (kind) {
    case GradientKind::g1: return g1();
    case GradientKind::g2: return g2();
    case GradientKind::gq: return half_u2sq + penalty - psi_dagger(m, geo, u, adj.get(AdjointKind::q), alpha);
    case GradientKind::gw: return half_u2sq + penalty - psi_gamma(m, geo, u, adj.get(AdjointKind::w), alpha);
    case GradientKind::glambda1: return g1() + lambda_term();
    case GradientKind::glambda2: {
      const BoundaryScalarField G1 = g1();
      const BoundaryScalarField GL1 = G1 + lambda_term();
      return g2() + GL1 - G1;
    }
    case GradientKind::gsharp1: return g1() + penalty;
    case GradientKind::gsharp2: return g2() + penalty;
  }
  throw std::invalid_argument("unknown gradient kind");
}

double directional_derivative(const TriMesh& m, const GammaGeometry& geo, const BoundaryScalarField& G,
                              const NodalVectorField& theta) {
  if (theta.rows() != m.num_nodes()) throw std::invalid_argument("deformation field does not match the mesh");
  double sum = 0.0;
  for (const auto& e : m.boundary_edges) {
    if (e.label != BoundaryLabel::gamma) continue;
    const int i = e.nodes[0], j = e.nodes[1];
    const Vec2 d = m.nodes[j] - m.nodes[i];
    const double L = d.norm();
    const Vec2 n(d.y() / L, -d.x() / L);
    const double gi = G[geo.position[i]], gj = G[geo.position[j]];
    const double ti = theta.row(i).dot(n.transpose()), tj = theta.row(j).dot(n.transpose());
    sum += L / 6.0 * (2 * gi * ti + gi * tj + gj * ti + 2 * gj * tj);
  }
  return sum;
}

double evaluate_functional(Functional functional, const TriMesh& m, const SigmaTraces& data, const RobinConfig& cfg,
                           const AdmmState* admm) {
  CcbmSystem sys(m, data, cfg);
  const ComplexNodalField u = sys.solve_state();
  if (functional == Functional::J) return cost_J(sys.ops(), u);
  if (!admm) throw std::invalid_argument("functional Y needs an ADMM state");
  return cost_Y(sys.ops(), u, *admm);
}

std::vector<FdRow> fd_certify(Functional functional, const TriMesh& m, const SigmaTraces& data, const RobinConfig& cfg,
                              const AdmmState* admm, const NodalVectorField& theta, const std::vector<double>& ts,
                              const std::vector<GradientKind>& kinds) {
  if (functional == Functional::Y && !admm) throw std::invalid_argument("functional Y needs an ADMM state");
  const auto sigma = boundary_node_mask(m, BoundaryLabel::sigma);
  for (int i = 0; i < m.num_nodes(); ++i)
    if (sigma[i] && theta.row(i).norm() != 0.0) throw std::invalid_argument("theta must vanish on sigma");

  CcbmSystem sys(m, data, cfg);
  const ComplexNodalField u = sys.solve_state();
  const double F0 = functional == Functional::J ? cost_J(sys.ops(), u) : cost_Y(sys.ops(), u, *admm);
  const GammaGeometry geo(m);

  std::vector<double> analytic;
  for (GradientKind k : kinds) {
    if (functional == Functional::J && is_admm_kind(k))
      throw std::invalid_argument("gradient " + to_string(k) + " represents Y, not J");
    const AdjointFields adj = compute_adjoints(sys, k, u, admm);
    analytic.push_back(directional_derivative(m, geo, shape_gradient(k, m, geo, u, adj, admm, cfg.alpha), theta));
  }

  std::vector<FdRow> rows;
  for (double t : ts) {
    auto moved = deform(m, theta, t);
    double fd = std::numeric_limits<double>::quiet_NaN();
    if (moved) {
      std::optional<AdmmState> moved_admm;
      if (admm) moved_admm = transfer_admm_state(*admm, m, *moved);
      fd = (evaluate_functional(functional, *moved, data, cfg, moved_admm ? &*moved_admm : nullptr) - F0) / t;
    }
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      FdRow r{kinds[k], t, fd, analytic[k], std::numeric_limits<double>::quiet_NaN(), !moved};
      if (moved) {
        const double scale = std::max(std::abs(fd), std::abs(analytic[k]));
        r.relative_error = scale > 0 ? std::abs(fd - analytic[k]) / scale : 0.0;
      }
      rows.push_back(r);
    }
  }
  return rows;
}

NodalVectorField certification_field(const TriMesh& m) {
  const auto sigma = boundary_node_mask(m, BoundaryLabel::sigma);
  NodalVectorField theta(m.num_nodes(), 2);
  for (int i = 0; i < m.num_nodes(); ++i) {
    const Vec2& x = m.nodes[i];
    const double w = sigma[i] ? 0.0 : 1.0 - x.squaredNorm();
    theta.row(i) << w * (0.5 + x.x() + 0.5 * x.y() * x.y()), w * (0.3 - x.y() + x.x() * x.y());
  }
  return theta;
}

void write_fd_report(std::ostream& os, const std::vector<FdRow>& rows) {
  os << "kind,t,fd_value,analytic_value,relative_error\n";
  for (const auto& r : rows) {
    if (r.skipped)
      os << fmt::format("{},{},skipped,{},nan\n", to_string(r.kind), r.t, r.analytic_value);
    else
      os << fmt::format("{},{},{},{},{}\n", to_string(r.kind), r.t, r.fd_value, r.analytic_value, r.relative_error);
  }
}

void write_gradient(std::ostream& os, const TriMesh& m, const GammaGeometry& geo, const BoundaryScalarField& G) {
  for (std::size_t k = 0; k < geo.loop.size(); ++k) {
    const Vec2& p = m.nodes[geo.loop[k]];
    os << fmt::format("{} {} {}\n", p.x(), p.y(), G[static_cast<Eigen::Index>(k)]);
  }
}

}  // namespace ccbm
