#include "ccbm/problems.hpp"

#include <fmt/format.h>

#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace ccbm {

void RobinConfig::validate() const {
  if (!(alpha > 0)) throw std::invalid_argument("alpha must be positive");
  if (!(rho > 0)) throw std::invalid_argument("rho must be positive");
}

SigmaTraces traces_on_mesh(const CauchyData& data, const TriMesh& m) {
  if (data.points.size() < 2 || data.f.size() != static_cast<Eigen::Index>(data.points.size()) ||
      data.g.size() != data.f.size())
    throw std::invalid_argument("Cauchy data is empty or inconsistent");
  Polyline line;
  line.vertices = data.points;
  const std::size_t n = line.size();
  SigmaTraces out{Eigen::VectorXd::Zero(m.num_nodes()), Eigen::VectorXd::Zero(m.num_nodes())};
  const auto sigma = boundary_node_mask(m, BoundaryLabel::sigma);
  for (int i = 0; i < m.num_nodes(); ++i) {
    if (!sigma[i]) continue;
    const ClosestPoint cp = closest_point(line, m.nodes[i]);
    const auto a = static_cast<Eigen::Index>(cp.edge), b = static_cast<Eigen::Index>((cp.edge + 1) % n);
    out.f[i] = (1 - cp.s) * data.f[a] + cp.s * data.f[b];
    out.g[i] = (1 - cp.s) * data.g[a] + cp.s * data.g[b];
  }
  return out;
}

void write_cauchy(std::ostream& os, const CauchyData& d) {
  for (std::size_t i = 0; i < d.points.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    os << fmt::format("{} {} {} {}\n", d.points[i].x(), d.points[i].y(), d.f[k], d.g[k]);
  }
}

CauchyData read_cauchy(std::istream& is) {
  std::vector<Vec2> pts;
  std::vector<double> f, g;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double x, y, fv, gv;
    if (!(ls >> x >> y >> fv >> gv)) throw std::runtime_error("Cauchy data: expected 'x y f g' per line");
    pts.emplace_back(x, y);
    f.push_back(fv);
    g.push_back(gv);
  }
  CauchyData d;
  d.points = pts;
  d.f = Eigen::Map<Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
  d.g = Eigen::Map<Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
  return d;
}

void save_cauchy(const std::string& path, const CauchyData& d) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_cauchy(os, d);
}

CauchyData load_cauchy(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read Cauchy data file " + path);
  return read_cauchy(is);
}

std::string to_string(AdjointKind k) {
  switch (k) {
    case AdjointKind::p1: return "p1";
    case AdjointKind::p2: return "p2";
    case AdjointKind::q: return "q";
    case AdjointKind::w: return "w";
    case AdjointKind::lambda: return "lambda";
  }
  return "?";
}

AdmmState transfer_admm_state(const AdmmState& s, const TriMesh& src, const TriMesh& dst) {
  AdmmState out = s;
  out.v = transfer_field(src, s.v, dst);
  out.lambda = transfer_field(src, s.lambda, dst);
  return out;
}

Eigen::VectorXd solve_dirichlet_forward(const TriMesh& m, const Eigen::VectorXd& f, double alpha) {
  if (f.size() != m.num_nodes()) throw std::invalid_argument("Dirichlet data size does not match mesh");
  const SparseMatrix A = SparseMatrix(assemble_stiffness(m) + alpha * assemble_boundary_mass(m, BoundaryLabel::gamma));
  return solve_spd_with_dirichlet(A, Eigen::VectorXd::Zero(m.num_nodes()), boundary_node_mask(m, BoundaryLabel::sigma),
                                  f);
}

CauchyData synthesize_cauchy(const TriMesh& m, const Eigen::VectorXd& f, double alpha, double delta,
                             std::uint64_t seed) {
  if (delta < 0) throw std::invalid_argument("noise level must be nonnegative");
  Eigen::VectorXd u = solve_dirichlet_forward(m, f, alpha);
  if (delta > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> xi(0.0, 0.5);
    for (int i = 0; i < m.num_nodes(); ++i) u[i] *= 1.0 + delta * xi(rng);
  }
  const SparseMatrix A = SparseMatrix(assemble_stiffness(m) + alpha * assemble_boundary_mass(m, BoundaryLabel::gamma));
  const Eigen::VectorXd g = consistent_flux_on_sigma(m, A, u, Eigen::VectorXd::Zero(m.num_nodes()));
  CauchyData d;
  const auto loop = boundary_loop(m, BoundaryLabel::sigma);
  d.f.resize(static_cast<Eigen::Index>(loop.size()));
  d.g.resize(static_cast<Eigen::Index>(loop.size()));
  for (std::size_t k = 0; k < loop.size(); ++k) {
    d.points.push_back(m.nodes[loop[k]]);
    d.f[static_cast<Eigen::Index>(k)] = f[loop[k]];
    d.g[static_cast<Eigen::Index>(k)] = g[loop[k]];
  }
  return d;
}

CcbmSystem::CcbmSystem(const TriMesh& m, SigmaTraces data, RobinConfig cfg)
    : mesh_(m),
      ops_(assemble_operators(m)),
      data_(std::move(data)),
      cfg_(cfg),
      state_solver_(assemble_forms(ops_, cfg.alpha, cfg.rho, +1)),
      adjoint_solver_(assemble_forms(ops_, cfg.alpha, cfg.rho, -1)) {
  cfg_.validate();
  if (data_.f.size() != m.num_nodes() || data_.g.size() != m.num_nodes())
    throw std::invalid_argument("sigma traces do not match the mesh");
}

ComplexNodalField CcbmSystem::solve_state() const {
  return state_solver_.solve(assemble_load(ops_, nullptr, &data_.g, &data_.f, cfg_.rho));
}

ComplexNodalField CcbmSystem::adjoint_source(AdjointKind kind, const ComplexNodalField& u,
                                             const AdmmState* admm) const {
  const Eigen::VectorXd u1 = u.real(), u2 = u.imag();
  const Eigen::Index n = u.size();
  const Complex I(0.0, 1.0);
  auto penalty = [&]() -> Eigen::VectorXd {
    if (!admm) throw std::invalid_argument("adjoint '" + to_string(kind) + "' needs an ADMM state");
    if (admm->v.size() != n || admm->lambda.size() != n)
      throw std::invalid_argument("ADMM state does not match the mesh");
    return admm->gamma * (u1 - admm->v) + admm->lambda;
  };
  switch (kind) {
    case AdjointKind::p1: return u2.cast<Complex>();
    case AdjointKind::p2: return I * u2.cast<Complex>();
    case AdjointKind::q: return penalty().cast<Complex>() + I * u2.cast<Complex>();
    case AdjointKind::w: return I * penalty().cast<Complex>() - u2.cast<Complex>();
    case AdjointKind::lambda: return penalty().cast<Complex>();
  }
  throw std::invalid_argument("unknown adjoint kind");
}

ComplexNodalField CcbmSystem::solve_adjoint(AdjointKind kind, const ComplexNodalField& u,
                                            const AdmmState* admm) const {
  const ComplexNodalField src = adjoint_source(kind, u, admm);
  return adjoint_solver_.solve(assemble_load(ops_, &src, nullptr, nullptr, cfg_.rho));
}

double cost_J(const FemOperators& ops, const ComplexNodalField& u) {
  const Eigen::VectorXd u2 = u.imag();
  return 0.5 * u2.dot(ops.M * u2);
}

double cost_Y(const FemOperators& ops, const ComplexNodalField& u, const AdmmState& admm) {
  const Eigen::VectorXd r = u.real() - admm.v;
  return cost_J(ops, u) + 0.5 * admm.gamma * r.dot(ops.M * r) + admm.lambda.dot(ops.M * r);
}

double l2_norm(const FemOperators& ops, const Eigen::VectorXd& x) { return std::sqrt(std::max(0.0, x.dot(ops.M * x))); }

}  // namespace ccbm
