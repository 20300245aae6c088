#include "fixtures.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace ccbm;

namespace {

double u2_norm(const TriMesh& m, const SigmaTraces& tr) {
  CcbmSystem sys(m, tr, RobinConfig{});
  const ComplexNodalField u = sys.solve_state();
  return l2_norm(sys.ops(), u.imag());
}

Eigen::VectorXd random_field(int n, unsigned seed, double scale = 1.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> ud(-scale, scale);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = ud(rng);
  return v;
}

double area(const FemOperators& ops) {
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(ops.M.rows());
  return one.dot(ops.M * one);
}

}  // namespace

TEST_CASE("Robin config constraints") {
  CHECK_NOTHROW(RobinConfig{}.validate());
  CHECK_THROWS_AS((RobinConfig{-1.0, 1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((RobinConfig{1.0, 0.0}.validate()), std::invalid_argument);
}

TEST_CASE("exact radial data on the exact annulus gives a real state") {
  const TriMesh m = fx::annulus(0.04);
  CcbmSystem sys(m, fx::radial_traces(m), RobinConfig{});
  const ComplexNodalField u = sys.solve_state();
  CHECK(fx::max_abs(u.imag()) < 2e-3);
  double err = 0;
  for (int i = 0; i < m.num_nodes(); ++i) err = std::max(err, std::abs(u[i].real() - fx::radial_u(m.nodes[i])));
  CHECK(err < 0.01);
  CHECK(cost_J(sys.ops(), u) < 1e-6);

  const double coarse = u2_norm(fx::annulus(0.08), fx::radial_traces(fx::annulus(0.08)));
  CHECK(coarse / l2_norm(sys.ops(), u.imag()) >= 3.0);
}

TEST_CASE("zero data gives zero state") {
  const TriMesh m = fx::annulus(0.1);
  const SigmaTraces tr{Eigen::VectorXd::Zero(m.num_nodes()), Eigen::VectorXd::Zero(m.num_nodes())};
  CHECK(CcbmSystem(m, tr, RobinConfig{}).solve_state().norm() == 0.0);
}

TEST_CASE("data from the wrong cavity leaves a large imaginary part") {
  const double h = 0.04;
  const TriMesh exact = fx::annulus(h, 0.5);
  const TriMesh wrong = fx::annulus(h, 0.3);
  CHECK(u2_norm(wrong, fx::radial_traces(wrong)) > 10 * u2_norm(exact, fx::radial_traces(exact)));
}

TEST_CASE("adjoint sources and superposition") {
  const TriMesh m = fx::annulus(0.08, 0.45);
  CcbmSystem sys(m, fx::radial_traces(m), RobinConfig{1.0, 2.0});
  const ComplexNodalField u = sys.solve_state();
  AdmmState st;
  st.gamma = 0.7;
  st.v = u.real() + 0.3 * random_field(m.num_nodes(), 1);
  st.lambda = random_field(m.num_nodes(), 2, 0.2);

  const auto p1 = sys.solve_adjoint(AdjointKind::p1, u, &st);
  const auto p2 = sys.solve_adjoint(AdjointKind::p2, u, &st);
  const auto q = sys.solve_adjoint(AdjointKind::q, u, &st);
  const auto w = sys.solve_adjoint(AdjointKind::w, u, &st);
  const auto lam = sys.solve_adjoint(AdjointKind::lambda, u, &st);
  const Complex I(0, 1);
  CHECK((q - (lam + p2)).norm() / q.norm() < 1e-10);
  CHECK((w - (I * lam - p1)).norm() / w.norm() < 1e-10);
  CHECK((p2 - I * p1).norm() / p2.norm() < 1e-10);

  // Sources as stated.
  const Eigen::VectorXd r = u.real() - st.v;
  CHECK((sys.adjoint_source(AdjointKind::lambda, u, &st) - (st.gamma * r + st.lambda).cast<Complex>()).norm() < 1e-14);
  CHECK((sys.adjoint_source(AdjointKind::p1, u, nullptr) - u.imag().cast<Complex>()).norm() < 1e-14);

  // Real state: no p1; v = u1 and lambda = 0 as well: no q.
  const ComplexNodalField ur = u.real().cast<Complex>();
  CHECK(sys.solve_adjoint(AdjointKind::p1, ur, nullptr).norm() == 0.0);
  AdmmState zero{ur.real(), Eigen::VectorXd::Zero(m.num_nodes())};
  CHECK(sys.solve_adjoint(AdjointKind::q, ur, &zero).norm() == 0.0);

  CHECK_THROWS_AS(sys.solve_adjoint(AdjointKind::q, u, nullptr), std::invalid_argument);
}

TEST_CASE("adjoints solve the conjugate-coupled system") {
  const TriMesh m = fx::annulus(0.1);
  const RobinConfig cfg{1.5, 3.0};
  CcbmSystem sys(m, fx::radial_traces(m), cfg);
  const ComplexNodalField u = sys.solve_state();
  const ComplexNodalField p = sys.solve_adjoint(AdjointKind::p2, u, nullptr);
  const ComplexNodalField rhs = sys.ops().M.cast<Complex>() * sys.adjoint_source(AdjointKind::p2, u, nullptr);
  CHECK((assemble_forms(m, cfg.alpha, cfg.rho, -1) * p - rhs).norm() / rhs.norm() < 1e-10);
}

TEST_CASE("cost examples") {
  const TriMesh m = fx::annulus(0.1);
  const FemOperators ops = assemble_operators(m);
  const int n = m.num_nodes();
  const double A = area(ops);

  CHECK(cost_J(ops, ComplexNodalField::Constant(n, Complex(3.0, 0.0))) == 0.0);
  CHECK(cost_J(ops, ComplexNodalField::Constant(n, Complex(0.0, 1.0))) / A == doctest::Approx(0.5).epsilon(1e-12));

  AdmmState st{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n), 2.0};
  CHECK(cost_Y(ops, ComplexNodalField::Ones(n), st) / A == doctest::Approx(2.0).epsilon(1e-12));
  AdmmState zero{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  CHECK(cost_Y(ops, ComplexNodalField::Zero(n), zero) == 0.0);

  ComplexNodalField u(n);
  u.real() = random_field(n, 3);
  u.imag() = random_field(n, 4, 0.1);
  AdmmState tied{u.real(), Eigen::VectorXd::Zero(n)};
  CHECK(cost_Y(ops, u, tied) == doctest::Approx(cost_J(ops, u)).epsilon(1e-14));

  // Y can only go negative through lambda (u1 - v).
  for (unsigned s = 0; s < 10; ++s) {
    AdmmState r{random_field(n, 10 + s), random_field(n, 30 + s, 5.0), 0.01};
    const double bound = -l2_norm(ops, r.lambda) * l2_norm(ops, u.real() - r.v);
    CHECK(cost_Y(ops, u, r) >= bound);
    CHECK(cost_J(ops, u) >= 0);
  }
}

TEST_CASE("synthesized data on the radial annulus") {
  const TriMesh m = fx::annulus(0.04);
  const Eigen::VectorXd f = Eigen::VectorXd::Ones(m.num_nodes());
  const CauchyData d = synthesize_cauchy(m, f, 1.0, 0.0, 0);
  CHECK(d.points.size() == boundary_loop(m, BoundaryLabel::sigma).size());
  for (Eigen::Index k = 0; k < d.g.size(); ++k) {
    CHECK(d.f[k] == 1.0);
    CHECK(d.g[k] == doctest::Approx(fx::radial_B()).epsilon(0.05));
  }
  CHECK(std::abs(d.g.mean() - fx::radial_B()) < 2e-3);

  const CauchyData z = synthesize_cauchy(m, Eigen::VectorXd::Zero(m.num_nodes()), 1.0, 0.0, 0);
  CHECK(fx::max_abs(z.g) == 0.0);

  const CauchyData a = synthesize_cauchy(m, f, 1.0, 0.01, 42);
  const CauchyData b = synthesize_cauchy(m, f, 1.0, 0.01, 42);
  const CauchyData c = synthesize_cauchy(m, f, 1.0, 0.01, 43);
  CHECK(a.g == b.g);
  CHECK(a.f == b.f);
  CHECK(a.g != c.g);
  CHECK(fx::max_abs(a.g - d.g) > 0);
  CHECK_THROWS_AS(synthesize_cauchy(m, f, 1.0, -0.1, 0), std::invalid_argument);
}

TEST_CASE("forward Dirichlet solve reproduces its boundary data") {
  const TriMesh m = fx::annulus(0.08);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(m.num_nodes());
  const auto sigma = boundary_node_mask(m, BoundaryLabel::sigma);
  for (int i = 0; i < m.num_nodes(); ++i)
    if (sigma[i]) f[i] = m.nodes[i].x();
  const Eigen::VectorXd u = solve_dirichlet_forward(m, f, 2.0);
  for (int i = 0; i < m.num_nodes(); ++i)
    if (sigma[i]) CHECK(u[i] == f[i]);
  CHECK_THROWS_AS(solve_dirichlet_forward(m, Eigen::VectorXd::Zero(3), 1.0), std::invalid_argument);
}

TEST_CASE("Dirichlet limit of a large Robin coefficient") {
  // alpha -> infinity: u -> 1 + ln r / ln 2 (u = 0 on gamma).
  const TriMesh m = fx::annulus(0.05);
  const Eigen::VectorXd u = solve_dirichlet_forward(m, Eigen::VectorXd::Ones(m.num_nodes()), 1e4);
  double err = 0;
  for (int i = 0; i < m.num_nodes(); ++i)
    err = std::max(err, std::abs(u[i] - (1 + std::log(m.nodes[i].norm()) / std::log(2.0))));
  CHECK(err < 0.01);
}

TEST_CASE("traces on mesh and Cauchy files") {
  const TriMesh m = fx::annulus(0.08);
  const CauchyData d = synthesize_cauchy(m, Eigen::VectorXd::Ones(m.num_nodes()), 1.0, 0.02, 7);
  const SigmaTraces tr = traces_on_mesh(d, m);
  const auto loop = boundary_loop(m, BoundaryLabel::sigma);
  for (std::size_t k = 0; k < loop.size(); ++k) {
    CHECK(tr.g[loop[k]] == doctest::Approx(d.g[static_cast<Eigen::Index>(k)]).epsilon(1e-12));
    CHECK(tr.f[loop[k]] == doctest::Approx(d.f[static_cast<Eigen::Index>(k)]).epsilon(1e-12));
  }
  const auto sigma = boundary_node_mask(m, BoundaryLabel::sigma);
  for (int i = 0; i < m.num_nodes(); ++i)
    if (!sigma[i]) CHECK(tr.g[i] == 0.0);

  std::ostringstream a;
  write_cauchy(a, d);
  std::istringstream in(a.str());
  const CauchyData back = read_cauchy(in);
  std::ostringstream b;
  write_cauchy(b, back);
  CHECK(a.str() == b.str());
  CHECK(back.g == d.g);

  std::istringstream bad("0 1 2\n");
  CHECK_THROWS(read_cauchy(bad));
}

TEST_CASE("ADMM state transfer keeps constants") {
  const TriMesh a = fx::annulus(0.1), b = fx::annulus(0.07, 0.45);
  AdmmState s{Eigen::VectorXd::Constant(a.num_nodes(), 0.25), Eigen::VectorXd::Constant(a.num_nodes(), -2.0), 0.5, 0.0, 1.0};
  const AdmmState t = transfer_admm_state(s, a, b);
  CHECK(t.v.size() == b.num_nodes());
  CHECK(fx::max_abs(t.v.array() - 0.25) < 1e-12);
  CHECK(fx::max_abs(t.lambda.array() + 2.0) < 1e-12);
  CHECK(t.gamma == 0.5);
  CHECK(t.b == 1.0);
}
