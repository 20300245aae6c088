#include "fixtures.hpp"

#include <doctest.h>

#include <sstream>

using namespace ccbm;

namespace {

/// A configuration away from optimality: data of the r = 0.5 cavity on an
/// annulus with an offset r = 0.4 hole.
struct Setup {
  TriMesh m;
  SigmaTraces tr;
  RobinConfig cfg;
  AdmmState st;
};

Setup make_setup(double h = 0.05) {
  Setup s;
  s.m = fx::annulus(h, 0.4, Vec2(0.03, -0.02));
  s.tr = fx::radial_traces(s.m);
  s.cfg = RobinConfig{1.0, 1.0};
  CcbmSystem sys(s.m, s.tr, s.cfg);
  const ComplexNodalField u = sys.solve_state();
  s.st.gamma = 1.0;
  s.st.v = u.real();
  s.st.lambda = Eigen::VectorXd::Zero(s.m.num_nodes());
  for (int i = 0; i < s.m.num_nodes(); ++i) {
    const Vec2& x = s.m.nodes[i];
    s.st.v[i] += 0.2 * std::sin(3 * x.x()) + 0.1;
    s.st.lambda[i] = 0.3 * std::cos(2 * x.y()) + 0.1;
  }
  return s;
}

BoundaryScalarField gradient(const Setup& s, GradientKind k, const AdmmState* st) {
  CcbmSystem sys(s.m, s.tr, s.cfg);
  const ComplexNodalField u = sys.solve_state();
  const GammaGeometry geo(s.m);
  return shape_gradient(k, s.m, geo, u, compute_adjoints(sys, k, u, st), st, s.cfg.alpha);
}

double gamma_l2(const TriMesh& m, const GammaGeometry& geo, const BoundaryScalarField& G) {
  double s = 0;
  for (const auto& e : m.boundary_edges) {
    if (e.label != BoundaryLabel::gamma) continue;
    const double L = (m.nodes[e.nodes[0]] - m.nodes[e.nodes[1]]).norm();
    const double a = G[geo.position[e.nodes[0]]], b = G[geo.position[e.nodes[1]]];
    s += L / 3 * (a * a + a * b + b * b);
  }
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("gradient kind names") {
  for (GradientKind k : {GradientKind::g1, GradientKind::g2, GradientKind::gq, GradientKind::gw, GradientKind::glambda1,
                         GradientKind::glambda2, GradientKind::gsharp1, GradientKind::gsharp2})
    CHECK(parse_gradient_kind(to_string(k)) == k);
  CHECK(parse_gradient_kind("glambda1") == GradientKind::glambda1);
  CHECK_THROWS_AS(parse_gradient_kind("G3"), std::invalid_argument);
  CHECK_FALSE(is_admm_kind(GradientKind::g2));
  CHECK(is_admm_kind(GradientKind::gsharp1));
  CHECK(required_adjoints(GradientKind::glambda2).size() == 3);
}

TEST_CASE("gamma geometry on a circle and at corners") {
  const TriMesh m = fx::annulus(0.05);
  const GammaGeometry geo(m);
  CHECK(geo.loop.size() == boundary_loop(m, BoundaryLabel::gamma).size());
  for (std::size_t k = 0; k < geo.loop.size(); ++k) {
    CHECK(geo.position[geo.loop[k]] == static_cast<int>(k));
    CHECK(geo.kappa[static_cast<Eigen::Index>(k)] == doctest::Approx(-2.0).epsilon(0.05));
  }

  ShapeSpec sq;
  sq.kind = ShapeKind::square;
  sq.side = 0.6;
  sq.samples = 48;
  const double h = 0.05;
  const TriMesh ms = triangulate_annulus(fx::circle(1.0, h), sample_curve(sq), h);
  const GammaGeometry gs(ms, h);
  CHECK(gs.kappa.cwiseAbs().maxCoeff() <= 1.0 / h + 1e-12);
  CHECK(gs.kappa.cwiseAbs().maxCoeff() == doctest::Approx(1.0 / h));
}

TEST_CASE("psi_gamma and psi_dagger identities") {
  const Setup s = make_setup(0.08);
  CcbmSystem sys(s.m, s.tr, s.cfg);
  const ComplexNodalField u = sys.solve_state();
  const ComplexNodalField psi = sys.solve_adjoint(AdjointKind::q, u, &s.st);
  const GammaGeometry geo(s.m);
  const ComplexNodalField zero = ComplexNodalField::Zero(s.m.num_nodes());

  CHECK(fx::max_abs(psi_gamma(s.m, geo, u, zero, 1.0)) == 0.0);
  CHECK(fx::max_abs(psi_gamma(s.m, geo, psi, psi, 1.0)) < 1e-14);
  const ComplexNodalField ur = u.real().cast<Complex>(), pr = psi.real().cast<Complex>();
  CHECK(fx::max_abs(psi_gamma(s.m, geo, ur, pr, 1.0)) == 0.0);
  CHECK(fx::max_abs(psi_gamma(s.m, geo, u, psi, 1.0) + psi_gamma(s.m, geo, psi, u, 1.0)) < 1e-13);

  CHECK(fx::max_abs(psi_dagger(s.m, geo, u, zero, 1.0)) == 0.0);
  CHECK(fx::max_abs(psi_dagger(s.m, geo, u, psi, 1.0) - psi_dagger(s.m, geo, psi, u, 1.0)) < 1e-14);

  const TriMesh c = fx::annulus(0.05);
  const GammaGeometry gc(c);
  const ComplexNodalField one = ComplexNodalField::Ones(c.num_nodes());
  const BoundaryScalarField d = psi_dagger(c, gc, one, one, 1.0);
  for (Eigen::Index k = 0; k < d.size(); ++k) CHECK(d[k] == doctest::Approx(-(1.0 - gc.kappa[k])).epsilon(1e-12));
}

TEST_CASE("gradient representations: algebraic identities") {
  const Setup s = make_setup();
  const auto g1 = gradient(s, GradientKind::g1, nullptr);
  const auto g2 = gradient(s, GradientKind::g2, nullptr);
  const auto gl1 = gradient(s, GradientKind::glambda1, &s.st);
  const auto gl2 = gradient(s, GradientKind::glambda2, &s.st);
  const double scale = std::max({fx::max_abs(g1), fx::max_abs(g2), fx::max_abs(gl1)});
  CHECK(fx::max_abs(gl2 - (g2 + gl1 - g1)) <= 1e-12 * scale);

  // v = u1, lambda = 0: the penalty vanishes and GQ, GW fall back to G2, G1.
  CcbmSystem sys(s.m, s.tr, s.cfg);
  AdmmState tied{sys.solve_state().real(), Eigen::VectorXd::Zero(s.m.num_nodes()), 1.0};
  const double tol = 1e-9 * std::max(fx::max_abs(g1), fx::max_abs(g2));
  CHECK(fx::max_abs(gradient(s, GradientKind::gq, &tied) - g2) < tol);
  CHECK(fx::max_abs(gradient(s, GradientKind::gw, &tied) - g1) < tol);
  CHECK(fx::max_abs(gradient(s, GradientKind::glambda1, &tied) - g1) < tol);
}

TEST_CASE("gradient representations agree on the directional derivative") {
  const Setup s = make_setup();
  const GammaGeometry geo(s.m);
  const NodalVectorField theta = certification_field(s.m);
  const double d1 = directional_derivative(s.m, geo, gradient(s, GradientKind::g1, nullptr), theta);
  const double d2 = directional_derivative(s.m, geo, gradient(s, GradientKind::g2, nullptr), theta);
  CHECK(d1 == doctest::Approx(d2).epsilon(1e-3));

  std::vector<double> y;
  for (GradientKind k : {GradientKind::gq, GradientKind::gw, GradientKind::glambda1, GradientKind::glambda2})
    y.push_back(directional_derivative(s.m, geo, gradient(s, k, &s.st), theta));
  for (double a : y)
    for (double b : y) CHECK(a == doctest::Approx(b).epsilon(0.02));
}

TEST_CASE("directional derivative examples") {
  const TriMesh m = fx::annulus(0.04);
  const GammaGeometry geo(m);
  const BoundaryScalarField one = BoundaryScalarField::Ones(static_cast<Eigen::Index>(geo.loop.size()));
  NodalVectorField zero = NodalVectorField::Zero(m.num_nodes(), 2);
  CHECK(directional_derivative(m, geo, one, zero) == 0.0);

  NodalVectorField n = zero, t = zero;
  for (int v : geo.loop) {
    const Vec2 r = m.nodes[v] / m.nodes[v].norm();
    n.row(v) << -r.x(), -r.y();
    t.row(v) << -r.y(), r.x();
  }
  CHECK(directional_derivative(m, geo, one, n) == doctest::Approx(std::numbers::pi).epsilon(1e-3));
  CHECK(std::abs(directional_derivative(m, geo, one, t)) < 1e-12);
  CHECK_THROWS_AS(directional_derivative(m, geo, one, NodalVectorField::Zero(3, 2)), std::invalid_argument);
}

TEST_CASE("optimality: gradient vanishes at the exact domain under refinement") {
  double prev = 0;
  for (double h : {0.08, 0.04}) {
    const TriMesh m = fx::annulus(h);
    CcbmSystem sys(m, fx::radial_traces(m), RobinConfig{});
    const ComplexNodalField u = sys.solve_state();
    const GammaGeometry geo(m);
    const double g = gamma_l2(m, geo, shape_gradient(GradientKind::g1, m, geo, u, compute_adjoints(sys, GradientKind::g1, u, nullptr), nullptr, 1.0));
    if (prev > 0) CHECK(prev / g >= 3.0);
    prev = g;
  }
  // Far from the exact domain the gradient is much larger.
  const Setup s = make_setup(0.04);
  CHECK(gamma_l2(s.m, GammaGeometry(s.m), gradient(s, GradientKind::g1, nullptr)) > 100 * prev);
}

TEST_CASE("finite-difference certification on a coarse mesh") {
  const Setup s = make_setup(0.05);
  const NodalVectorField theta = certification_field(s.m);
  const auto sigma = boundary_node_mask(s.m, BoundaryLabel::sigma);
  for (int i = 0; i < s.m.num_nodes(); ++i)
    if (sigma[i]) CHECK(theta.row(i).norm() == 0.0);

  const auto rows = fd_certify(Functional::J, s.m, s.tr, s.cfg, nullptr, theta, {0.004, 0.002, 0.001},
                               {GradientKind::g1, GradientKind::g2});
  REQUIRE(rows.size() == 6);
  for (const auto& r : rows) {
    CHECK_FALSE(r.skipped);
    CHECK(r.relative_error < 0.1);
  }
  CHECK(rows[4].relative_error < rows[0].relative_error);

  const auto zero = fd_certify(Functional::J, s.m, s.tr, s.cfg, nullptr, NodalVectorField::Zero(s.m.num_nodes(), 2),
                               {0.01}, {GradientKind::g1});
  CHECK(zero[0].fd_value == 0.0);
  CHECK(zero[0].analytic_value == 0.0);
  CHECK(zero[0].relative_error == 0.0);

  NodalVectorField bad = theta;
  for (int i = 0; i < s.m.num_nodes(); ++i)
    if (sigma[i]) bad.row(i) << 1.0, 0.0;
  CHECK_THROWS_AS(fd_certify(Functional::J, s.m, s.tr, s.cfg, nullptr, bad, {0.01}, {GradientKind::g1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(fd_certify(Functional::Y, s.m, s.tr, s.cfg, nullptr, theta, {0.01}, {GradientKind::gq}),
                  std::invalid_argument);

  std::ostringstream os;
  write_fd_report(os, rows);
  CHECK(os.str().rfind("kind,t,fd_value,analytic_value,relative_error\nG1,0.004,", 0) == 0);
}

TEST_CASE("gradient dump format") {
  const TriMesh m = fx::annulus(0.2);
  const GammaGeometry geo(m);
  const BoundaryScalarField G = BoundaryScalarField::Constant(static_cast<Eigen::Index>(geo.loop.size()), 0.5);
  std::ostringstream os;
  write_gradient(os, m, geo, G);
  std::istringstream in(os.str());
  double x, y, g;
  int lines = 0;
  while (in >> x >> y >> g) {
    CHECK(g == 0.5);
    CHECK(std::hypot(x, y) == doctest::Approx(0.5));
    ++lines;
  }
  CHECK(lines == static_cast<int>(geo.loop.size()));
}
