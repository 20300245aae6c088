#include "ccbm/mesh.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace ccbm;

namespace {

Polyline circle(double r, int n, Vec2 c = Vec2::Zero()) {
  ShapeSpec s;
  s.kind = ShapeKind::circle;
  s.radius = r;
  s.samples = n;
  s.center = c;
  s.clearance.reset();
  return sample_curve(s);
}

double min_angle_deg(const TriMesh& m) {
  double best = 180;
  for (const auto& t : m.triangles)
    for (int i = 0; i < 3; ++i) {
      Vec2 a = m.nodes[t[i]], b = m.nodes[t[(i + 1) % 3]], c = m.nodes[t[(i + 2) % 3]];
      double ang = std::acos(std::clamp((b - a).normalized().dot((c - a).normalized()), -1.0, 1.0));
      best = std::min(best, ang * 180 / std::numbers::pi);
    }
  return best;
}

}  // namespace

TEST_CASE("annulus triangulation is valid, conforming and well shaped") {
  Polyline outer = circle(1.0, 128), inner = circle(0.5, 64);
  TriMesh m = triangulate_annulus(outer, inner, 0.05);
  CHECK_NOTHROW(validate(m));
  CHECK(euler_characteristic(m) == 0);
  CHECK(min_angle_deg(m) >= 20.0);
  CHECK(min_quality(m) > 0);
  CHECK(min_quality(m) <= 1);
  double area = 0;
  for (const auto& t : m.triangles) area += triangle_signed_area(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]);
  CHECK(area == doctest::Approx(std::abs(signed_area(outer)) - std::abs(signed_area(inner))).epsilon(1e-12));

  auto mask_s = boundary_node_mask(m, BoundaryLabel::sigma);
  auto mask_g = boundary_node_mask(m, BoundaryLabel::gamma);
  for (int i = 0; i < m.num_nodes(); ++i) {
    if (mask_s[i]) CHECK(closest_point(outer, m.nodes[i]).distance < 1e-10);
    if (mask_g[i]) CHECK(closest_point(inner, m.nodes[i]).distance < 1e-10);
  }
  // Every input vertex is kept.
  for (const auto& v : inner.vertices) {
    bool found = false;
    for (const auto& p : m.nodes) found = found || (p - v).norm() == 0.0;
    CHECK(found);
  }

  TriMesh fine = triangulate_annulus(outer, inner, 0.025);
  CHECK(fine.num_triangles() >= 3.5 * m.num_triangles());
  CHECK(min_angle_deg(fine) >= 20.0);
}

TEST_CASE("mean edge length tracks h") {
  TriMesh m = triangulate_annulus(circle(1.0, 64), circle(0.4, 32), 0.05);
  double total = 0;
  int count = 0;
  for (const auto& t : m.triangles)
    for (int i = 0; i < 3; ++i) {
      total += (m.nodes[t[i]] - m.nodes[t[(i + 1) % 3]]).norm();
      ++count;
    }
  double mean = total / count;
  CHECK(mean > 0.6 * 0.05);
  CHECK(mean < 1.3 * 0.05);
}

TEST_CASE("non-convex and cornered cavities mesh") {
  for (auto kind : {ShapeKind::kite, ShapeKind::lblock, ShapeKind::square, ShapeKind::multiconcave, ShapeKind::ellipse}) {
    ShapeSpec s;
    s.kind = kind;
    s.samples = 96;
    TriMesh m = triangulate_annulus(circle(1.0, 200), sample_curve(s), 0.04);
    CHECK_NOTHROW(validate(m));
    CHECK(euler_characteristic(m) == 0);
    // Input corner angles of the boundary may be smaller than the refinement bound.
    CHECK(min_quality(m) > 0.1);
  }
}

TEST_CASE("boundary loops are counterclockwise around their enclosed region") {
  TriMesh m = triangulate_annulus(circle(1.0, 64), circle(0.4, 32), 0.1);
  CHECK(signed_area(boundary_polyline(m, BoundaryLabel::sigma)) > 0);
  CHECK(signed_area(boundary_polyline(m, BoundaryLabel::gamma)) > 0);
  auto loop = boundary_loop(m, BoundaryLabel::gamma);
  int count = 0;
  for (const auto& e : m.boundary_edges) count += e.label == BoundaryLabel::gamma;
  CHECK(static_cast<int>(loop.size()) == count);
}

TEST_CASE("invalid inputs are rejected") {
  Polyline outer = circle(1.0, 64);
  CHECK_THROWS_AS(triangulate_annulus(outer, circle(1.0, 64, Vec2(0.2, 0)), 0.1), GeometryError);
  CHECK_THROWS_AS(triangulate_annulus(outer, circle(0.5, 32, Vec2(0.6, 0)), 0.1), GeometryError);
  CHECK_THROWS_AS(triangulate_annulus(outer, circle(0.5, 32), 0.0), GeometryError);
  Polyline bow;
  bow.vertices = {Vec2(0, 0), Vec2(0.3, 0.3), Vec2(0.3, 0), Vec2(0, 0.3)};
  CHECK_THROWS_AS(triangulate_annulus(outer, bow, 0.1), GeometryError);
}

TEST_CASE("deformation") {
  TriMesh m = triangulate_annulus(circle(1.0, 64), circle(0.5, 32), 0.1);
  NodalVectorField theta(m.num_nodes(), 2);
  for (int i = 0; i < m.num_nodes(); ++i) theta.row(i) << std::sin(3 * m.nodes[i].y()), std::cos(2 * m.nodes[i].x());

  auto same = deform(m, theta, 0.0);
  REQUIRE(same);
  for (int i = 0; i < m.num_nodes(); ++i) CHECK(same->nodes[i] == m.nodes[i]);

  NodalVectorField shift(m.num_nodes(), 2);
  shift.rowwise() = Eigen::RowVector2d(0.3, -0.2);
  auto moved = deform(m, shift, 0.7);
  REQUIRE(moved);
  for (int k = 0; k < m.num_triangles(); ++k) {
    const auto& t = m.triangles[k];
    CHECK(triangle_signed_area(moved->nodes[t[0]], moved->nodes[t[1]], moved->nodes[t[2]]) ==
          doctest::Approx(triangle_signed_area(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]])).epsilon(1e-10));
  }

  NodalVectorField shrink(m.num_nodes(), 2);
  for (int i = 0; i < m.num_nodes(); ++i) shrink.row(i) = -m.nodes[i].transpose();
  CHECK_FALSE(deform(m, shrink, 1.0));

  auto fwd = deform(m, theta, 0.01);
  REQUIRE(fwd);
  auto back = deform(*fwd, theta, -0.01);
  REQUIRE(back);
  for (int i = 0; i < m.num_nodes(); ++i) CHECK((back->nodes[i] - m.nodes[i]).norm() < 1e-14);
}

TEST_CASE("quality measure") {
  Vec2 a(0, 0), b(1, 0), c(0.5, std::sqrt(3.0) / 2);
  CHECK(triangle_quality(a, b, c) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(triangle_quality(a, c, b) == 0.0);
  TriMesh m = triangulate_annulus(circle(1.0, 64), circle(0.5, 32), 0.1);
  // Squash the layer next to gamma onto the cavity.
  NodalVectorField theta = NodalVectorField::Zero(m.num_nodes(), 2);
  auto gamma = boundary_node_mask(m, BoundaryLabel::gamma);
  auto sigma = boundary_node_mask(m, BoundaryLabel::sigma);
  for (int i = 0; i < m.num_nodes(); ++i)
    if (!gamma[i] && !sigma[i]) {
      double r = m.nodes[i].norm();
      // Monotone radial map r -> 0.5 + (r - 0.5)^4 / 0.15^3 on [0.5, 0.65].
      if (r < 0.65) theta.row(i) = (m.nodes[i] * (std::pow(r - 0.5, 4) / std::pow(0.15, 3) + 0.5 - r) / r).transpose();
    }
  auto squashed = deform(m, theta, 1.0);
  REQUIRE(squashed);
  CHECK(min_quality(*squashed) < 0.1);
  TriMesh fixed = remesh(*squashed, 0.1);
  CHECK(min_quality(fixed) >= 0.3);
}

TEST_CASE("remesh") {
  Polyline outer = circle(1.0, 64), inner = circle(0.5, 32);
  TriMesh m = triangulate_annulus(outer, inner, 0.1);
  TriMesh r = remesh(m, 0.1);
  auto g0 = boundary_polyline(m, BoundaryLabel::gamma), g1 = boundary_polyline(r, BoundaryLabel::gamma);
  REQUIRE(g0.size() == g1.size());
  // Same loop up to a cyclic shift.
  std::size_t shift = 0;
  while (shift < g1.size() && g1[shift] != g0[0]) ++shift;
  REQUIRE(shift < g1.size());
  for (std::size_t i = 0; i < g0.size(); ++i) CHECK(g1[(i + shift) % g1.size()] == g0[i]);
  CHECK(euler_characteristic(r) == 0);

  TriMesh inv = m;
  std::swap(inv.triangles[0][1], inv.triangles[0][2]);
  CHECK_THROWS_AS(remesh(inv, 0.1), GeometryError);
}

TEST_CASE("field transfer") {
  TriMesh coarse = triangulate_annulus(circle(1.0, 64), circle(0.5, 32), 0.1);
  TriMesh fine = triangulate_annulus(circle(1.0, 64), circle(0.5, 32), 0.05);
  Eigen::VectorXd f(coarse.num_nodes());
  for (int i = 0; i < coarse.num_nodes(); ++i) f[i] = std::sin(7 * coarse.nodes[i].x()) + coarse.nodes[i].y();
  CHECK(transfer_field(coarse, f, coarse) == f);

  Eigen::VectorXd c = Eigen::VectorXd::Constant(coarse.num_nodes(), 2.5);
  Eigen::VectorXd tc = transfer_field(coarse, c, fine);
  CHECK((tc.array() - 2.5).abs().maxCoeff() < 1e-12);

  Eigen::VectorXd x(coarse.num_nodes());
  for (int i = 0; i < coarse.num_nodes(); ++i) x[i] = coarse.nodes[i].x();
  Eigen::VectorXd tx = transfer_field(coarse, x, fine);
  auto sigma = boundary_node_mask(fine, BoundaryLabel::sigma);
  auto gamma = boundary_node_mask(fine, BoundaryLabel::gamma);
  for (int i = 0; i < fine.num_nodes(); ++i) {
    // Nodes on the shared polylines and inside the coarse mesh reproduce the linear field.
    if (PointLocator(coarse).locate(fine.nodes[i]) || sigma[i] || gamma[i])
      CHECK(std::abs(tx[i] - fine.nodes[i].x()) < 1e-12);
  }

  // A point outside the source takes the nearest boundary value.
  TriMesh shifted = coarse;
  for (auto& p : shifted.nodes) p *= 1.01;
  Eigen::VectorXd te = transfer_field(coarse, x, shifted);
  CHECK(std::isfinite(te.maxCoeff()));
  CHECK(te.maxCoeff() <= x.maxCoeff() + 1e-12);
}

TEST_CASE("mesh text round trip is byte identical") {
  TriMesh m = triangulate_annulus(circle(1.0, 32), circle(0.4, 16), 0.2);
  std::ostringstream a;
  write_mesh(a, m);
  std::istringstream in(a.str());
  TriMesh r = read_mesh(in);
  CHECK_NOTHROW(validate(r));
  std::ostringstream b;
  write_mesh(b, r);
  CHECK(a.str() == b.str());
  std::istringstream bad("3 1 0\n0 0\n1 0\n");
  CHECK_THROWS_AS(read_mesh(bad), GeometryError);
}
