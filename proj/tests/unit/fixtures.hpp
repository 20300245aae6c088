#pragma once

#include "ccbm/admm.hpp"

#include <cmath>
#include <numbers>

namespace fx {

using namespace ccbm;

inline Polyline circle(double r, double h, Vec2 c = Vec2::Zero(), double phase = 0.0) {
  ShapeSpec s;
  s.kind = ShapeKind::circle;
  s.radius = r;
  s.center = c;
  s.clearance.reset();
  s.samples = samples_for_spacing(2 * std::numbers::pi * r, h);
  s.phase = phase;
  return sample_curve(s);
}

inline TriMesh annulus(double h, double r0 = 0.5, Vec2 c = Vec2::Zero()) {
  return triangulate_annulus(circle(1.0, h), circle(r0, h, c), h);
}

/// u = 1 + B ln r solves the annulus problem with u = 1 on r = 1 and the
/// Robin condition at r0 (normal pointing to the origin).
inline double radial_B(double alpha = 1.0, double r0 = 0.5) { return alpha / (1.0 / r0 - alpha * std::log(r0)); }

inline double radial_u(const Vec2& x, double alpha = 1.0, double r0 = 0.5) {
  return 1.0 + radial_B(alpha, r0) * std::log(x.norm());
}

inline SigmaTraces radial_traces(const TriMesh& m, double alpha = 1.0, double r0 = 0.5) {
  SigmaTraces t{Eigen::VectorXd::Zero(m.num_nodes()), Eigen::VectorXd::Zero(m.num_nodes())};
  const auto sigma = boundary_node_mask(m, BoundaryLabel::sigma);
  for (int i = 0; i < m.num_nodes(); ++i)
    if (sigma[i]) {
      t.f[i] = 1.0;
      t.g[i] = radial_B(alpha, r0);
    }
  return t;
}

inline CauchyData radial_cauchy(const TriMesh& m, double alpha = 1.0, double r0 = 0.5) {
  CauchyData d;
  const auto loop = boundary_loop(m, BoundaryLabel::sigma);
  d.f.resize(static_cast<Eigen::Index>(loop.size()));
  d.g.resize(d.f.size());
  for (std::size_t k = 0; k < loop.size(); ++k) {
    d.points.push_back(m.nodes[loop[k]]);
    d.f[static_cast<Eigen::Index>(k)] = 1.0;
    d.g[static_cast<Eigen::Index>(k)] = radial_B(alpha, r0);
  }
  return d;
}

inline double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace fx
