#include "ccbm/geometry.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>

namespace ccbm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Samples a closed piecewise-linear path through `corners`, keeping every
// corner as a vertex. Edge counts are proportional to edge length.
Polyline sample_corners(const std::vector<Vec2>& corners, int total) {
  double per = 0.0;
  for (std::size_t i = 0; i < corners.size(); ++i)
    per += (corners[(i + 1) % corners.size()] - corners[i]).norm();
  Polyline out;
  for (std::size_t i = 0; i < corners.size(); ++i) {
    const Vec2& a = corners[i];
    const Vec2& b = corners[(i + 1) % corners.size()];
    int n = std::max(1, static_cast<int>(std::lround(total * (b - a).norm() / per)));
    for (int k = 0; k < n; ++k) out.vertices.push_back(a + (b - a) * (static_cast<double>(k) / n));
  }
  return out;
}

template <class F>
Polyline sample_parametric(int n, double phase, F&& f) {
  Polyline out;
  out.vertices.reserve(n);
  for (int k = 0; k < n; ++k) out.vertices.push_back(f(kTwoPi * (k + phase) / n));
  return out;
}

}  // namespace

ShapeKind parse_shape_kind(const std::string& name) {
  if (name == "circle") return ShapeKind::circle;
  if (name == "ellipse") return ShapeKind::ellipse;
  if (name == "kite") return ShapeKind::kite;
  if (name == "square") return ShapeKind::square;
  if (name == "lblock") return ShapeKind::lblock;
  if (name == "multiconcave") return ShapeKind::multiconcave;
  if (name == "polyline-file" || name == "file") return ShapeKind::polyline_file;
  throw std::invalid_argument("unknown shape kind '" + name + "'");
}

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::circle: return "circle";
    case ShapeKind::ellipse: return "ellipse";
    case ShapeKind::kite: return "kite";
    case ShapeKind::square: return "square";
    case ShapeKind::lblock: return "lblock";
    case ShapeKind::multiconcave: return "multiconcave";
    case ShapeKind::polyline_file: return "polyline-file";
  }
  return "?";
}

int samples_for_spacing(double per, double h) {
  return std::max(8, static_cast<int>(std::ceil(per / h)));
}

Polyline sample_curve(const ShapeSpec& spec) {
  if (spec.kind != ShapeKind::polyline_file && spec.samples < 8)
    throw GeometryError("shape needs at least 8 samples");
  const Vec2 c = spec.center;
  const int n = spec.samples;
  Polyline out;
  switch (spec.kind) {
    case ShapeKind::circle:
      if (spec.radius <= 0) throw GeometryError("circle radius must be positive");
      out = sample_parametric(n, spec.phase, [&](double t) { return Vec2(c + spec.radius * Vec2(std::cos(t), std::sin(t))); });
      break;
    case ShapeKind::ellipse:
      if (spec.radius_x <= 0 || spec.radius_y <= 0) throw GeometryError("ellipse semi-axes must be positive");
      out = sample_parametric(n, spec.phase, [&](double t) {
        return Vec2(c + Vec2(spec.radius_x * std::cos(t), spec.radius_y * std::sin(t)));
      });
      break;
    case ShapeKind::kite:
      if (spec.scale <= 0) throw GeometryError("kite scale must be positive");
      out = sample_parametric(n, spec.phase, [&](double t) {
        return Vec2(c + spec.scale * Vec2(0.3 * std::cos(t) + 0.15 * std::cos(2 * t) - 0.15, 0.35 * std::sin(t)));
      });
      break;
    case ShapeKind::multiconcave:
      if (spec.scale <= 0) throw GeometryError("multiconcave scale must be positive");
      out = sample_parametric(n, spec.phase, [&](double t) {
        double r = spec.scale * (0.3 + 0.09 * std::cos(3 * t));
        return Vec2(c + r * Vec2(std::cos(t), std::sin(t)));
      });
      break;
    case ShapeKind::square: {
      if (spec.side <= 0) throw GeometryError("square side must be positive");
      double s = spec.side / 2;
      out = sample_corners({c + Vec2(-s, -s), c + Vec2(s, -s), c + Vec2(s, s), c + Vec2(-s, s)}, n);
      break;
    }
    case ShapeKind::lblock: {
      if (spec.side <= 0) throw GeometryError("L-block side must be positive");
      double s = spec.side / 2;
      // Square with its upper-right quadrant removed.
      out = sample_corners({c + Vec2(-s, -s), c + Vec2(s, -s), c + Vec2(s, 0), c + Vec2(0, 0), c + Vec2(0, s),
                            c + Vec2(-s, s)},
                           n);
      break;
    }
    case ShapeKind::polyline_file:
      out = load_polyline(spec.file);
      if (signed_area(out) < 0) out = reversed(out);
      break;
  }
  if (out.size() < 8) throw GeometryError("closed polyline needs at least 8 vertices");
  for (std::size_t i = 0; i < out.size(); ++i)
    if ((out[(i + 1) % out.size()] - out[i]).norm() <= 1e-12) throw GeometryError("repeated consecutive vertex");
  if (spec.clearance) {
    const double limit = 1.0 - *spec.clearance;
    for (const auto& v : out.vertices)
      if (v.norm() > limit)
        throw GeometryError(fmt::format("shape vertex ({}, {}) violates clearance {} from the unit circle", v.x(),
                                        v.y(), *spec.clearance));
  }
  return out;
}

double perimeter(const Polyline& p) {
  double per = 0;
  for (std::size_t i = 0; i < p.size(); ++i) per += (p[(i + 1) % p.size()] - p[i]).norm();
  return per;
}

double signed_area(const Polyline& p) {
  double a = 0;
  for (std::size_t i = 0; i < p.size(); ++i) a += cross(p[i], p[(i + 1) % p.size()]);
  return 0.5 * a;
}

Polyline reversed(const Polyline& p) {
  Polyline r = p;
  std::reverse(r.vertices.begin(), r.vertices.end());
  return r;
}

std::vector<Vec2> discrete_normals(const Polyline& p, BoundarySide side) {
  const std::size_t n = p.size();
  const double sign = side == BoundarySide::outer ? 1.0 : -1.0;
  std::vector<Vec2> normals(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 tin = (p[i] - p[(i + n - 1) % n]).normalized();
    Vec2 tout = (p[(i + 1) % n] - p[i]).normalized();
    // Right-hand normals of the edges point away from the region on the left.
    Vec2 sum = Vec2(tin.y(), -tin.x()) + Vec2(tout.y(), -tout.x());
    double len = sum.norm();
    if (len < 1e-8) throw GeometryError(fmt::format("degenerate vertex angle at vertex {}", i));
    normals[i] = sign * sum / len;
  }
  return normals;
}

std::vector<double> discrete_curvature(const Polyline& p, BoundarySide side) {
  const std::size_t n = p.size();
  const double sign = side == BoundarySide::outer ? 1.0 : -1.0;
  std::vector<double> kappa(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 ein = p[i] - p[(i + n - 1) % n];
    Vec2 eout = p[(i + 1) % n] - p[i];
    double turning = std::atan2(cross(ein, eout), ein.dot(eout));
    kappa[i] = sign * turning / (0.5 * (ein.norm() + eout.norm()));
  }
  return kappa;
}

double point_segment_distance(const Vec2& x, const Vec2& a, const Vec2& b) {
  Vec2 d = b - a;
  double len2 = d.squaredNorm();
  double s = len2 > 0 ? std::clamp((x - a).dot(d) / len2, 0.0, 1.0) : 0.0;
  return (x - (a + s * d)).norm();
}

ClosestPoint closest_point(const Polyline& p, const Vec2& x) {
  ClosestPoint best{p[0], 0, 0.0, std::numeric_limits<double>::infinity()};
  const std::size_t n = p.size();
  const std::size_t edges = p.closed ? n : n - 1;
  for (std::size_t i = 0; i < edges; ++i) {
    const Vec2& a = p[i];
    Vec2 d = p[(i + 1) % n] - a;
    double len2 = d.squaredNorm();
    double s = len2 > 0 ? std::clamp((x - a).dot(d) / len2, 0.0, 1.0) : 0.0;
    Vec2 q = a + s * d;
    double dist = (x - q).norm();
    if (dist < best.distance) best = {q, i, s, dist};
  }
  return best;
}

namespace {
double directed_hausdorff(const Polyline& a, const Polyline& b) {
  double worst = 0;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    worst = std::max(worst, closest_point(b, a[i]).distance);
    worst = std::max(worst, closest_point(b, 0.5 * (a[i] + a[(i + 1) % n])).distance);
  }
  return worst;
}
}  // namespace

double hausdorff_distance(const Polyline& a, const Polyline& b) {
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

bool point_in_polygon(const Polyline& p, const Vec2& x) {
  bool inside = false;
  const std::size_t n = p.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = p[i];
    const Vec2& b = p[j];
    if ((a.y() > x.y()) != (b.y() > x.y()) && x.x() < (b.x() - a.x()) * (x.y() - a.y()) / (b.y() - a.y()) + a.x())
      inside = !inside;
  }
  return inside;
}

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) { return cross(q - p, r - p); };
  double d1 = orient(c, d, a), d2 = orient(c, d, b), d3 = orient(a, b, c), d4 = orient(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  auto on_segment = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    return std::min(p.x(), q.x()) <= r.x() && r.x() <= std::max(p.x(), q.x()) && std::min(p.y(), q.y()) <= r.y() &&
           r.y() <= std::max(p.y(), q.y());
  };
  if (d1 == 0 && on_segment(c, d, a)) return true;
  if (d2 == 0 && on_segment(c, d, b)) return true;
  if (d3 == 0 && on_segment(a, b, c)) return true;
  if (d4 == 0 && on_segment(a, b, d)) return true;
  return false;
}

bool is_simple(const Polyline& p) {
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // adjacent through closure
      if (segments_intersect(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n])) return false;
    }
  }
  return true;
}

void write_polyline(std::ostream& os, const Polyline& p) {
  os << p.size() << '\n';
  for (const auto& v : p.vertices) os << fmt::format("{} {}\n", v.x(), v.y());
}

Polyline read_polyline(std::istream& is) {
  std::size_t n = 0;
  if (!(is >> n)) throw GeometryError("polyline: missing vertex count");
  Polyline p;
  p.vertices.resize(n);
  for (auto& v : p.vertices)
    if (!(is >> v.x() >> v.y())) throw GeometryError("polyline: truncated vertex list");
  return p;
}

void save_polyline(const std::string& path, const Polyline& p) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_polyline(os, p);
}

Polyline load_polyline(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw GeometryError("cannot read polyline file " + path);
  return read_polyline(is);
}

}  // namespace ccbm
