#include "ccbm/mesh.hpp"

#include "triangulation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <set>

namespace ccbm {

double triangle_signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
}

double triangle_quality(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double area = triangle_signed_area(a, b, c);
  if (area <= 0) return 0.0;
  const double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
  // 2 r / R with r = 2A/P and R = abc/(4A).
  return 16.0 * area * area / ((la + lb + lc) * la * lb * lc);
}

namespace {

TriMesh triangulate(const Polyline& outer_in, const Polyline& inner_in, double h, bool split_boundary) {
  if (!(h > 0)) throw GeometryError("mesh size must be positive");
  if (outer_in.size() < 3 || inner_in.size() < 3) throw GeometryError("boundary curves need at least 3 vertices");
  Polyline outer = signed_area(outer_in) > 0 ? outer_in : reversed(outer_in);
  Polyline inner = signed_area(inner_in) > 0 ? inner_in : reversed(inner_in);
  if (!is_simple(outer)) throw GeometryError("outer boundary self-intersects");
  if (!is_simple(inner)) throw GeometryError("inner boundary self-intersects");
  for (const auto& v : inner.vertices)
    if (!point_in_polygon(outer, v)) throw GeometryError("inner boundary is not inside the outer boundary");
  const std::size_t no = outer.size(), ni = inner.size();
  for (std::size_t i = 0; i < no; ++i)
    for (std::size_t j = 0; j < ni; ++j)
      if (segments_intersect(outer[i], outer[(i + 1) % no], inner[j], inner[(j + 1) % ni]))
        throw GeometryError("inner boundary touches the outer boundary");

  detail::Triangulator tri(outer, inner);
  detail::RefinementOptions opts;
  opts.max_circumradius = 0.62 * h;
  opts.min_angle_deg = 25.0;
  double area = signed_area(outer) - signed_area(inner);
  opts.max_insertions = static_cast<std::size_t>(50.0 * area / (h * h)) + 100000;
  opts.split_segments = split_boundary;
  tri.refine(opts);
  TriMesh m = tri.extract(h);
  validate(m);
  return m;
}

double min_angle(const TriMesh& m) {
  double best = std::numbers::pi;
  for (const auto& t : m.triangles)
    for (int i = 0; i < 3; ++i) {
      const Vec2 a = m.nodes[t[i]], b = m.nodes[t[(i + 1) % 3]], c = m.nodes[t[(i + 2) % 3]];
      const double cs = (b - a).normalized().dot((c - a).normalized());
      best = std::min(best, std::acos(std::clamp(cs, -1.0, 1.0)));
    }
  return best;
}

double max_segment(const Polyline& p) {
  double L = 0;
  for (std::size_t i = 0; i < p.size(); ++i) L = std::max(L, (p[(i + 1) % p.size()] - p[i]).norm());
  return L;
}

}  // namespace

TriMesh triangulate_annulus(const Polyline& outer, const Polyline& inner, double h) {
  // Curves already sampled at about h keep their vertices; otherwise segments are split.
  if (h > 0 && outer.size() >= 3 && inner.size() >= 3 && std::max(max_segment(outer), max_segment(inner)) <= 1.5 * h) {
    try {
      TriMesh m = triangulate(outer, inner, h, false);
      if (min_angle(m) >= 20.0 * std::numbers::pi / 180.0) return m;
    } catch (const GeometryError&) {
    }
  }
  return triangulate(outer, inner, h, true);
}

std::optional<TriMesh> deform(const TriMesh& m, const NodalVectorField& theta, double t) {
  if (theta.rows() != m.num_nodes()) throw std::invalid_argument("deform: field size does not match mesh");
  TriMesh out = m;
  if (t != 0.0)
    for (int i = 0; i < m.num_nodes(); ++i) out.nodes[i] += t * theta.row(i).transpose();
  for (const auto& tri : out.triangles)
    if (triangle_signed_area(out.nodes[tri[0]], out.nodes[tri[1]], out.nodes[tri[2]]) <= 0) return std::nullopt;
  for (const auto& e : out.boundary_edges)
    if (e.label == BoundaryLabel::gamma) {
      if (!is_simple(boundary_polyline(out, BoundaryLabel::gamma))) return std::nullopt;
      break;
    }
  return out;
}

double min_quality(const TriMesh& m) {
  double q = 1.0;
  for (const auto& t : m.triangles) q = std::min(q, triangle_quality(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]));
  return q;
}

std::vector<int> boundary_loop(const TriMesh& m, BoundaryLabel label) {
  std::map<int, int> next;
  for (const auto& e : m.boundary_edges)
    if (e.label == label) {
      if (!next.emplace(e.nodes[0], e.nodes[1]).second)
        throw GeometryError("boundary is not a simple loop");
    }
  if (next.empty()) throw GeometryError("mesh has no edges with the requested boundary label");
  std::vector<int> loop;
  const int start = next.begin()->first;
  int v = start;
  do {
    loop.push_back(v);
    auto it = next.find(v);
    if (it == next.end()) throw GeometryError("boundary loop is open");
    v = it->second;
  } while (v != start && loop.size() <= next.size());
  if (loop.size() != next.size()) throw GeometryError("boundary has more than one component");
  if (label == BoundaryLabel::gamma) std::reverse(loop.begin(), loop.end());
  return loop;
}

Polyline boundary_polyline(const TriMesh& m, BoundaryLabel label) {
  Polyline p;
  for (int v : boundary_loop(m, label)) p.vertices.push_back(m.nodes[v]);
  return p;
}

std::vector<bool> boundary_node_mask(const TriMesh& m, BoundaryLabel label) {
  std::vector<bool> mask(m.nodes.size(), false);
  for (const auto& e : m.boundary_edges)
    if (e.label == label) mask[e.nodes[0]] = mask[e.nodes[1]] = true;
  return mask;
}

void validate(const TriMesh& m) {
  const int n = m.num_nodes();
  std::map<std::pair<int, int>, int> directed;
  for (std::size_t k = 0; k < m.triangles.size(); ++k) {
    const auto& t = m.triangles[k];
    for (int v : t)
      if (v < 0 || v >= n) throw GeometryError(fmt::format("triangle {} has an invalid node index", k));
    if (triangle_signed_area(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]) <= 0)
      throw GeometryError(fmt::format("triangle {} is not counterclockwise", k));
    for (int i = 0; i < 3; ++i) {
      auto key = std::make_pair(t[i], t[(i + 1) % 3]);
      if (!directed.emplace(key, static_cast<int>(k)).second)
        throw GeometryError("an oriented edge is shared by two triangles");
    }
  }
  std::set<std::pair<int, int>> boundary;
  for (const auto& e : m.boundary_edges) {
    auto key = std::make_pair(e.nodes[0], e.nodes[1]);
    if (!directed.count(key)) throw GeometryError("boundary edge does not belong to a triangle with the domain on its left");
    if (directed.count({e.nodes[1], e.nodes[0]})) throw GeometryError("boundary edge is interior");
    if (!boundary.insert(key).second) throw GeometryError("duplicate boundary edge");
  }
  for (const auto& [key, tri] : directed) {
    if (!directed.count({key.second, key.first}) && !boundary.count(key))
      throw GeometryError("mesh has an unlabeled boundary edge");
  }
  auto sigma = boundary_node_mask(m, BoundaryLabel::sigma);
  auto gamma = boundary_node_mask(m, BoundaryLabel::gamma);
  for (int i = 0; i < n; ++i)
    if (sigma[i] && gamma[i]) throw GeometryError("sigma and gamma share a node");
}

int euler_characteristic(const TriMesh& m) {
  std::set<std::pair<int, int>> edges;
  for (const auto& t : m.triangles)
    for (int i = 0; i < 3; ++i) edges.insert(std::minmax(t[i], t[(i + 1) % 3]));
  return m.num_nodes() - static_cast<int>(edges.size()) + m.num_triangles();
}

TriMesh remesh(const TriMesh& m, double h) {
  for (const auto& t : m.triangles)
    if (triangle_signed_area(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]) <= 0)
      throw GeometryError("cannot remesh an inverted mesh");
  const Polyline sigma = boundary_polyline(m, BoundaryLabel::sigma), gamma = boundary_polyline(m, BoundaryLabel::gamma);
  TriMesh fresh = triangulate(sigma, gamma, h, false);
  if (min_quality(fresh) >= 0.3) return fresh;
  try {
    TriMesh split = triangulate(sigma, gamma, h, true);
    if (min_quality(split) > min_quality(fresh)) return split;
  } catch (const GeometryError&) {
  }
  return fresh;
}

PointLocator::PointLocator(const TriMesh& m) : mesh_(m) {
  lo_ = hi_ = m.nodes.empty() ? Vec2::Zero() : m.nodes[0];
  for (const auto& p : m.nodes) {
    lo_ = lo_.cwiseMin(p);
    hi_ = hi_.cwiseMax(p);
  }
  const double extent = std::max(hi_.x() - lo_.x(), hi_.y() - lo_.y());
  const int target = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(m.triangles.size()) / 2.0)));
  cell_ = std::max(extent / target, 1e-12);
  nx_ = static_cast<int>((hi_.x() - lo_.x()) / cell_) + 1;
  ny_ = static_cast<int>((hi_.y() - lo_.y()) / cell_) + 1;
  buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
  for (std::size_t k = 0; k < m.triangles.size(); ++k) {
    const auto& t = m.triangles[k];
    Vec2 a = m.nodes[t[0]].cwiseMin(m.nodes[t[1]]).cwiseMin(m.nodes[t[2]]);
    Vec2 b = m.nodes[t[0]].cwiseMax(m.nodes[t[1]]).cwiseMax(m.nodes[t[2]]);
    int i0 = static_cast<int>((a.x() - lo_.x()) / cell_), i1 = static_cast<int>((b.x() - lo_.x()) / cell_);
    int j0 = static_cast<int>((a.y() - lo_.y()) / cell_), j1 = static_cast<int>((b.y() - lo_.y()) / cell_);
    for (int i = i0; i <= std::min(i1, nx_ - 1); ++i)
      for (int j = j0; j <= std::min(j1, ny_ - 1); ++j) buckets_[static_cast<std::size_t>(j) * nx_ + i].push_back(static_cast<int>(k));
  }
}

std::optional<std::pair<int, Eigen::Vector3d>> PointLocator::locate(const Vec2& x) const {
  if (x.x() < lo_.x() || x.y() < lo_.y() || x.x() > hi_.x() || x.y() > hi_.y()) return std::nullopt;
  int i = std::min(static_cast<int>((x.x() - lo_.x()) / cell_), nx_ - 1);
  int j = std::min(static_cast<int>((x.y() - lo_.y()) / cell_), ny_ - 1);
  std::optional<std::pair<int, Eigen::Vector3d>> best;
  double best_min = -std::numeric_limits<double>::infinity();
  for (int k : buckets_[static_cast<std::size_t>(j) * nx_ + i]) {
    const auto& t = mesh_.triangles[k];
    const Vec2& a = mesh_.nodes[t[0]];
    const Vec2& b = mesh_.nodes[t[1]];
    const Vec2& c = mesh_.nodes[t[2]];
    const double area = triangle_signed_area(a, b, c);
    Eigen::Vector3d w(triangle_signed_area(x, b, c) / area, triangle_signed_area(a, x, c) / area,
                      triangle_signed_area(a, b, x) / area);
    const double wmin = w.minCoeff();
    if (wmin >= 0) return std::make_pair(static_cast<int>(k), w);
    if (wmin > -1e-12 && wmin > best_min) {
      best_min = wmin;
      best = std::make_pair(static_cast<int>(k), w);
    }
  }
  return best;
}

double PointLocator::interpolate(const Eigen::VectorXd& field, const Vec2& x) const {
  if (auto hit = locate(x)) {
    const auto& t = mesh_.triangles[hit->first];
    const auto& w = hit->second;
    return w[0] * field[t[0]] + w[1] * field[t[1]] + w[2] * field[t[2]];
  }
  double best = std::numeric_limits<double>::infinity();
  double value = 0.0;
  for (const auto& e : mesh_.boundary_edges) {
    const Vec2& a = mesh_.nodes[e.nodes[0]];
    const Vec2& b = mesh_.nodes[e.nodes[1]];
    Vec2 d = b - a;
    double s = std::clamp((x - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
    double dist = (x - (a + s * d)).norm();
    if (dist < best) {
      best = dist;
      value = (1 - s) * field[e.nodes[0]] + s * field[e.nodes[1]];
    }
  }
  return value;
}

Eigen::VectorXd transfer_field(const TriMesh& src, const Eigen::VectorXd& field, const TriMesh& dst) {
  if (field.size() != src.num_nodes()) throw std::invalid_argument("transfer_field: field size does not match mesh");
  PointLocator loc(src);
  Eigen::VectorXd out(dst.num_nodes());
  for (int i = 0; i < dst.num_nodes(); ++i) out[i] = loc.interpolate(field, dst.nodes[i]);
  return out;
}

void write_mesh(std::ostream& os, const TriMesh& m) {
  os << m.nodes.size() << ' ' << m.triangles.size() << ' ' << m.boundary_edges.size() << '\n';
  for (const auto& p : m.nodes) os << fmt::format("{} {}\n", p.x(), p.y());
  for (const auto& t : m.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (const auto& e : m.boundary_edges)
    os << e.nodes[0] << ' ' << e.nodes[1] << ' ' << static_cast<int>(e.label) << '\n';
}

TriMesh read_mesh(std::istream& is) {
  std::size_t nv = 0, nt = 0, nbe = 0;
  if (!(is >> nv >> nt >> nbe)) throw GeometryError("mesh: missing header");
  TriMesh m;
  m.nodes.resize(nv);
  for (auto& p : m.nodes)
    if (!(is >> p.x() >> p.y())) throw GeometryError("mesh: truncated node list");
  m.triangles.resize(nt);
  for (auto& t : m.triangles)
    if (!(is >> t[0] >> t[1] >> t[2])) throw GeometryError("mesh: truncated triangle list");
  m.boundary_edges.resize(nbe);
  for (auto& e : m.boundary_edges) {
    int label = 0;
    if (!(is >> e.nodes[0] >> e.nodes[1] >> label)) throw GeometryError("mesh: truncated boundary list");
    if (label != 1 && label != 2) throw GeometryError("mesh: boundary label must be 1 or 2");
    e.label = static_cast<BoundaryLabel>(label);
  }
  return m;
}

void save_mesh(const std::string& path, const TriMesh& m) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_mesh(os, m);
}

TriMesh load_mesh(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw GeometryError("cannot read mesh file " + path);
  TriMesh m = read_mesh(is);
  validate(m);
  return m;
}

}  // namespace ccbm
