#include "triangulation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

namespace ccbm::detail {

namespace {

constexpr int kExterior = 0;
constexpr int kDomain = 1;

double orient(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

// True when d lies strictly inside the circumcircle of the ccw triangle abc.
bool in_circle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  long double adx = a.x() - d.x(), ady = a.y() - d.y();
  long double bdx = b.x() - d.x(), bdy = b.y() - d.y();
  long double cdx = c.x() - d.x(), cdy = c.y() - d.y();
  long double alift = adx * adx + ady * ady;
  long double blift = bdx * bdx + bdy * bdy;
  long double clift = cdx * cdx + cdy * cdy;
  long double det = adx * (bdy * clift - cdy * blift) - ady * (bdx * clift - cdx * blift) +
                    alift * (bdx * cdy - bdy * cdx);
  return det > 0;
}

Vec2 circumcenter(const Vec2& a, const Vec2& b, const Vec2& c) {
  Vec2 ba = b - a, ca = c - a;
  double d = 2.0 * (ba.x() * ca.y() - ba.y() * ca.x());
  double bl = ba.squaredNorm(), cl = ca.squaredNorm();
  return a + Vec2((ca.y() * bl - ba.y() * cl) / d, (ba.x() * cl - ca.x() * bl) / d);
}

int nxt(int i) { return (i + 1) % 3; }
int prv(int i) { return (i + 2) % 3; }

}  // namespace

std::uint64_t Triangulator::key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

Triangulator::Triangulator(const Polyline& outer, const Polyline& inner) {
  Vec2 lo = outer[0], hi = outer[0];
  for (const auto& p : outer.vertices) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  Vec2 c = 0.5 * (lo + hi);
  scale_ = std::max(hi.x() - lo.x(), hi.y() - lo.y());
  const double L = scale_;
  add_point(c + Vec2(-10 * L, -10 * L));
  add_point(c + Vec2(10 * L, -10 * L));
  add_point(c + Vec2(0, 10 * L));
  tris_.push_back(Tri{{0, 1, 2}, {-1, -1, -1}, {false, false, false}, -1, true});
  vtri_ = {0, 0, 0};

  auto insert_loop = [&](const Polyline& loop) {
    std::vector<int> ids;
    int hint = 0;
    for (const auto& q : loop.vertices) {
      Location loc = locate(q, hint, false);
      if (loc.kind == LocKind::on_vertex) throw GeometryError("duplicate boundary vertex");
      int p = add_point(q);
      if (loc.kind == LocKind::on_edge)
        insert_on_edge(loc.tri, loc.index, p);
      else
        insert_in_triangle(loc.tri, p);
      hint = vtri_[p];
      ids.push_back(p);
    }
    return ids;
  };
  std::vector<int> outer_ids = insert_loop(outer);
  std::vector<int> inner_ids = insert_loop(inner);
  for (std::size_t i = 0; i < outer_ids.size(); ++i)
    insert_segment(outer_ids[i], outer_ids[(i + 1) % outer_ids.size()], BoundaryLabel::sigma, 0);
  for (std::size_t i = 0; i < inner_ids.size(); ++i)
    insert_segment(inner_ids[i], inner_ids[(i + 1) % inner_ids.size()], BoundaryLabel::gamma, 0);
  classify_regions();
}

int Triangulator::add_point(const Vec2& p) {
  pts_.push_back(p);
  vtri_.push_back(-1);
  return static_cast<int>(pts_.size()) - 1;
}

int Triangulator::neighbor_slot(int u, int t) const {
  const Tri& U = tris_[u];
  for (int j = 0; j < 3; ++j)
    if (U.nb[j] == t) return j;
  throw GeometryError("triangulation: broken adjacency");
}

void Triangulator::set_fixed(int t, int e, bool value) {
  tris_[t].fixed[e] = value;
  int u = tris_[t].nb[e];
  if (u >= 0) tris_[u].fixed[neighbor_slot(u, t)] = value;
}

Triangulator::Location Triangulator::locate(const Vec2& p, int start, bool stop_at_fixed) const {
  int t = start >= 0 && tris_[start].alive ? start : 0;
  while (!tris_[t].alive) ++t;
  const std::size_t max_steps = 4 * tris_.size() + 100;
  std::size_t steps = 0;
  auto eps = [](const Vec2& a, const Vec2& b) { return 1e-11 * (b - a).squaredNorm(); };
  for (;;) {
    if (++steps > max_steps) {
      // Walk failed to converge (possible in constrained triangulations).
      for (std::size_t k = 0; k < tris_.size(); ++k) {
        const Tri& T = tris_[k];
        if (!T.alive) continue;
        bool inside = true;
        for (int i = 0; i < 3 && inside; ++i) {
          const Vec2& a = pts_[T.v[nxt(i)]];
          const Vec2& b = pts_[T.v[prv(i)]];
          inside = orient(a, b, p) >= -eps(a, b);
        }
        if (inside) {
          t = static_cast<int>(k);
          break;
        }
      }
      break;
    }
    const Tri& T = tris_[t];
    bool moved = false;
    for (int r = 0; r < 3; ++r) {
      int i = static_cast<int>((steps + r) % 3);
      const Vec2& a = pts_[T.v[nxt(i)]];
      const Vec2& b = pts_[T.v[prv(i)]];
      if (orient(a, b, p) < -eps(a, b)) {
        if (stop_at_fixed && T.fixed[i]) return {LocKind::blocked, t, i};
        if (T.nb[i] < 0) throw GeometryError("triangulation: point outside the bounding triangle");
        t = T.nb[i];
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  const Tri& T = tris_[t];
  for (int i = 0; i < 3; ++i)
    if ((pts_[T.v[i]] - p).squaredNorm() <= 1e-24 * scale_ * scale_) return {LocKind::on_vertex, t, i};
  for (int i = 0; i < 3; ++i) {
    const Vec2& a = pts_[T.v[nxt(i)]];
    const Vec2& b = pts_[T.v[prv(i)]];
    if (std::abs(orient(a, b, p)) <= eps(a, b)) return {LocKind::on_edge, t, i};
  }
  return {LocKind::inside, t, 0};
}

void Triangulator::insert_in_triangle(int t, int p) {
  const Tri old = tris_[t];
  const int a = old.v[0], b = old.v[1], c = old.v[2];
  const int t0 = t;
  const int t1 = static_cast<int>(tris_.size());
  const int t2 = t1 + 1;
  tris_.resize(tris_.size() + 2);
  tris_[t0] = Tri{{p, b, c}, {old.nb[0], t1, t2}, {old.fixed[0], false, false}, old.region, true};
  tris_[t1] = Tri{{p, c, a}, {old.nb[1], t2, t0}, {old.fixed[1], false, false}, old.region, true};
  tris_[t2] = Tri{{p, a, b}, {old.nb[2], t0, t1}, {old.fixed[2], false, false}, old.region, true};
  if (old.nb[1] >= 0) tris_[old.nb[1]].nb[neighbor_slot(old.nb[1], t)] = t1;
  if (old.nb[2] >= 0) tris_[old.nb[2]].nb[neighbor_slot(old.nb[2], t)] = t2;
  vtri_[p] = t0;
  vtri_[b] = t0;
  vtri_[c] = t0;
  vtri_[a] = t1;
  std::vector<int> stack{t0, t1, t2};
  legalize(stack);
}

void Triangulator::insert_on_edge(int t, int e, int p) {
  const Tri T = tris_[t];
  const int u = T.nb[e];
  if (u < 0) throw GeometryError("triangulation: cannot split a hull edge");
  const Tri U = tris_[u];
  const int j = neighbor_slot(u, t);
  const int a = T.v[e], b = T.v[nxt(e)], c = T.v[prv(e)];
  const int d = U.v[j];
  const int n_ab = T.nb[prv(e)], n_ca = T.nb[nxt(e)];
  const bool f_ab = T.fixed[prv(e)], f_ca = T.fixed[nxt(e)];
  const int n_bd = U.nb[nxt(j)], n_dc = U.nb[prv(j)];
  const bool f_bd = U.fixed[nxt(j)], f_dc = U.fixed[prv(j)];
  const bool f_bc = T.fixed[e];

  const int t0 = t, u0 = u;
  const int t1 = static_cast<int>(tris_.size());
  const int u1 = t1 + 1;
  tris_.resize(tris_.size() + 2);
  tris_[t0] = Tri{{p, a, b}, {n_ab, u1, t1}, {f_ab, f_bc, false}, T.region, true};
  tris_[t1] = Tri{{p, c, a}, {n_ca, t0, u0}, {f_ca, false, f_bc}, T.region, true};
  tris_[u0] = Tri{{p, d, c}, {n_dc, t1, u1}, {f_dc, f_bc, false}, U.region, true};
  tris_[u1] = Tri{{p, b, d}, {n_bd, u0, t0}, {f_bd, false, f_bc}, U.region, true};
  if (n_ca >= 0) tris_[n_ca].nb[neighbor_slot(n_ca, t)] = t1;
  if (n_bd >= 0) tris_[n_bd].nb[neighbor_slot(n_bd, u)] = u1;
  vtri_[p] = t0;
  vtri_[a] = t0;
  vtri_[b] = t0;
  vtri_[c] = t1;
  vtri_[d] = u0;
  std::vector<int> stack{t0, t1, u0, u1};
  legalize(stack);
}

void Triangulator::flip(int t, int i) {
  const Tri T = tris_[t];
  const int u = T.nb[i];
  const Tri U = tris_[u];
  const int j = neighbor_slot(u, t);
  const int a = T.v[i], b = T.v[nxt(i)], c = T.v[prv(i)];
  const int d = U.v[j];
  const int n_ab = T.nb[prv(i)], n_ca = T.nb[nxt(i)];
  const bool f_ab = T.fixed[prv(i)], f_ca = T.fixed[nxt(i)];
  const int n_bd = U.nb[nxt(j)], n_dc = U.nb[prv(j)];
  const bool f_bd = U.fixed[nxt(j)], f_dc = U.fixed[prv(j)];
  tris_[t] = Tri{{a, b, d}, {n_bd, u, n_ab}, {f_bd, false, f_ab}, T.region, true};
  tris_[u] = Tri{{a, d, c}, {n_dc, n_ca, t}, {f_dc, f_ca, false}, T.region, true};
  if (n_bd >= 0) tris_[n_bd].nb[neighbor_slot(n_bd, u)] = t;
  if (n_ca >= 0) tris_[n_ca].nb[neighbor_slot(n_ca, t)] = u;
  vtri_[a] = t;
  vtri_[b] = t;
  vtri_[d] = t;
  vtri_[c] = u;
}

void Triangulator::legalize(std::vector<int>& stack) {
  while (!stack.empty()) {
    const int t = stack.back();
    stack.pop_back();
    const Tri& T = tris_[t];
    if (T.fixed[0] || T.nb[0] < 0) continue;
    const int u = T.nb[0];
    const int d = tris_[u].v[neighbor_slot(u, t)];
    const Vec2& p = pts_[T.v[0]];
    const Vec2& b = pts_[T.v[1]];
    const Vec2& c = pts_[T.v[2]];
    const Vec2& q = pts_[d];
    if (!in_circle(p, b, c, q)) continue;
    if (orient(p, b, q) <= 0 || orient(p, q, c) <= 0) continue;
    flip(t, 0);
    stack.push_back(t);
    stack.push_back(u);
  }
}

bool Triangulator::find_edge(int a, int b, int& tri, int& edge) const {
  const int start = vtri_[a];
  if (start < 0) return false;
  for (int direction = 0; direction < 2; ++direction) {
    int t = start;
    do {
      const Tri& T = tris_[t];
      int k = 0;
      while (T.v[k] != a) ++k;
      if (T.v[nxt(k)] == b) {
        tri = t;
        edge = prv(k);
        return true;
      }
      if (T.v[prv(k)] == b) {
        tri = t;
        edge = nxt(k);
        return true;
      }
      t = direction == 0 ? T.nb[prv(k)] : T.nb[nxt(k)];
    } while (t >= 0 && t != start);
    if (t == start) break;
  }
  return false;
}

int Triangulator::find_segment(int a, int b) const {
  auto it = seg_lookup_.find(key(a, b));
  return it == seg_lookup_.end() ? -1 : it->second;
}

void Triangulator::insert_segment(int a, int b, BoundaryLabel label, int depth) {
  int t = -1, e = -1;
  if (find_edge(a, b, t, e)) {
    set_fixed(t, e, true);
    segs_.push_back({a, b, label, true});
    seg_lookup_[key(a, b)] = static_cast<int>(segs_.size()) - 1;
    return;
  }
  if (depth > 48) throw GeometryError("triangulation: failed to recover a boundary segment");
  const Vec2 m = 0.5 * (pts_[a] + pts_[b]);
  Location loc = locate(m, vtri_[a], false);
  if (loc.kind == LocKind::on_vertex) throw GeometryError("boundary segment passes through a vertex");
  if (loc.kind == LocKind::on_edge && tris_[loc.tri].fixed[loc.index])
    throw GeometryError("boundary segments intersect");
  const int p = add_point(m);
  if (loc.kind == LocKind::on_edge)
    insert_on_edge(loc.tri, loc.index, p);
  else
    insert_in_triangle(loc.tri, p);
  insert_segment(a, p, label, depth + 1);
  insert_segment(p, b, label, depth + 1);
}

void Triangulator::classify_regions() {
  for (auto& T : tris_) T.region = -1;
  std::deque<std::pair<int, int>> queue;
  for (std::size_t k = 0; k < tris_.size(); ++k) {
    const Tri& T = tris_[k];
    if (T.alive && (T.v[0] < num_super_ || T.v[1] < num_super_ || T.v[2] < num_super_)) {
      queue.emplace_back(static_cast<int>(k), kExterior);
    }
  }
  std::vector<int> best(tris_.size(), std::numeric_limits<int>::max());
  for (auto& [t, lvl] : queue) best[t] = lvl;
  while (!queue.empty()) {
    auto [t, lvl] = queue.front();
    queue.pop_front();
    if (lvl > best[t]) continue;
    for (int i = 0; i < 3; ++i) {
      int u = tris_[t].nb[i];
      if (u < 0) continue;
      int next = lvl + (tris_[t].fixed[i] ? 1 : 0);
      if (next < best[u]) {
        best[u] = next;
        if (tris_[t].fixed[i])
          queue.emplace_back(u, next);
        else
          queue.emplace_front(u, next);
      }
    }
  }
  for (std::size_t k = 0; k < tris_.size(); ++k) tris_[k].region = best[k];
}

bool Triangulator::segment_encroached(int s) const {
  const Segment& S = segs_[s];
  int t = -1, e = -1;
  if (!find_edge(S.a, S.b, t, e)) return false;
  const Vec2& pa = pts_[S.a];
  const Vec2& pb = pts_[S.b];
  for (int side = 0; side < 2; ++side) {
    int tri = side == 0 ? t : tris_[t].nb[e];
    if (tri < 0 || tris_[tri].region != kDomain) continue;
    int opp = side == 0 ? tris_[t].v[e] : tris_[tri].v[neighbor_slot(tri, t)];
    const Vec2& o = pts_[opp];
    if ((pa - o).dot(pb - o) < 0) return true;
  }
  return false;
}

int Triangulator::split_segment(int s) {
  const Segment S = segs_[s];
  int t = -1, e = -1;
  if (!find_edge(S.a, S.b, t, e)) throw GeometryError("triangulation: lost a boundary segment");
  const int p = add_point(0.5 * (pts_[S.a] + pts_[S.b]));
  insert_on_edge(t, e, p);
  segs_[s].alive = false;
  seg_lookup_.erase(key(S.a, S.b));
  segs_.push_back({S.a, p, S.label, true});
  seg_lookup_[key(S.a, p)] = static_cast<int>(segs_.size()) - 1;
  segs_.push_back({p, S.b, S.label, true});
  seg_lookup_[key(p, S.b)] = static_cast<int>(segs_.size()) - 1;
  return p;
}

void Triangulator::refine(const RefinementOptions& opts) {
  const double ratio_limit = 1.0 / (2.0 * std::sin(opts.min_angle_deg * std::numbers::pi / 180.0));
  const double min_segment = 1e-3 * opts.max_circumradius;
  std::size_t inserted = 0;

  auto seg_length = [&](int s) { return (pts_[segs_[s].a] - pts_[segs_[s].b]).norm(); };

  auto is_bad = [&](int t) {
    const Tri& T = tris_[t];
    const Vec2& a = pts_[T.v[0]];
    const Vec2& b = pts_[T.v[1]];
    const Vec2& c = pts_[T.v[2]];
    // Edge k is opposite vertex k.
    const std::array<double, 3> len{(b - c).norm(), (c - a).norm(), (a - b).norm()};
    const double area = 0.5 * orient(a, b, c);
    const double R = len[0] * len[1] * len[2] / (4.0 * area);
    if (R > opts.max_circumradius) return true;
    int k = static_cast<int>(std::min_element(len.begin(), len.end()) - len.begin());
    if (R / len[k] <= ratio_limit) return false;
    // Small angle between two boundary segments is an input feature.
    return !(T.fixed[nxt(k)] && T.fixed[prv(k)]);
  };

  for (;;) {
    const std::size_t round_start = inserted;
    bool split_any = opts.split_segments;
    while (split_any) {
      split_any = false;
      for (std::size_t s = 0; s < segs_.size(); ++s) {
        if (!segs_[s].alive || seg_length(static_cast<int>(s)) < min_segment) continue;
        if (segment_encroached(static_cast<int>(s))) {
          split_segment(static_cast<int>(s));
          split_any = true;
          ++inserted;
        }
      }
      if (inserted > opts.max_insertions) return;
    }

    std::vector<std::array<int, 4>> bad;
    for (std::size_t t = 0; t < tris_.size(); ++t) {
      const Tri& T = tris_[t];
      if (T.alive && T.region == kDomain && is_bad(static_cast<int>(t)))
        bad.push_back({static_cast<int>(t), T.v[0], T.v[1], T.v[2]});
    }
    if (bad.empty()) return;

    for (const auto& entry : bad) {
      const int t = entry[0];
      const Tri& T = tris_[t];
      if (T.v[0] != entry[1] || T.v[1] != entry[2] || T.v[2] != entry[3]) continue;
      const Vec2 c = circumcenter(pts_[T.v[0]], pts_[T.v[1]], pts_[T.v[2]]);

      bool encroaches = false;
      const std::size_t nseg = segs_.size();
      for (std::size_t s = 0; s < nseg; ++s) {
        if (!segs_[s].alive) continue;
        const Vec2& pa = pts_[segs_[s].a];
        const Vec2& pb = pts_[segs_[s].b];
        if ((pa - c).dot(pb - c) < 0 && seg_length(static_cast<int>(s)) >= min_segment) {
          encroaches = true;
          if (!opts.split_segments) break;
          split_segment(static_cast<int>(s));
          ++inserted;
        }
      }
      if (encroaches) continue;

      Location loc = locate(c, t, true);
      if (loc.kind == LocKind::blocked ||
          (loc.kind == LocKind::on_edge && tris_[loc.tri].fixed[loc.index])) {
        const Tri& B = tris_[loc.tri];
        int s = find_segment(B.v[nxt(loc.index)], B.v[prv(loc.index)]);
        if (opts.split_segments && s >= 0 && seg_length(s) >= min_segment) {
          split_segment(s);
          ++inserted;
        }
        continue;
      }
      if (loc.kind == LocKind::on_vertex || tris_[loc.tri].region != kDomain) continue;
      const int p = add_point(c);
      if (loc.kind == LocKind::on_edge)
        insert_on_edge(loc.tri, loc.index, p);
      else
        insert_in_triangle(loc.tri, p);
      ++inserted;
    }
    if (inserted > opts.max_insertions || inserted == round_start) return;
  }
}

TriMesh Triangulator::extract(double h_target) const {
  TriMesh m;
  m.h_target = h_target;
  std::vector<int> index(pts_.size(), -1);
  std::vector<bool> used(pts_.size(), false);
  for (const auto& T : tris_)
    if (T.alive && T.region == kDomain)
      for (int v : T.v) used[v] = true;
  for (std::size_t v = 0; v < pts_.size(); ++v) {
    if (!used[v]) continue;
    index[v] = static_cast<int>(m.nodes.size());
    m.nodes.push_back(pts_[v]);
  }
  for (std::size_t t = 0; t < tris_.size(); ++t) {
    const Tri& T = tris_[t];
    if (!T.alive || T.region != kDomain) continue;
    m.triangles.push_back({index[T.v[0]], index[T.v[1]], index[T.v[2]]});
    for (int i = 0; i < 3; ++i) {
      if (!T.fixed[i]) continue;
      int u = T.nb[i];
      if (u >= 0 && tris_[u].region == kDomain) continue;
      int a = T.v[nxt(i)], b = T.v[prv(i)];
      int s = find_segment(a, b);
      if (s < 0) throw GeometryError("triangulation: boundary edge without segment");
      m.boundary_edges.push_back({{index[a], index[b]}, segs_[s].label});
    }
  }
  std::stable_sort(m.boundary_edges.begin(), m.boundary_edges.end(),
                   [](const BoundaryEdge& x, const BoundaryEdge& y) { return x.label < y.label; });
  return m;
}

}  // namespace ccbm::detail
