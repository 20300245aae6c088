#pragma once

// Internal constrained Delaunay triangulator used by triangulate_annulus.

#include "ccbm/mesh.hpp"

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace ccbm::detail {

struct RefinementOptions {
  double max_circumradius = 1.0;
  double min_angle_deg = 25.0;
  std::size_t max_insertions = 1000000;
  /// When false the boundary vertex set is frozen.
  bool split_segments = true;
};

class Triangulator {
public:
  /// The two loops must be counterclockwise; outer encloses inner.
  Triangulator(const Polyline& outer, const Polyline& inner);

  void refine(const RefinementOptions& opts);
  TriMesh extract(double h_target) const;

private:
  struct Tri {
    std::array<int, 3> v{};
    std::array<int, 3> nb{-1, -1, -1};
    std::array<bool, 3> fixed{false, false, false};
    int region = -1;
    bool alive = true;
  };
  struct Segment {
    int a, b;
    BoundaryLabel label;
    bool alive = true;
  };
  enum class LocKind { inside, on_edge, on_vertex, blocked };
  struct Location {
    LocKind kind;
    int tri;
    int index;  // edge index for on_edge/blocked, vertex index for on_vertex
  };

  int add_point(const Vec2& p);
  Location locate(const Vec2& p, int start, bool stop_at_fixed) const;
  void insert_in_triangle(int t, int p);
  void insert_on_edge(int t, int e, int p);
  void legalize(std::vector<int>& stack);
  void flip(int t, int i);
  int neighbor_slot(int u, int t) const;
  bool find_edge(int a, int b, int& tri, int& edge) const;
  void set_fixed(int t, int e, bool value);

  void insert_segment(int a, int b, BoundaryLabel label, int depth);
  int split_segment(int seg);
  void classify_regions();
  bool segment_encroached(int seg) const;
  int find_segment(int a, int b) const;
  static std::uint64_t key(int a, int b);

  std::vector<Vec2> pts_;
  std::vector<Tri> tris_;
  std::vector<int> vtri_;
  std::vector<Segment> segs_;
  std::unordered_map<std::uint64_t, int> seg_lookup_;
  int num_super_ = 3;
  double scale_ = 1.0;
};

}  // namespace ccbm::detail
