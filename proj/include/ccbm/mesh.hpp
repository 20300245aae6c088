#pragma once

#include "ccbm/geometry.hpp"

#include <Eigen/Core>

#include <array>
#include <iosfwd>
#include <optional>
#include <vector>

namespace ccbm {

enum class BoundaryLabel : int { sigma = 1, gamma = 2 };

/// Boundary edge oriented with the domain on its left.
struct BoundaryEdge {
  std::array<int, 2> nodes;
  BoundaryLabel label;
};

/// P1 triangulation of the annulus between the outer boundary (sigma) and
/// the cavity boundary (gamma). Triangles are counterclockwise.
struct TriMesh {
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;
  double h_target = 0.0;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
};

/// One 2D vector per node, stored as an n x 2 matrix.
using NodalVectorField = Eigen::Matrix<double, Eigen::Dynamic, 2>;

double triangle_signed_area(const Vec2& a, const Vec2& b, const Vec2& c);
double triangle_quality(const Vec2& a, const Vec2& b, const Vec2& c);

/// Conforming constrained Delaunay triangulation of the region between the
/// two curves, refined to edge length about h and minimum angle of 20 degrees.
/// Input vertices are always kept. Segments are split only when a curve is
/// sampled coarser than 1.5h or the unsplit mesh misses 20 degrees.
TriMesh triangulate_annulus(const Polyline& outer, const Polyline& inner, double h);

/// Moves every node to x + t*theta(x). Returns nullopt when a triangle
/// collapses or inverts, or when the gamma loop stops being simple.
std::optional<TriMesh> deform(const TriMesh& m, const NodalVectorField& theta, double t);

/// Minimum over triangles of 2*inradius/circumradius (0 for inverted ones).
double min_quality(const TriMesh& m);

/// Re-triangulates the current boundary curves, keeping their vertices.
/// Segments are split only if the unsplit mesh stays below quality 0.3.
TriMesh remesh(const TriMesh& m, double h);

/// Ordered node loop of one boundary component, counterclockwise around the
/// region the curve encloses (so for gamma the domain lies on the right).
std::vector<int> boundary_loop(const TriMesh& m, BoundaryLabel label);
Polyline boundary_polyline(const TriMesh& m, BoundaryLabel label);

/// Node flags: true for nodes carried by edges with the given label.
std::vector<bool> boundary_node_mask(const TriMesh& m, BoundaryLabel label);

/// Structural checks (orientation, boundary edge ownership, disjoint sigma
/// and gamma node sets). Throws GeometryError describing the first failure.
void validate(const TriMesh& m);

/// V - E + F over the triangulation (0 for an annulus).
int euler_characteristic(const TriMesh& m);

/// P1 interpolation of a nodal field from src onto the nodes of dst. Nodes of
/// dst outside src get the value at the nearest point of src's boundary.
Eigen::VectorXd transfer_field(const TriMesh& src, const Eigen::VectorXd& field, const TriMesh& dst);

/// Point location helper reused across many queries on one mesh.
class PointLocator {
public:
  explicit PointLocator(const TriMesh& m);
  /// Triangle containing x with barycentric weights, or nullopt.
  std::optional<std::pair<int, Eigen::Vector3d>> locate(const Vec2& x) const;
  /// Interpolates a nodal field at x, extending by the nearest boundary value.
  double interpolate(const Eigen::VectorXd& field, const Vec2& x) const;

private:
  const TriMesh& mesh_;
  Vec2 lo_, hi_;
  int nx_ = 1, ny_ = 1;
  double cell_ = 1.0;
  std::vector<std::vector<int>> buckets_;
};

void write_mesh(std::ostream& os, const TriMesh& m);
TriMesh read_mesh(std::istream& is);
void save_mesh(const std::string& path, const TriMesh& m);
TriMesh load_mesh(const std::string& path);

}  // namespace ccbm
