#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccbm {

using Vec2 = Eigen::Vector2d;

/// Raised for invalid curves, clearance violations and meshing failures.
class GeometryError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Closed polyline with implicit closure (last vertex connects to first).
/// Curves produced by this library are counterclockwise.
struct Polyline {
  std::vector<Vec2> vertices;
  bool closed = true;

  std::size_t size() const { return vertices.size(); }
  const Vec2& operator[](std::size_t i) const { return vertices[i]; }
};

enum class ShapeKind { circle, ellipse, kite, square, lblock, multiconcave, polyline_file };

/// Which side of the annulus a closed curve bounds. Normals always point out
/// of the annular region: away from the enclosed set on the outer boundary,
/// into the enclosed cavity on the inner one.
enum class BoundarySide { outer, inner };

struct ShapeSpec {
  ShapeKind kind = ShapeKind::circle;
  Vec2 center = Vec2::Zero();
  double radius = 0.3;       // circle
  double radius_x = 0.35;    // ellipse semi-axes
  double radius_y = 0.2;
  double side = 0.5;         // square / L-block
  double scale = 1.0;        // kite / multiconcave
  int samples = 64;
  double phase = 0.0;        // parameter offset in units of one sample step (smooth kinds)
  std::string file;          // polyline_file
  /// Required distance to the unit circle; nullopt disables the check (used
  /// when sampling the outer boundary itself).
  std::optional<double> clearance = 0.05;
};

ShapeKind parse_shape_kind(const std::string& name);
std::string to_string(ShapeKind kind);

Polyline sample_curve(const ShapeSpec& spec);

/// Number of vertices giving edge length close to h on a curve of the given
/// perimeter (at least 8).
int samples_for_spacing(double perimeter, double h);

double perimeter(const Polyline& p);
double signed_area(const Polyline& p);
Polyline reversed(const Polyline& p);

/// Unit vertex normals from the vertex order of p (reversal flips them).
std::vector<Vec2> discrete_normals(const Polyline& p, BoundarySide side);

/// Turning angle over dual length per vertex, signed so that a circular
/// cavity of radius r gives -1/r on the inner side and +1/r on the outer.
std::vector<double> discrete_curvature(const Polyline& p, BoundarySide side = BoundarySide::inner);

double point_segment_distance(const Vec2& x, const Vec2& a, const Vec2& b);
/// Closest point to x on the closed polyline, with the edge index and the
/// local parameter s in [0,1] along that edge.
struct ClosestPoint {
  Vec2 point;
  std::size_t edge;
  double s;
  double distance;
};
ClosestPoint closest_point(const Polyline& p, const Vec2& x);

double hausdorff_distance(const Polyline& a, const Polyline& b);

bool point_in_polygon(const Polyline& p, const Vec2& x);
bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);
bool is_simple(const Polyline& p);

void write_polyline(std::ostream& os, const Polyline& p);
Polyline read_polyline(std::istream& is);
void save_polyline(const std::string& path, const Polyline& p);
Polyline load_polyline(const std::string& path);

}  // namespace ccbm
