#pragma once

#include "ccbm/admm.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccbm {

/// Unknown key, malformed value or violated constraint; the message names the key.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class RunMode { synthesize, reconstruct_ccbm, reconstruct_admm, verify_gradient, sweep };
RunMode parse_run_mode(const std::string& name);
std::string to_string(RunMode mode);

/// Box bound given either as a number or taken from the synthesized state.
struct BoundSetting {
  enum class Kind { value, truth_min, truth_max } kind = Kind::value;
  double value = 0.0;
};

struct RunConfig {
  ShapeSpec target;
  ShapeSpec initial;
  RobinConfig robin;
  DescentConfig descent;
  GradientKind ccbm_kind = GradientKind::g1;
  AdmmConfig admm;
  BoundSetting admm_a{BoundSetting::Kind::value, -std::numeric_limits<double>::infinity()};
  BoundSetting admm_b{BoundSetting::Kind::value, std::numeric_limits<double>::infinity()};
  int snapshot_every = 0;  // ADMM state dumps every S outer iterations (0: final only)
  std::string dirichlet = "1";
  double delta = 0.0;
  std::uint64_t seed = 0;
  std::string data_file;  // read Cauchy data instead of synthesizing
  double h = 0.03;
  double synthesis_refinement = 0.5;  // synthesis mesh size relative to h
  std::vector<GradientKind> fd_kinds;
  std::vector<double> fd_steps{0.02, 0.01, 0.005};
  bool write_polylines = true;
  std::string sweep_mode = "reconstruct-ccbm";
  std::string sweep_grid;  // "key=v1,v2;key2=w1,w2"
  int sweep_workers = 0;   // 0: CAVITY_CCBM_WORKERS, else hardware concurrency
  std::string preset;
};

RunConfig default_config();
/// Applies one dotted key; "preset" loads a named preset on top of the current values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
/// Flat "key = value" text; '#' starts a comment.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin = "config");
/// Defaults, then the file (if non-empty), then "key=value" overrides.
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides);
void validate(const RunConfig& cfg);
std::vector<std::string> preset_names();

/// Every result-affecting parameter as sorted "key = value" lines.
std::map<std::string, std::string> config_entries(const RunConfig& cfg);
/// Loadable as a config file; the preset name is kept as a comment.
std::string manifest_text(const RunConfig& cfg);

/// Nodal Dirichlet input for a selector such as "1", "f1", "f2", "1+f1",
/// "0.5*f2" or "file:path" (lines "x y f", matched to the nearest sample).
double evaluate_dirichlet_at(const std::string& selector, const Vec2& x);
Eigen::VectorXd evaluate_dirichlet_input(const std::string& selector, const TriMesh& m);

/// Unit-circle sigma sampled at spacing h.
Polyline sigma_curve(double h, double phase = 0.0);
/// Samples a shape at spacing h (spec.samples <= 0 means automatic).
Polyline shape_curve(const ShapeSpec& spec, double h);

struct Synthesis {
  TriMesh mesh;
  Polyline truth;
  CauchyData data;
  Eigen::VectorXd u_star;
};
/// Exact-domain forward solve on the finer, phase-shifted synthesis mesh.
Synthesis synthesize(const RunConfig& cfg);
TriMesh initial_mesh(const RunConfig& cfg);

/// Executes a mode and writes its artifacts below out_dir. Returns the exit code.
int run(RunMode mode, const RunConfig& cfg, const std::string& out_dir);

}  // namespace ccbm
