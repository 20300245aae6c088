#pragma once

#include "ccbm/gradients.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

namespace ccbm {

struct DescentConfig {
  double beta = 0.9;        // volume weight of the extension form
  double mu = 2.0;          // step scale
  int max_inner = 200;      // iteration budget
  double eps = 1e-8;        // |dF[theta]| threshold, used when stop_on_eps
  bool stop_on_eps = false;
  double backtrack_factor = 0.5;
  int max_backtracks = 10;
  bool squared_norm = true;  // t = mu F / |theta|^2 (false: / |theta|)
  double remesh_quality = 0.2;
  double h = 0.0;            // remesh size, <= 0 uses the mesh's h_target
  bool armijo = false;       // also backtrack until F(t) <= F + c t dF
  double armijo_c = 1e-4;
  void validate() const;
};

/// beta int grad theta : grad phi + (1 - beta) int_gamma ds theta . ds phi = -int_gamma G n . phi,
/// theta = 0 on sigma.
NodalVectorField sobolev_extension(const TriMesh& m, const GammaGeometry& geo, const BoundaryScalarField& G,
                                   double beta);

/// theta^T (K + M) theta summed over both components.
double h1_norm_squared(const FemOperators& ops, const NodalVectorField& theta);

/// mu * cost / |theta|^2 (or / |theta| when squared is false); 0 when theta = 0.
double step_size(double cost, const NodalVectorField& theta, double mu, const FemOperators& ops, bool squared = true);

struct IterationRecord {
  int iter = 0;
  double cost = 0;       // J or Y at the iterate
  double grad_norm = 0;  // |dF[theta]|
  double hausdorff = 0;  // NaN without a target
  double step = 0;
  double min_quality = 0;  // after the step (and remesh)
  bool remeshed = false;
};

struct DescentResult {
  TriMesh mesh;
  std::vector<IterationRecord> history;
  std::optional<AdmmState> admm;  // v, lambda carried onto the final mesh
  bool aborted = false;
  std::string message;
};

/// Called after every accepted step with the iteration index and new mesh.
using IterationCallback = std::function<void(int, const TriMesh&)>;

/// Sobolev gradient descent on J (admm == nullptr, kind G1/G2) or on Y.
DescentResult sgbd_inner_loop(const TriMesh& m0, const CauchyData& data, const RobinConfig& cfg,
                              const AdmmState* admm, GradientKind kind, const DescentConfig& dcfg,
                              const Polyline* target = nullptr, const IterationCallback& callback = {});

void write_history(std::ostream& os, const std::vector<IterationRecord>& rows);

}  // namespace ccbm
