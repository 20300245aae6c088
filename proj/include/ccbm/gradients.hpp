#pragma once

#include "ccbm/problems.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ccbm {

enum class GradientKind { g1, g2, gq, gw, glambda1, glambda2, gsharp1, gsharp2 };

GradientKind parse_gradient_kind(const std::string& name);
std::string to_string(GradientKind kind);
/// True for the kinds that need an ADMM state (everything but g1, g2).
bool is_admm_kind(GradientKind kind);
std::vector<AdjointKind> required_adjoints(GradientKind kind);

/// One value per gamma node, in the order of GammaGeometry::loop.
using BoundaryScalarField = Eigen::VectorXd;

/// Gamma loop of a mesh with node lookup and curvature clamped to |kappa| <= 1/h.
struct GammaGeometry {
  std::vector<int> loop;
  std::vector<int> position;  // loop index per mesh node, -1 off gamma
  Eigen::VectorXd kappa;

  /// h <= 0 falls back to m.h_target, then to the mean gamma edge length.
  explicit GammaGeometry(const TriMesh& m, double h = 0.0);
};

/// (ds u1 ds psi2 - ds u2 ds psi1) + (alpha^2 - alpha kappa)(psi1 u2 - psi2 u1)
BoundaryScalarField psi_gamma(const TriMesh& m, const GammaGeometry& geo, const ComplexNodalField& u,
                              const ComplexNodalField& psi, double alpha);
/// (ds u1 ds psi1 + ds u2 ds psi2) - (alpha^2 - alpha kappa)(u1 psi1 + u2 psi2)
BoundaryScalarField psi_dagger(const TriMesh& m, const GammaGeometry& geo, const ComplexNodalField& u,
                               const ComplexNodalField& psi, double alpha);

/// Adjoint solutions available to shape_gradient.
struct AdjointFields {
  std::optional<ComplexNodalField> p1, p2, q, w, lambda;
  const ComplexNodalField& get(AdjointKind kind) const;
  void set(AdjointKind kind, ComplexNodalField value);
};

/// Solves the adjoints that `kind` needs.
AdjointFields compute_adjoints(const CcbmSystem& sys, GradientKind kind, const ComplexNodalField& u,
                               const AdmmState* admm);

BoundaryScalarField shape_gradient(GradientKind kind, const TriMesh& m, const GammaGeometry& geo,
                                   const ComplexNodalField& u, const AdjointFields& adj, const AdmmState* admm,
                                   double alpha);

/// Edgewise linear quadrature of G (theta . n) over gamma.
double directional_derivative(const TriMesh& m, const GammaGeometry& geo, const BoundaryScalarField& G,
                              const NodalVectorField& theta);

enum class Functional { J, Y };

struct FdRow {
  GradientKind kind;
  double t;
  double fd_value;
  double analytic_value;
  double relative_error;
  bool skipped = false;  // deformation inverted the mesh
};

/// Compares (F(x + t theta) - F)/t with the analytic directional derivative
/// for every kind and step. The Cauchy traces stay attached to the sigma
/// nodes, which theta must leave in place; v and lambda are transferred to
/// each deformed mesh.
std::vector<FdRow> fd_certify(Functional functional, const TriMesh& m, const SigmaTraces& data, const RobinConfig& cfg,
                              const AdmmState* admm, const NodalVectorField& theta, const std::vector<double>& ts,
                              const std::vector<GradientKind>& kinds);

/// Evaluates J or Y on a mesh (solving the state).
double evaluate_functional(Functional functional, const TriMesh& m, const SigmaTraces& data, const RobinConfig& cfg,
                           const AdmmState* admm);

/// Smooth non-radial field (1 - |x|^2)(0.5 + x + y^2/2, 0.3 - y + xy), zero on sigma nodes.
NodalVectorField certification_field(const TriMesh& m);

void write_fd_report(std::ostream& os, const std::vector<FdRow>& rows);
/// "x y G" per gamma node.
void write_gradient(std::ostream& os, const TriMesh& m, const GammaGeometry& geo, const BoundaryScalarField& G);

}  // namespace ccbm
