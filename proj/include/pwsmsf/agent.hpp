#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pwsmsf/types.hpp"

namespace pwsmsf {

/// Which dynamics currently govern the agent.
enum class Mode { MinusRegion, PlusRegion, Sliding };

enum class PointKind {
  TransversalCrossingUp,
  TransversalCrossingDown,
  AttractiveSliding,
  TangentialExitMinus,  // candidate; the integrator confirms the exit derivative
  TangentialExitPlus,   // candidate
  Repulsive,
  Degenerate,
};

/// Classification of an on-manifold point together with the normal components
/// of the two adjacent fields, normal_minus = grad(h)^T f^-, normal_plus =
/// grad(h)^T f^+.
struct PointClass {
  PointKind kind = PointKind::Degenerate;
  double normal_minus = 0.0;
  double normal_plus = 0.0;
};

enum class CrossingDirection { MinusToPlus, PlusToMinus };

using FieldFn = std::function<Vector(const Vector&)>;
using JacobianFn = std::function<Matrix(const Vector&)>;
using ScalarFn = std::function<double(const Vector&)>;

/// A single piecewise-smooth agent: two smooth fields separated by the zero
/// set of the switching function. Immutable after construction; all evaluators
/// must be pure. Jacobians and the switching Hessian are optional; missing
/// Jacobians fall back to central finite differences and a missing Hessian is
/// taken as zero (exact for affine switching functions).
struct AgentModel {
  int dim = 0;
  FieldFn field_minus;
  FieldFn field_plus;
  JacobianFn jac_minus;
  JacobianFn jac_plus;
  ScalarFn switch_fn;
  FieldFn switch_grad;
  JacobianFn switch_hess;
  std::string name;
};

/// Normal components (grad(h)^T f^-, grad(h)^T f^+) at x.
std::pair<double, double> normal_components(const AgentModel& model, const Vector& x);

/// Field of the requested mode; Mode::Sliding yields the Filippov field.
Vector eval_field(const AgentModel& model, Mode mode, const Vector& x);

/// Filippov convex weight alpha = grad(h)^T f^- / grad(h)^T (f^- - f^+).
double sliding_alpha(const AgentModel& model, const Vector& x);

/// f_Sigma = (1-alpha) f^- + alpha f^+.
Vector sliding_field(const AgentModel& model, const Vector& x);

/// Jacobian of the mode's field (finite-difference fallback for f^-, f^+).
Matrix jacobian(const AgentModel& model, Mode mode, const Vector& x);

/// D f_Sigma = (1-alpha) Df^- + alpha Df^+ + (f^+ - f^-) grad(alpha)^T, with
/// grad(alpha) from the quotient rule (uses the switching Hessian).
Matrix sliding_jacobian(const AgentModel& model, const Vector& x);

/// Classify an on-manifold point by the sign pattern of the normal components.
/// A scalar counts as zero inside the band |s| <= 1e-9 * (1 + max ||f||).
PointClass classify_point(const AgentModel& model, const Vector& x,
                          double on_manifold_tol = 1e-8);

/// Sign-pattern classification shared with the coupled-network code, where the
/// normal components carry the coupling term.
PointKind classify_scalars(double normal_minus, double normal_plus, double zero_band);

/// Jump matrix for a transversal crossing, S = I + (f_out - f_in) grad(h)^T /
/// grad(h)^T f_in; maps the incoming field onto the outgoing one.
Matrix saltation_crossing(const AgentModel& model, const Vector& x,
                          CrossingDirection direction);

/// Jump matrix for entry onto the sliding manifold from a region,
/// S = I + (f_Sigma - f_in) grad(h)^T / grad(h)^T f_in. Annihilates grad(h)^T
/// on the left, so det S = 0.
Matrix saltation_slide_entry(const AgentModel& model, const Vector& x, Mode from);

/// Switching Hessian with the zero-matrix default.
Matrix switch_hessian(const AgentModel& model, const Vector& x);

/// B = (f^+ - f^-) grad(h)^T E / grad(h)^T (f^- - f^+); the coupling
/// correction picked up by the sliding variational coefficient.
Matrix b_matrix(const AgentModel& model, const Vector& x, const Matrix& inner_coupling);

/// Newton projection along grad(h) onto the switching manifold.
Vector project_onto_manifold(const AgentModel& model, Vector x,
                             double tol = 1e-12, int max_iter = 8);

/// Built-in stick-slip oscillator: state (position, velocity), belt speed vbar,
/// friction 1/(1 + gamma |v - vbar|), switching at v = vbar.
AgentModel make_galvanetto_model(double gamma = 3.0, double vbar = 0.15);

/// Registry lookup by lowercase identifier ("galvanetto").
AgentModel make_model(const std::string& name,
                      const std::map<std::string, double>& params = {});

}  // namespace pwsmsf
