#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "pwsmsf/agent.hpp"
#include "pwsmsf/errors.hpp"
#include "pwsmsf/types.hpp"

namespace pwsmsf {

enum class EventKind {
  CrossMinusToPlus,
  CrossPlusToMinus,
  SlideEntryFromMinus,
  SlideEntryFromPlus,
  TangentialExitToMinus,
  TangentialExitToPlus,
};

struct EventRecord {
  double time = 0.0;
  Vector state;
  EventKind kind = EventKind::CrossMinusToPlus;
  Matrix saltation;  // identity for tangential exits
};

struct TrajectorySample {
  double time = 0.0;
  Vector state;
  Mode mode = Mode::MinusRegion;
};

/// Samples on the fixed step grid plus exact event nodes; events carry their
/// saltation matrices.
struct Trajectory {
  std::vector<TrajectorySample> samples;
  std::vector<EventRecord> events;
};

struct IntegrationOptions {
  double sliding_drift_tol = 1e-10;
  int max_events = 10000;
  int max_event_iterations = 100;
  bool record_samples = true;  // events and the final state are always kept
  std::optional<Mode> initial_mode;  // skip classification; resume a known mode
};

/// One classical 4th-order Runge-Kutta step; field(t, x) -> xdot.
template <class Field>
Vector rk4_step(Field&& field, const Vector& x, double t, double step) {
  const Vector k1 = field(t, x);
  const Vector k2 = field(t + 0.5 * step, x + (0.5 * step) * k1);
  const Vector k3 = field(t + 0.5 * step, x + (0.5 * step) * k2);
  const Vector k4 = field(t + step, x + step * k3);
  if (!k1.allFinite() || !k2.allFinite() || !k3.allFinite() || !k4.allFinite())
    throw NonFiniteValue("rk4_step: a stage evaluated to a non-finite value");
  return x + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Coupled step for xdot = f(x), Zdot = A(x) Z on a shared stage grid.
template <class Field, class Coefficient>
void rk4_variational_step(Field&& field, Coefficient&& coefficient, Vector& x,
                          Matrix& z, double step) {
  const Vector k1x = field(x);
  const Matrix k1z = coefficient(x) * z;
  const Vector x2 = x + (0.5 * step) * k1x;
  const Vector k2x = field(x2);
  const Matrix k2z = coefficient(x2) * (z + (0.5 * step) * k1z);
  const Vector x3 = x + (0.5 * step) * k2x;
  const Vector k3x = field(x3);
  const Matrix k3z = coefficient(x3) * (z + (0.5 * step) * k2z);
  const Vector x4 = x + step * k3x;
  const Vector k4x = field(x4);
  const Matrix k4z = coefficient(x4) * (z + step * k3z);
  x += (step / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
  z += (step / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
  if (!x.allFinite() || !z.allFinite())
    throw NonFiniteValue("rk4_variational_step: non-finite value");
}

struct EventBracket {
  double t_a = 0.0;
  Vector x_a;
  double t_b = 0.0;
  Vector x_b;
};

/// Locate the zero of event_fn along the mode's flow inside a one-step
/// bracket. The root is seeded on a cubic Hermite dense-output interpolant,
/// polished by bisection, and the state is obtained by re-integrating from
/// (t_a, x_a) with a secant correction of the event time until
/// |event_fn(x*)| <= 1e-12 (1 + |x*|).
std::pair<double, Vector> locate_event(const AgentModel& model, Mode mode,
                                       const EventBracket& bracket,
                                       const ScalarFn& event_fn,
                                       int max_iterations = 100);

/// Event-driven fixed-step integration of one agent. Free flow alternates with
/// sliding; manifold hits are classified into crossings or sliding entries and
/// tangential exits are tracked through the sliding coefficient, confirmed by
/// the exit-derivative sign.
Trajectory integrate_hybrid(const AgentModel& model, const Vector& x0, double t0,
                            double t_end, double step,
                            const IntegrationOptions& options = {});

/// Fundamental-matrix segment of Zdot = coefficient(t) Z from t0 to t1.
Matrix integrate_ltv(const std::function<Matrix(double)>& coefficient,
                     const Matrix& z0, double t0, double t1, double step);

namespace detail {

/// Generic event localization on a caller-supplied flow: flow(dt) re-integrates
/// the bracket's left state over dt in [0, t_b - t_a]. Used by both the single
/// agent and the coupled network.
std::pair<double, Vector> locate_on_flow(
    const std::function<Vector(double)>& flow, const ScalarFn& event_fn,
    double t_a, const Vector& x_a, double t_b, const Vector& x_b,
    const Vector& f_a, const Vector& f_b, int max_iterations);

/// Fixed-step walk over [t_start, t_end] with a trailing partial step. The full
/// and reduced variational paths share this so their stage grids coincide.
template <class StepFn>
void walk_segment(double t_start, double t_end, double step, StepFn&& take) {
  double t = t_start;
  while (t < t_end) {
    const double h = std::min(step, t_end - t);
    if (h <= 0.0) break;
    take(h);
    t += h;
  }
}

}  // namespace detail

}  // namespace pwsmsf
