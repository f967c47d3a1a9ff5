#include "pwsmsf/integrator.hpp"

#include <algorithm>
#include <cmath>

namespace pwsmsf {

namespace detail {

namespace {

Vector hermite_state(const Vector& x_a, const Vector& f_a, const Vector& x_b,
                     const Vector& f_b, double width, double theta) {
  const double t2 = theta * theta;
  const double t3 = t2 * theta;
  const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
  const double h10 = t3 - 2.0 * t2 + theta;
  const double h01 = -2.0 * t3 + 3.0 * t2;
  const double h11 = t3 - t2;
  return h00 * x_a + (h10 * width) * f_a + h01 * x_b + (h11 * width) * f_b;
}

}  // namespace

std::pair<double, Vector> locate_on_flow(
    const std::function<Vector(double)>& flow, const ScalarFn& event_fn,
    double t_a, const Vector& x_a, double t_b, const Vector& x_b,
    const Vector& f_a, const Vector& f_b, int max_iterations) {
  const double width = t_b - t_a;
  const double g_a = event_fn(x_a);
  const double g_b = event_fn(x_b);
  if (g_a * g_b > 0.0)
    throw NoSignChange("locate_on_flow: event function does not change sign over the bracket");
  if (g_a == 0.0) return {t_a, x_a};

  // Seed on the cubic Hermite interpolant of the step.
  double lo_theta = 0.0, hi_theta = 1.0;
  double g_lo = g_a;
  for (int it = 0; it < 80 && hi_theta - lo_theta > 1e-15; ++it) {
    const double mid = 0.5 * (lo_theta + hi_theta);
    const double g_mid = event_fn(hermite_state(x_a, f_a, x_b, f_b, width, mid));
    if (g_lo * g_mid <= 0.0) {
      hi_theta = mid;
    } else {
      lo_theta = mid;
      g_lo = g_mid;
    }
  }

  // Polish on the re-integrated flow (Illinois regula falsi on the step offset).
  double lo = 0.0, hi = width;
  double glo = g_a, ghi = g_b;
  double dt = std::clamp(0.5 * (lo_theta + hi_theta) * width, 0.0, width);
  Vector x_star = x_b;
  for (int it = 0; it < max_iterations; ++it) {
    x_star = dt <= 0.0 ? x_a : (dt >= width ? x_b : flow(dt));
    const double g = event_fn(x_star);
    // target a decade below the documented 1e-12 * (1 + |x|) residual bound
    if (std::abs(g) <= 1e-13 * (1.0 + x_star.norm())) return {t_a + dt, x_star};
    if (g * glo > 0.0) {
      lo = dt;
      glo = g;
      ghi *= 0.5;  // Illinois: melt the stale end
    } else {
      hi = dt;
      ghi = g;
      glo *= 0.5;
    }
    if (hi - lo <= 1e-15 * std::max(width, 1.0))
      return {t_a + dt, x_star};  // bracket exhausted at machine resolution
    double next = lo - glo * (hi - lo) / (ghi - glo);
    if (!std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
    dt = next;
  }
  throw MaxIterations("locate_on_flow: event residual did not reach tolerance");
}

}  // namespace detail

std::pair<double, Vector> locate_event(const AgentModel& model, Mode mode,
                                       const EventBracket& bracket,
                                       const ScalarFn& event_fn,
                                       int max_iterations) {
  const double t_a = bracket.t_a;
  const Vector& x_a = bracket.x_a;
  const Vector f_a = eval_field(model, mode, x_a);
  const Vector f_b = eval_field(model, mode, bracket.x_b);
  auto flow = [&](double dt) {
    return rk4_step([&](double, const Vector& s) { return eval_field(model, mode, s); },
                    x_a, t_a, dt);
  };
  return detail::locate_on_flow(flow, event_fn, t_a, x_a, bracket.t_b, bracket.x_b,
                                f_a, f_b, max_iterations);
}

namespace {

Mode initial_mode(const AgentModel& model, const Vector& x0) {
  const double hval = model.switch_fn(x0);
  if (std::abs(hval) > 1e-8 * (1.0 + x0.norm()))
    return hval < 0.0 ? Mode::MinusRegion : Mode::PlusRegion;
  const PointClass cls = classify_point(model, x0);
  switch (cls.kind) {
    case PointKind::AttractiveSliding: return Mode::Sliding;
    case PointKind::TransversalCrossingUp: return Mode::PlusRegion;
    case PointKind::TransversalCrossingDown: return Mode::MinusRegion;
    case PointKind::TangentialExitMinus: return Mode::MinusRegion;
    case PointKind::TangentialExitPlus: return Mode::PlusRegion;
    default:
      throw DegenerateEvent("integrate_hybrid: initial state is a repulsive or degenerate manifold point");
  }
}

// d/dt grad(h)^T f_side along the sliding flow; sign test for exit confirmation.
double exit_derivative(const AgentModel& model, Mode side, const Vector& x) {
  const Vector grad = model.switch_grad(x);
  const Vector f_side = eval_field(model, side, x);
  const Vector gradient_of_normal =
      jacobian(model, side, x).transpose() * grad + switch_hessian(model, x) * f_side;
  return gradient_of_normal.dot(sliding_field(model, x));
}

}  // namespace

Trajectory integrate_hybrid(const AgentModel& model, const Vector& x0, double t0,
                            double t_end, double step,
                            const IntegrationOptions& options) {
  if (x0.size() != model.dim)
    throw DimensionMismatch("integrate_hybrid: initial state size mismatch");
  if (!x0.allFinite()) throw NonFiniteValue("integrate_hybrid: non-finite initial state");
  if (!(t_end > t0)) throw Error("integrate_hybrid: t_end must exceed t0");
  if (!(step > 0.0)) throw Error("integrate_hybrid: step must be positive");

  const Mode start_mode =
      options.initial_mode ? *options.initial_mode : initial_mode(model, x0);
  Mode mode = start_mode;
  Vector x = mode == Mode::Sliding ? project_onto_manifold(model, x0) : x0;
  double t = t0;

  Trajectory traj;
  if (options.record_samples) traj.samples.push_back({t, x, mode});

  auto mode_field = [&model](Mode m) {
    return [&model, m](double, const Vector& s) { return eval_field(model, m, s); };
  };

  int k = 1;
  int event_count = 0;
  while (t < t_end) {
    const double grid_time = t0 + k * step;
    const double t_target = std::min(grid_time, t_end);
    if (t_target <= t) {
      ++k;
      continue;
    }
    const double h = t_target - t;
    Vector x_new = rk4_step(mode_field(mode), x, t, h);
    if (mode == Mode::Sliding) x_new = project_onto_manifold(model, x_new);

    // Event detection over this step.
    bool triggered = false;
    ScalarFn monitor;
    bool exit_to_plus = false;
    if (mode != Mode::Sliding) {
      const double interior = mode == Mode::MinusRegion ? -1.0 : 1.0;
      const double h_old = model.switch_fn(x);
      const double h_new = model.switch_fn(x_new);
      const bool armed = h_old * interior > 1e-11 * (1.0 + x.norm());
      if (armed && h_new * interior <= 0.0) {
        triggered = true;
        monitor = model.switch_fn;
      }
    } else {
      const double a_old = sliding_alpha(model, x);
      const double a_new = sliding_alpha(model, x_new);
      if (a_old > 0.0 && a_new <= 0.0) {
        triggered = true;
        monitor = [&model](const Vector& s) { return sliding_alpha(model, s); };
      } else if (a_old < 1.0 && a_new >= 1.0) {
        triggered = true;
        exit_to_plus = true;
        monitor = [&model](const Vector& s) { return sliding_alpha(model, s) - 1.0; };
      } else if (a_new < -0.05 || a_new > 1.05) {
        throw DegenerateEvent("integrate_hybrid: sliding coefficient left [0,1] without a tracked exit");
      }
    }

    if (!triggered) {
      x = std::move(x_new);
      t = t_target;
      if (options.record_samples) traj.samples.push_back({t, x, mode});
      if (t_target == grid_time) ++k;
      continue;
    }

    EventBracket bracket{t, x, t_target, x_new};
    auto [t_star, x_star] =
        locate_event(model, mode, bracket, monitor, options.max_event_iterations);
    x_star = project_onto_manifold(model, x_star);

    EventRecord record;
    record.time = t_star;
    record.state = x_star;
    if (mode != Mode::Sliding) {
      const PointClass cls = classify_point(model, x_star);
      const bool from_minus = mode == Mode::MinusRegion;
      if (cls.kind == PointKind::AttractiveSliding) {
        record.kind = from_minus ? EventKind::SlideEntryFromMinus
                                 : EventKind::SlideEntryFromPlus;
        record.saltation = saltation_slide_entry(model, x_star, mode);
        mode = Mode::Sliding;
      } else if (from_minus && cls.kind == PointKind::TransversalCrossingUp) {
        record.kind = EventKind::CrossMinusToPlus;
        record.saltation =
            saltation_crossing(model, x_star, CrossingDirection::MinusToPlus);
        mode = Mode::PlusRegion;
      } else if (!from_minus && cls.kind == PointKind::TransversalCrossingDown) {
        record.kind = EventKind::CrossPlusToMinus;
        record.saltation =
            saltation_crossing(model, x_star, CrossingDirection::PlusToMinus);
        mode = Mode::MinusRegion;
      } else {
        throw DegenerateEvent(
            "integrate_hybrid: non-generic manifold encounter (normal components " +
            std::to_string(cls.normal_minus) + ", " + std::to_string(cls.normal_plus) + ")");
      }
    } else {
      const Mode side = exit_to_plus ? Mode::PlusRegion : Mode::MinusRegion;
      const double ddt = exit_derivative(model, side, x_star);
      const double band = 1e-9 * (1.0 + eval_field(model, side, x_star).norm());
      const bool confirmed = exit_to_plus ? ddt > band : ddt < -band;
      if (!confirmed)
        throw DegenerateEvent("integrate_hybrid: tangential exit failed the derivative condition");
      record.kind = exit_to_plus ? EventKind::TangentialExitToPlus
                                 : EventKind::TangentialExitToMinus;
      record.saltation = Matrix::Identity(model.dim, model.dim);
      mode = side;
    }

    if (++event_count > options.max_events)
      throw ChatterDetected("integrate_hybrid: more than " +
                            std::to_string(options.max_events) + " events");
    traj.events.push_back(record);
    x = std::move(x_star);
    t = t_star;
    if (options.record_samples) traj.samples.push_back({t, x, mode});
    while (t0 + k * step <= t) ++k;
  }

  if (!options.record_samples) traj.samples.push_back({t, x, mode});
  return traj;
}

Matrix integrate_ltv(const std::function<Matrix(double)>& coefficient,
                     const Matrix& z0, double t0, double t1, double step) {
  if (!(step > 0.0)) throw Error("integrate_ltv: step must be positive");
  if (t1 < t0) throw Error("integrate_ltv: t1 must not precede t0");
  Matrix z = z0;
  double t = t0;
  while (t < t1) {
    const double h = std::min(step, t1 - t);
    if (h <= 0.0) break;
    const Matrix k1 = coefficient(t) * z;
    const Matrix a_mid = coefficient(t + 0.5 * h);
    const Matrix k2 = a_mid * (z + (0.5 * h) * k1);
    const Matrix k3 = a_mid * (z + (0.5 * h) * k2);
    const Matrix k4 = coefficient(t + h) * (z + h * k3);
    z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!z.allFinite()) throw NonFiniteValue("integrate_ltv: non-finite value");
    t += h;
  }
  return z;
}

}  // namespace pwsmsf
