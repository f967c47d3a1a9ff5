#include "pwsmsf/agent.hpp"

#include <algorithm>
#include <cmath>

#include "pwsmsf/errors.hpp"

namespace pwsmsf {

namespace {

void check_dim(const AgentModel& model, const Vector& x, const char* where) {
  if (x.size() != model.dim)
    throw DimensionMismatch(std::string(where) + ": state has length " +
                            std::to_string(x.size()) + ", model dimension is " +
                            std::to_string(model.dim));
}

double field_scale(const Vector& fminus, const Vector& fplus) {
  return 1.0 + std::max(fminus.norm(), fplus.norm());
}

Matrix fd_jacobian(const FieldFn& field, const Vector& x) {
  const double step = std::cbrt(std::numeric_limits<double>::epsilon()) *
                      (1.0 + x.lpNorm<Eigen::Infinity>());
  Matrix jac(x.size(), x.size());
  Vector xp = x, xm = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    xp(j) = x(j) + step;
    xm(j) = x(j) - step;
    jac.col(j) = (field(xp) - field(xm)) / (2.0 * step);
    xp(j) = x(j);
    xm(j) = x(j);
  }
  return jac;
}

}  // namespace

std::pair<double, double> normal_components(const AgentModel& model, const Vector& x) {
  check_dim(model, x, "normal_components");
  const Vector grad = model.switch_grad(x);
  return {grad.dot(model.field_minus(x)), grad.dot(model.field_plus(x))};
}

double sliding_alpha(const AgentModel& model, const Vector& x) {
  check_dim(model, x, "sliding_alpha");
  const Vector fminus = model.field_minus(x);
  const Vector fplus = model.field_plus(x);
  const Vector grad = model.switch_grad(x);
  const double num = grad.dot(fminus);
  const double den = grad.dot(fminus - fplus);
  if (std::abs(den) <= 1e-12 * field_scale(fminus, fplus))
    throw DegenerateDenominator("sliding_alpha: grad(h)^T (f^- - f^+) vanishes");
  return num / den;
}

Vector sliding_field(const AgentModel& model, const Vector& x) {
  check_dim(model, x, "sliding_field");
  const Vector fminus = model.field_minus(x);
  const Vector fplus = model.field_plus(x);
  if ((fplus - fminus).norm() <= 1e-14 * field_scale(fminus, fplus))
    return fminus;  // fields coincide; every convex combination agrees
  const Vector grad = model.switch_grad(x);
  const double den = grad.dot(fminus - fplus);
  if (std::abs(den) <= 1e-12 * field_scale(fminus, fplus))
    throw DegenerateDenominator("sliding_field: grad(h)^T (f^- - f^+) vanishes");
  const double alpha = grad.dot(fminus) / den;
  return (1.0 - alpha) * fminus + alpha * fplus;
}

Vector eval_field(const AgentModel& model, Mode mode, const Vector& x) {
  check_dim(model, x, "eval_field");
  switch (mode) {
    case Mode::MinusRegion: return model.field_minus(x);
    case Mode::PlusRegion: return model.field_plus(x);
    case Mode::Sliding: return sliding_field(model, x);
  }
  throw Error("eval_field: unknown mode");
}

Matrix switch_hessian(const AgentModel& model, const Vector& x) {
  check_dim(model, x, "switch_hessian");
  if (model.switch_hess) return model.switch_hess(x);
  return Matrix::Zero(model.dim, model.dim);
}

Matrix jacobian(const AgentModel& model, Mode mode, const Vector& x) {
  check_dim(model, x, "jacobian");
  switch (mode) {
    case Mode::MinusRegion:
      return model.jac_minus ? model.jac_minus(x) : fd_jacobian(model.field_minus, x);
    case Mode::PlusRegion:
      return model.jac_plus ? model.jac_plus(x) : fd_jacobian(model.field_plus, x);
    case Mode::Sliding:
      return sliding_jacobian(model, x);
  }
  throw Error("jacobian: unknown mode");
}

Matrix sliding_jacobian(const AgentModel& model, const Vector& x) {
  check_dim(model, x, "sliding_jacobian");
  const Vector fminus = model.field_minus(x);
  const Vector fplus = model.field_plus(x);
  const Matrix jminus = jacobian(model, Mode::MinusRegion, x);
  if ((fplus - fminus).norm() <= 1e-14 * field_scale(fminus, fplus))
    return jminus;  // alpha terms cancel when the fields coincide
  const Matrix jplus = jacobian(model, Mode::PlusRegion, x);
  const Vector grad = model.switch_grad(x);
  const Matrix hess = switch_hessian(model, x);

  const double num = grad.dot(fminus);
  const double den = grad.dot(fminus - fplus);
  if (std::abs(den) <= 1e-12 * field_scale(fminus, fplus))
    throw DegenerateDenominator("sliding_jacobian: grad(h)^T (f^- - f^+) vanishes");
  const double alpha = num / den;

  // grad(num) and grad(den) via d/dx [grad(h)^T f] = Df^T grad(h) + Hess(h) f.
  const Vector grad_num = jminus.transpose() * grad + hess * fminus;
  const Vector grad_den =
      (jminus - jplus).transpose() * grad + hess * (fminus - fplus);
  const Vector grad_alpha = grad_num / den - (num / (den * den)) * grad_den;

  return (1.0 - alpha) * jminus + alpha * jplus +
         (fplus - fminus) * grad_alpha.transpose();
}

PointKind classify_scalars(double normal_minus, double normal_plus, double zero_band) {
  const bool minus_zero = std::abs(normal_minus) <= zero_band;
  const bool plus_zero = std::abs(normal_plus) <= zero_band;
  if (minus_zero && plus_zero) return PointKind::Degenerate;
  if (minus_zero) return normal_plus < 0.0 ? PointKind::TangentialExitMinus
                                           : PointKind::Degenerate;
  if (plus_zero) return normal_minus > 0.0 ? PointKind::TangentialExitPlus
                                           : PointKind::Degenerate;
  if (normal_minus > 0.0 && normal_plus > 0.0) return PointKind::TransversalCrossingUp;
  if (normal_minus < 0.0 && normal_plus < 0.0) return PointKind::TransversalCrossingDown;
  if (normal_minus > 0.0 && normal_plus < 0.0) return PointKind::AttractiveSliding;
  return PointKind::Repulsive;
}

PointClass classify_point(const AgentModel& model, const Vector& x,
                          double on_manifold_tol) {
  check_dim(model, x, "classify_point");
  const double hval = model.switch_fn(x);
  if (std::abs(hval) > on_manifold_tol * (1.0 + x.norm()))
    throw OffManifold("classify_point: |h(x)| = " + std::to_string(std::abs(hval)) +
                      " exceeds the on-manifold tolerance");
  const Vector fminus = model.field_minus(x);
  const Vector fplus = model.field_plus(x);
  const Vector grad = model.switch_grad(x);
  PointClass out;
  out.normal_minus = grad.dot(fminus);
  out.normal_plus = grad.dot(fplus);
  out.kind = classify_scalars(out.normal_minus, out.normal_plus,
                              1e-9 * field_scale(fminus, fplus));
  return out;
}

Matrix saltation_crossing(const AgentModel& model, const Vector& x,
                          CrossingDirection direction) {
  check_dim(model, x, "saltation_crossing");
  const PointClass cls = classify_point(model, x);
  const PointKind expected = direction == CrossingDirection::MinusToPlus
                                 ? PointKind::TransversalCrossingUp
                                 : PointKind::TransversalCrossingDown;
  if (cls.kind != expected)
    throw WrongClassification("saltation_crossing: point is not the matching transversal crossing");
  const Vector fminus = model.field_minus(x);
  const Vector fplus = model.field_plus(x);
  const Vector grad = model.switch_grad(x);
  const Vector f_in = direction == CrossingDirection::MinusToPlus ? fminus : fplus;
  const Vector f_out = direction == CrossingDirection::MinusToPlus ? fplus : fminus;
  const double den = grad.dot(f_in);
  return Matrix::Identity(model.dim, model.dim) +
         (f_out - f_in) * grad.transpose() / den;
}

Matrix saltation_slide_entry(const AgentModel& model, const Vector& x, Mode from) {
  check_dim(model, x, "saltation_slide_entry");
  if (from == Mode::Sliding)
    throw WrongClassification("saltation_slide_entry: entry must come from a region");
  const PointClass cls = classify_point(model, x);
  if (cls.kind != PointKind::AttractiveSliding)
    throw WrongClassification("saltation_slide_entry: point is not an attractive sliding point");
  const Vector fminus = model.field_minus(x);
  const Vector fplus = model.field_plus(x);
  const Vector grad = model.switch_grad(x);
  const Vector f_in = from == Mode::PlusRegion ? fplus : fminus;
  const double den = grad.dot(f_in);
  if (std::abs(den) <= 1e-12 * field_scale(fminus, fplus))
    throw DegenerateDenominator("saltation_slide_entry: grad(h)^T f_in vanishes");
  return Matrix::Identity(model.dim, model.dim) +
         (sliding_field(model, x) - f_in) * grad.transpose() / den;
}

Matrix b_matrix(const AgentModel& model, const Vector& x, const Matrix& inner_coupling) {
  check_dim(model, x, "b_matrix");
  if (inner_coupling.rows() != model.dim || inner_coupling.cols() != model.dim)
    throw DimensionMismatch("b_matrix: inner coupling must be dim x dim");
  const Vector fminus = model.field_minus(x);
  const Vector fplus = model.field_plus(x);
  const Vector grad = model.switch_grad(x);
  const double den = grad.dot(fminus - fplus);
  if (std::abs(den) <= 1e-12 * field_scale(fminus, fplus))
    throw DegenerateDenominator("b_matrix: grad(h)^T (f^- - f^+) vanishes");
  return (fplus - fminus) * (grad.transpose() * inner_coupling) / den;
}

Vector project_onto_manifold(const AgentModel& model, Vector x, double tol,
                             int max_iter) {
  check_dim(model, x, "project_onto_manifold");
  for (int it = 0; it < max_iter; ++it) {
    const double hval = model.switch_fn(x);
    if (std::abs(hval) <= tol * (1.0 + x.norm())) return x;
    const Vector grad = model.switch_grad(x);
    const double gg = grad.squaredNorm();
    if (gg <= 0.0) throw DegenerateDenominator("project_onto_manifold: grad(h) vanishes");
    x -= (hval / gg) * grad;
  }
  if (std::abs(model.switch_fn(x)) > tol * (1.0 + x.norm()))
    throw MaxIterations("project_onto_manifold: Newton projection did not converge");
  return x;
}

AgentModel make_galvanetto_model(double gamma, double vbar) {
  AgentModel m;
  m.dim = 2;
  m.name = "galvanetto";
  m.field_minus = [gamma, vbar](const Vector& y) {
    Vector f(2);
    f << y(1), -y(0) + 1.0 / (1.0 - gamma * (y(1) - vbar));
    return f;
  };
  m.field_plus = [gamma, vbar](const Vector& y) {
    Vector f(2);
    f << y(1), -y(0) - 1.0 / (1.0 + gamma * (y(1) - vbar));
    return f;
  };
  m.jac_minus = [gamma, vbar](const Vector& y) {
    const double d = 1.0 - gamma * (y(1) - vbar);
    Matrix j(2, 2);
    j << 0.0, 1.0, -1.0, gamma / (d * d);
    return j;
  };
  m.jac_plus = [gamma, vbar](const Vector& y) {
    const double d = 1.0 + gamma * (y(1) - vbar);
    Matrix j(2, 2);
    j << 0.0, 1.0, -1.0, gamma / (d * d);
    return j;
  };
  m.switch_fn = [vbar](const Vector& y) { return y(1) - vbar; };
  m.switch_grad = [](const Vector&) {
    Vector g(2);
    g << 0.0, 1.0;
    return g;
  };
  // affine switching function: zero Hessian default
  return m;
}

AgentModel make_model(const std::string& name,
                      const std::map<std::string, double>& params) {
  std::string key = name;
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  auto value = [&params](const char* field, double fallback) {
    auto it = params.find(field);
    return it == params.end() ? fallback : it->second;
  };
  if (key == "galvanetto")
    return make_galvanetto_model(value("gamma", 3.0), value("vbar", 0.15));
  throw ConfigError("make_model: unknown model '" + name +
                    "' (registered models: galvanetto)");
}

}  // namespace pwsmsf
