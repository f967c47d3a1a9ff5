#include "pwsmsf/msf.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace pwsmsf {

Matrix reduced_coefficient(const AgentModel& model, Mode mode, const Vector& x,
                           double nu, const Matrix& inner_coupling) {
  if (mode == Mode::Sliding)
    return sliding_jacobian(model, x) +
           nu * (inner_coupling + b_matrix(model, x, inner_coupling));
  return jacobian(model, mode, x) + nu * inner_coupling;
}

Matrix reduced_transition(const AgentModel& model, const OrbitSkeleton& skeleton,
                          double nu, const Matrix& inner_coupling, double step) {
  if (inner_coupling.rows() != model.dim || inner_coupling.cols() != model.dim)
    throw DimensionMismatch("reduced_transition: inner coupling must be dim x dim");
  Matrix z = Matrix::Identity(model.dim, model.dim);
  Vector x = skeleton.anchor_state;
  for (std::size_t s = 0; s < skeleton.segments.size(); ++s) {
    const OrbitSegment& seg = skeleton.segments[s];
    if (s > 0) x = skeleton.events[s - 1].state;
    auto field = [&](const Vector& state) { return eval_field(model, seg.mode, state); };
    auto coefficient = [&](const Vector& state) {
      return reduced_coefficient(model, seg.mode, state, nu, inner_coupling);
    };
    detail::walk_segment(seg.t_start, seg.t_end, step, [&](double h) {
      rk4_variational_step(field, coefficient, x, z, h);
      if (seg.mode == Mode::Sliding) x = project_onto_manifold(model, x);
    });
    if (s < skeleton.events.size()) z = skeleton.events[s].saltation * z;
  }
  return z;
}

ComplexVector floquet_multipliers(const Matrix& z) {
  if (!z.allFinite()) throw NonFiniteValue("floquet_multipliers: non-finite matrix");
  Eigen::EigenSolver<Matrix> solver(z, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    throw NonFiniteValue("floquet_multipliers: eigenvalue iteration failed");
  ComplexVector mults = solver.eigenvalues();
  std::sort(mults.data(), mults.data() + mults.size(),
            [](const Complex& a, const Complex& b) {
              if (std::abs(a) != std::abs(b)) return std::abs(a) > std::abs(b);
              if (a.real() != b.real()) return a.real() > b.real();
              return a.imag() > b.imag();
            });
  return mults;
}

namespace {

double floored_log_modulus(const Complex& tau) {
  const double modulus = std::abs(tau);
  if (modulus <= 0.0) return kLogModulusFloor;
  return std::max(std::log(modulus), kLogModulusFloor);
}

}  // namespace

MSFRow msf_value(const AgentModel& model, const OrbitSkeleton& skeleton,
                 const NetworkTopology& topology, double sigma, double step) {
  MSFRow row;
  row.sigma = sigma;
  row.multipliers.reserve(topology.num_agents);
  double worst = kLogModulusFloor;
  for (int i = 0; i < topology.num_agents; ++i) {
    const double nu = sigma * topology.spectrum(i);
    const Matrix z =
        reduced_transition(model, skeleton, nu, topology.inner_coupling, step);
    row.multipliers.push_back(floquet_multipliers(z));
    if (i >= 1)
      for (Eigen::Index j = 0; j < row.multipliers.back().size(); ++j)
        worst = std::max(worst, floored_log_modulus(row.multipliers.back()(j)));
  }
  row.msf = worst;
  row.stable = worst < 0.0;
  return row;
}

MSFTable msf_sweep(const AgentModel& model, const OrbitSkeleton& skeleton,
                   const NetworkTopology& topology,
                   const std::vector<double>& sigma_grid, double step, int jobs) {
  MSFTable table(sigma_grid.size());
  auto compute_row = [&](std::size_t index) {
    try {
      table[index] = msf_value(model, skeleton, topology, sigma_grid[index], step);
    } catch (const std::exception& err) {
      table[index] = MSFRow{};
      table[index].sigma = sigma_grid[index];
      table[index].ok = false;
      table[index].error = err.what();
    }
  };

  if (jobs <= 1 || sigma_grid.size() <= 1) {
    for (std::size_t i = 0; i < sigma_grid.size(); ++i) compute_row(i);
    return table;
  }

  std::atomic<std::size_t> next{0};
  const int workers =
      std::min<std::size_t>(jobs, sigma_grid.size());
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < sigma_grid.size();
           i = next.fetch_add(1))
        compute_row(i);
    });
  for (std::thread& worker : pool) worker.join();
  return table;
}

ValidationReport validate_against_full(const AgentModel& model,
                                       const OrbitSkeleton& skeleton,
                                       const NetworkTopology& topology, double sigma,
                                       double step) {
  const int dim = model.dim * topology.num_agents;
  if (dim > 64)
    throw SizeGuardExceeded("validate_against_full: n*N = " + std::to_string(dim) +
                            " exceeds the dense-computation guard (64)");

  ValidationReport report;
  report.sigma = sigma;

  NetworkTopology scaled = topology;
  scaled.sigma = sigma;

  const Matrix full = full_monodromy(model, scaled, skeleton);
  const ComplexVector full_eigs = floquet_multipliers(full);
  for (Eigen::Index i = 0; i < full_eigs.size(); ++i)
    report.full_spectrum.push_back(full_eigs(i));

  for (int i = 0; i < topology.num_agents; ++i) {
    const double nu = sigma * topology.spectrum(i);
    const ComplexVector mults = floquet_multipliers(
        reduced_transition(model, skeleton, nu, topology.inner_coupling, step));
    for (Eigen::Index j = 0; j < mults.size(); ++j)
      report.reduced_union.push_back(mults(j));
  }
  std::sort(report.reduced_union.begin(), report.reduced_union.end(),
            [](const Complex& a, const Complex& b) { return std::abs(a) > std::abs(b); });

  // Greedy modulus-sorted pairing.
  std::vector<bool> used(report.reduced_union.size(), false);
  double worst = 0.0;
  for (const Complex& lambda : report.full_spectrum) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_index = 0;
    for (std::size_t j = 0; j < report.reduced_union.size(); ++j) {
      if (used[j]) continue;
      const double dist = std::abs(lambda - report.reduced_union[j]);
      if (dist < best) {
        best = dist;
        best_index = j;
      }
    }
    used[best_index] = true;
    worst = std::max(worst, best / (1.0 + std::abs(lambda)));
  }
  report.matching_distance = worst;

  for (const TrajectorySample& sample : skeleton.samples) {
    if (sample.mode != Mode::Sliding) continue;
    const Matrix eb =
        topology.inner_coupling + b_matrix(model, sample.state, topology.inner_coupling);
    const Vector grad = model.switch_grad(sample.state);
    report.eb_norm = std::max(report.eb_norm, eb.norm());
    report.b_row_residual =
        std::max(report.b_row_residual, (grad.transpose() * eb).norm());
  }

  for (const EventRecord& event : skeleton.events) {
    const Vector fminus = model.field_minus(event.state);
    const Vector fplus = model.field_plus(event.state);
    Vector f_in, f_out;
    bool entry = false;
    switch (event.kind) {
      case EventKind::CrossMinusToPlus: f_in = fminus; f_out = fplus; break;
      case EventKind::CrossPlusToMinus: f_in = fplus; f_out = fminus; break;
      case EventKind::SlideEntryFromMinus:
        f_in = fminus; f_out = sliding_field(model, event.state); entry = true; break;
      case EventKind::SlideEntryFromPlus:
        f_in = fplus; f_out = sliding_field(model, event.state); entry = true; break;
      default: continue;  // tangential exits carry the identity
    }
    const double rel =
        (event.saltation * f_in - f_out).norm() / (1.0 + f_out.norm());
    report.saltation_field_residual = std::max(report.saltation_field_residual, rel);
    if (entry) {
      const Vector grad = model.switch_grad(event.state);
      report.saltation_projection_residual =
          std::max(report.saltation_projection_residual,
                   (grad.transpose() * event.saltation).norm());
    }
  }

  report.pass = report.matching_distance <= kMatchingTol &&
                report.b_row_residual <= kIdentityTol &&
                report.saltation_field_residual <= kIdentityTol &&
                report.saltation_projection_residual <= kIdentityTol;
  return report;
}

}  // namespace pwsmsf
