// Acceptance suite: one pass/fail line per criterion, nonzero exit on failure.
// With no arguments every criterion runs; passing criterion numbers restricts
// the run (used to split the ctest registration).

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "test_support.hpp"

using namespace pwsmsf;
using pwsmsf::testing::galvanetto;
using pwsmsf::testing::galvanetto_coupling;
using pwsmsf::testing::k2_adjacency;
using pwsmsf::testing::path3_adjacency;
using pwsmsf::testing::vec2;

namespace {

bool g_all_pass = true;
std::set<int> g_selected;

bool selected(int criterion) {
  return g_selected.empty() || g_selected.count(criterion) > 0;
}

void report(int criterion, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
  std::fflush(stdout);
  g_all_pass = g_all_pass && ok;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) g_selected.insert(std::atoi(argv[i]));

  const AgentModel& model = galvanetto();
  const Matrix coupling = galvanetto_coupling();
  const NetworkTopology k2 = build_topology(k2_adjacency(), coupling, 0.0);
  const NetworkTopology p3 = build_topology(path3_adjacency(), coupling, 0.0);

  const bool need_fine = selected(1) || selected(2) || selected(3) || selected(4) ||
                         selected(5) || selected(6) || selected(8);
  const bool need_coarse = selected(7) || selected(8);
  OrbitSkeleton fine, coarse;
  if (need_fine) fine = find_periodic_orbit(model, vec2(0.0, 0.0), 1e-4);
  if (need_coarse) coarse = find_periodic_orbit(model, vec2(0.0, 0.0), 1e-3);

  const std::vector<double> sigmas = {1.0, 1.2, 2.6, 2.7, 4.8};
  const std::vector<bool> expected = {false, false, false, true, true};

  MSFTable table_fine;
  if (selected(1) || selected(2) || selected(8))
    table_fine = msf_sweep(model, fine, k2, sigmas, 1e-4);

  // Criterion 1: stability classification at step 1e-4.
  if (selected(1)) {
    bool ok = true;
    std::ostringstream detail;
    detail << "stability flags at sigma {1, 1.2, 2.6, 2.7, 4.8}:";
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
      const bool match = table_fine[i].ok && table_fine[i].stable == expected[i];
      ok = ok && match;
      detail << " " << (table_fine[i].stable ? "stable" : "unstable");
    }
    report(1, ok, detail.str());
  }

  // Criterion 2: trivial multipliers of the nu = 0 block for every sigma row.
  if (selected(2)) {
    bool ok = true;
    double worst_unit = 0.0, worst_zero = 0.0;
    for (const MSFRow& row : table_fine) {
      if (!row.ok || row.multipliers.empty()) {
        ok = false;
        continue;
      }
      const ComplexVector& trivial = row.multipliers.front();
      worst_unit = std::max(worst_unit, std::abs(trivial(0) - Complex(1.0, 0.0)));
      worst_zero = std::max(worst_zero, std::abs(trivial(1)));
    }
    ok = ok && worst_unit <= 1e-6 && worst_zero <= 1e-12;
    report(2, ok,
           "nu=0 multipliers: |tau_1 - 1| <= " + fmt(worst_unit) +
               " (tol 1e-6), |tau_2| <= " + fmt(worst_zero) + " (tol 1e-12)");
  }

  // Criterion 3: full-monodromy spectra match the reduced unions.
  if (selected(3)) {
    double worst = 0.0;
    bool ok = true;
    for (double sigma : {0.0, 1.0, 2.7, 4.8}) {
      const ValidationReport rep = validate_against_full(model, fine, k2, sigma, fine.step);
      worst = std::max(worst, rep.matching_distance);
      ok = ok && rep.matching_distance <= 1e-8;
    }
    for (double sigma : {0.0, 1.0}) {
      const ValidationReport rep = validate_against_full(model, fine, p3, sigma, fine.step);
      worst = std::max(worst, rep.matching_distance);
      ok = ok && rep.matching_distance <= 1e-8;
    }
    report(3, ok,
           "full/reduced spectrum pairing distance <= " + fmt(worst) +
               " over (N=2, sigma in {0,1,2.7,4.8}) and (N=3 path, sigma in {0,1}), tol 1e-8");
  }

  // Criterion 4: saltation identities on the skeleton and at random points.
  if (selected(4)) {
    double worst_map = 0.0, worst_proj = 0.0;
    for (const EventRecord& event : fine.events) {
      const Vector fminus = model.field_minus(event.state);
      const Vector fplus = model.field_plus(event.state);
      switch (event.kind) {
        case EventKind::CrossMinusToPlus:
          worst_map = std::max(worst_map, (event.saltation * fminus - fplus).norm() /
                                              (1.0 + fplus.norm()));
          break;
        case EventKind::CrossPlusToMinus:
          worst_map = std::max(worst_map, (event.saltation * fplus - fminus).norm() /
                                              (1.0 + fminus.norm()));
          break;
        case EventKind::SlideEntryFromMinus:
        case EventKind::SlideEntryFromPlus: {
          const Vector fs = sliding_field(model, event.state);
          const Vector f_in =
              event.kind == EventKind::SlideEntryFromMinus ? fminus : fplus;
          worst_map = std::max(worst_map, (event.saltation * f_in - fs).norm() /
                                              (1.0 + fs.norm()));
          worst_proj = std::max(
              worst_proj,
              (model.switch_grad(event.state).transpose() * event.saltation).norm());
          break;
        }
        default:
          break;
      }
    }
    std::mt19937 rng(1234);
    for (int trial = 0; trial < 100; ++trial) {
      if (trial % 2) {
        const auto [m, x] = pwsmsf::testing::random_manifold_point(
            rng, PointKind::TransversalCrossingUp);
        const Matrix s = saltation_crossing(m, x, CrossingDirection::MinusToPlus);
        worst_map = std::max(worst_map, (s * m.field_minus(x) - m.field_plus(x)).norm() /
                                            (1.0 + m.field_plus(x).norm()));
      } else {
        const auto [m, x] =
            pwsmsf::testing::random_manifold_point(rng, PointKind::AttractiveSliding);
        const Matrix s = saltation_slide_entry(m, x, Mode::PlusRegion);
        const Vector fs = sliding_field(m, x);
        worst_map = std::max(
            worst_map, (s * m.field_plus(x) - fs).norm() / (1.0 + fs.norm()));
        worst_proj =
            std::max(worst_proj, (m.switch_grad(x).transpose() * s).norm());
      }
    }
    const bool ok = worst_map <= 1e-12 && worst_proj <= 1e-12;
    report(4, ok,
           "saltation identities: field mapping <= " + fmt(worst_map) +
               ", gradient annihilation <= " + fmt(worst_proj) + " (tol 1e-12)");
  }

  // Criterion 5: closed forms of the built-in model.
  if (selected(5)) {
    double worst_fs = 0.0;
    for (double y1 : {-0.5, 0.0, 0.5}) {
      const Vector fs = eval_field(model, Mode::Sliding, vec2(y1, 0.15));
      worst_fs = std::max(worst_fs, std::abs(fs(0) - 0.15));
      worst_fs = std::max(worst_fs, std::abs(fs(1)));
    }
    double exit_gap = 1e300;
    for (const EventRecord& event : fine.events)
      if (event.kind == EventKind::TangentialExitToMinus ||
          event.kind == EventKind::TangentialExitToPlus)
        exit_gap = std::min(exit_gap, std::abs(event.state(0) - 1.0));
    double worst_eb = 0.0;
    for (const TrajectorySample& sample : fine.samples)
      if (sample.mode == Mode::Sliding)
        worst_eb = std::max(
            worst_eb, (coupling + b_matrix(model, sample.state, coupling)).norm());
    const bool ok = worst_fs <= 1e-12 && exit_gap <= 1e-8 && worst_eb <= 1e-12;
    report(5, ok,
           "sliding field residual " + fmt(worst_fs) + " (tol 1e-12), exit at y1=1 within " +
               fmt(exit_gap) + " (tol 1e-8), ||E+B|| <= " + fmt(worst_eb) + " (tol 1e-12)");
  }

  // Criterion 6: first-order consistency of the nu = 0 transition matrix.
  if (selected(6)) {
    const Matrix z = reduced_transition(model, fine, 0.0, coupling, fine.step);
    IntegrationOptions scan;
    scan.record_samples = false;
    auto flow_end = [&](const Vector& x0) {
      return integrate_hybrid(model, x0, 0.0, fine.period, fine.step, scan)
          .samples.back()
          .state;
    };
    const Vector base = flow_end(fine.anchor_state);
    auto discrepancy = [&](double delta) {
      double worst = 0.0;
      for (int j = 0; j < 2; ++j) {
        Vector perturbed = fine.anchor_state;
        perturbed(j) += delta;
        const Vector fd = (flow_end(perturbed) - base) / delta;
        worst = std::max(worst, (fd - z.col(j)).cwiseAbs().maxCoeff());
      }
      return worst;
    };
    const double d1 = discrepancy(1e-6);
    const double d2 = discrepancy(5e-7);
    const double ratio = d2 > 0.0 ? d1 / d2 : 2.0;
    const bool ok = d1 <= 1e-4 && ratio >= 0.5 && ratio <= 8.0;
    report(6, ok,
           "finite-difference monodromy: discrepancy " + fmt(d1) +
               " (tol 1e-4), halving ratio " + fmt(ratio) + " (expected ~2, factor-4 band)");
  }

  // Criterion 7: behavioral check of the full network simulation.
  if (selected(7)) {
    SimulateOptions opts;
    opts.record_stride = 1;
    const double horizon = 50.0 * coarse.period;

    NetworkTopology strong = k2;
    strong.sigma = 4.8;
    Vector x0 = synchronous_state(coarse.anchor_state, 2);
    x0(model.dim) += 1e-2;
    const NetworkTrajectory sync_run =
        simulate_network(model, strong, x0, horizon, 1e-3, opts);
    double min_sync = 1e300;
    for (double err : sync_run.sync_error) min_sync = std::min(min_sync, err);

    NetworkTopology weak = k2;
    weak.sigma = 1.2;
    const NetworkTrajectory unstable_run =
        simulate_network(model, weak, x0, horizon, 1e-3, opts);

    const bool strong_ok = min_sync <= 1e-6;
    const bool weak_ok = unstable_run.sync_error.back() >= unstable_run.sync_error.front();
    report(7, strong_ok && weak_ok,
           "sigma=4.8 min sync error over 50 periods = " + fmt(min_sync) +
               " (target 1e-6); sigma=1.2 final/initial = " +
               fmt(unstable_run.sync_error.back()) + "/" +
               fmt(unstable_run.sync_error.front()));

    // Context for the sigma=4.8 outcome: the transverse multiplier there is
    // 0.9271 per period, so 50 periods contract 1e-2 by at most ~2.3e-4. At
    // sigma=2.7 (multiplier 0.249) the same check clears the 1e-6 target fast.
    NetworkTopology mid = k2;
    mid.sigma = 2.7;
    const NetworkTrajectory quick =
        simulate_network(model, mid, x0, 15.0 * coarse.period, 1e-3, opts);
    double quick_min = 1e300;
    for (double err : quick.sync_error) quick_min = std::min(quick_min, err);
    std::printf("[info] criterion 7 context: sigma=2.7 reaches sync error %s within 15 periods\n",
                fmt(quick_min).c_str());
  }

  // Criterion 8: classifications and trivial multipliers are step robust.
  if (selected(8)) {
    const MSFTable table_coarse = msf_sweep(model, coarse, k2, sigmas, 1e-3);
    bool ok = std::abs(fine.period - coarse.period) <= 1e-6;
    double worst_unit = 0.0, worst_zero = 0.0;
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
      ok = ok && table_coarse[i].ok && table_coarse[i].stable == table_fine[i].stable &&
           table_coarse[i].stable == expected[i];
      const ComplexVector& trivial = table_coarse[i].multipliers.front();
      worst_unit = std::max(worst_unit, std::abs(trivial(0) - Complex(1.0, 0.0)));
      worst_zero = std::max(worst_zero, std::abs(trivial(1)));
    }
    ok = ok && worst_unit <= 1e-6 && worst_zero <= 1e-12;
    report(8, ok,
           "step 1e-3 vs 1e-4: flags identical, |T - T'| = " +
               fmt(std::abs(fine.period - coarse.period)) +
               " (tol 1e-6), trivial multipliers hold at both steps");
  }

  return g_all_pass ? 0 : 1;
}
