#include <doctest.h>

#include <complex>

#include "test_support.hpp"

using namespace pwsmsf;
using pwsmsf::testing::galvanetto;
using pwsmsf::testing::galvanetto_coupling;
using pwsmsf::testing::k2_adjacency;
using pwsmsf::testing::path3_adjacency;
using pwsmsf::testing::skeleton_coarse;
using pwsmsf::testing::vec2;

namespace {

// Characteristic polynomial coefficients via Faddeev-LeVerrier, roots via
// Durand-Kerner; an eigenvalue oracle independent of the Schur path.
std::vector<Complex> charpoly_roots(const Matrix& a) {
  const int n = static_cast<int>(a.rows());
  std::vector<double> coef(n + 1, 0.0);  // p(z) = z^n + coef[1] z^{n-1} + ...
  coef[0] = 1.0;
  Matrix mk = Matrix::Zero(n, n);
  for (int k = 1; k <= n; ++k) {
    mk = a * (mk + coef[k - 1] * Matrix::Identity(n, n));
    coef[k] = -mk.trace() / k;
  }
  auto poly = [&](Complex z) {
    Complex acc(0.0, 0.0);
    for (int k = 0; k <= n; ++k) acc = acc * z + coef[k];
    return acc;
  };
  std::vector<Complex> roots(n);
  const Complex seed(0.4, 0.9);
  Complex power(1.0, 0.0);
  for (int i = 0; i < n; ++i) {
    power *= seed;
    roots[i] = power;
  }
  for (int iteration = 0; iteration < 200; ++iteration) {
    double moved = 0.0;
    for (int i = 0; i < n; ++i) {
      Complex denom(1.0, 0.0);
      for (int j = 0; j < n; ++j)
        if (j != i) denom *= roots[i] - roots[j];
      const Complex delta = poly(roots[i]) / denom;
      roots[i] -= delta;
      moved = std::max(moved, std::abs(delta));
    }
    if (moved < 1e-14) break;
  }
  std::sort(roots.begin(), roots.end(),
            [](const Complex& x, const Complex& y) { return std::abs(x) > std::abs(y); });
  return roots;
}

}  // namespace

TEST_CASE("floquet multipliers of simple matrices") {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 1.0;
  const ComplexVector md = floquet_multipliers(d);
  CHECK(std::abs(md(0) - Complex(1.0, 0.0)) <= 1e-15);
  CHECK(std::abs(md(1)) <= 1e-15);

  const double theta = 0.7;
  Matrix r(2, 2);
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  const ComplexVector mr = floquet_multipliers(r);
  CHECK(std::abs(std::abs(mr(0)) - 1.0) <= 1e-12);
  CHECK(std::abs(std::abs(mr(1)) - 1.0) <= 1e-12);
  CHECK(std::abs(std::abs(mr(0).imag()) - std::sin(theta)) <= 1e-12);

  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(floquet_multipliers(bad), NonFiniteValue);
}

TEST_CASE("floquet multipliers match the characteristic-polynomial oracle") {
  std::mt19937 rng(314159);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) a(i, j) = gauss(rng);
    const ComplexVector mults = floquet_multipliers(a);
    const std::vector<Complex> oracle = charpoly_roots(a);
    for (int i = 0; i < 4; ++i) {
      double best = 1e300;
      for (const Complex& root : oracle) best = std::min(best, std::abs(mults(i) - root));
      CHECK(best <= 1e-10);
    }
  }
}

TEST_CASE("reduced transition at nu = 0 carries the trivial multipliers") {
  const Matrix z = reduced_transition(galvanetto(), skeleton_coarse(), 0.0,
                                      galvanetto_coupling(), 1e-3);
  const ComplexVector mults = floquet_multipliers(z);
  CHECK(std::abs(mults(0) - Complex(1.0, 0.0)) <= 1e-6);
  CHECK(std::abs(mults(1)) <= 1e-12);
}

TEST_CASE("sliding reduced coefficient loses its coupling term for galvanetto") {
  const OrbitSkeleton& skeleton = skeleton_coarse();
  for (const TrajectorySample& sample : skeleton.samples) {
    if (sample.mode != Mode::Sliding) continue;
    const Matrix with_nu = reduced_coefficient(galvanetto(), Mode::Sliding, sample.state,
                                               -9.6, galvanetto_coupling());
    const Matrix without = reduced_coefficient(galvanetto(), Mode::Sliding, sample.state,
                                               0.0, galvanetto_coupling());
    CHECK((with_nu - without).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("reduced transition matches perturbation propagation at nu = 0") {
  const AgentModel& model = galvanetto();
  const OrbitSkeleton& skeleton = skeleton_coarse();
  const Matrix z = reduced_transition(model, skeleton, 0.0, galvanetto_coupling(),
                                      skeleton.step);

  IntegrationOptions scan;
  scan.record_samples = false;
  auto flow_end = [&](const Vector& x0) {
    return integrate_hybrid(model, x0, 0.0, skeleton.period, skeleton.step, scan)
        .samples.back()
        .state;
  };
  const Vector base = flow_end(skeleton.anchor_state);
  const double delta = 1e-6;
  for (int j = 0; j < 2; ++j) {
    Vector perturbed = skeleton.anchor_state;
    perturbed(j) += delta;
    const Vector fd_column = (flow_end(perturbed) - base) / delta;
    CHECK((fd_column - z.col(j)).cwiseAbs().maxCoeff() <= 1e-4);
  }
}

TEST_CASE("msf at sigma = 0 is marginal") {
  const NetworkTopology topo = build_topology(k2_adjacency(), galvanetto_coupling(), 0.0);
  const MSFRow row = msf_value(galvanetto(), skeleton_coarse(), topo, 0.0, 1e-3);
  REQUIRE(row.multipliers.size() == 2);
  CHECK(std::abs(row.multipliers[1](0) - Complex(1.0, 0.0)) <= 1e-6);
  CHECK(std::abs(row.multipliers[1](1)) <= 1e-12);
  CHECK(std::abs(row.msf) <= 1e-6);
}

TEST_CASE("benchmark stability classification at the coarse step") {
  const NetworkTopology topo = build_topology(k2_adjacency(), galvanetto_coupling(), 0.0);
  const std::vector<double> sigmas = {1.0, 1.2, 2.6, 2.7, 4.8};
  const std::vector<bool> expected = {false, false, false, true, true};
  const MSFTable table =
      msf_sweep(galvanetto(), skeleton_coarse(), topo, sigmas, 1e-3);
  REQUIRE(table.size() == sigmas.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    REQUIRE(table[i].ok);
    CHECK(table[i].stable == expected[i]);
  }
}

TEST_CASE("stability flags survive halving the variational step") {
  const NetworkTopology topo = build_topology(k2_adjacency(), galvanetto_coupling(), 0.0);
  for (double sigma : {1.0, 1.2, 2.6, 2.7, 4.8}) {
    const MSFRow at_1e3 = msf_value(galvanetto(), skeleton_coarse(), topo, sigma, 1e-3);
    const MSFRow at_5e4 = msf_value(galvanetto(), skeleton_coarse(), topo, sigma, 5e-4);
    CHECK(at_1e3.stable == at_5e4.stable);
  }
}

TEST_CASE("sweep rows are deterministic and thread-count independent") {
  const NetworkTopology topo = build_topology(k2_adjacency(), galvanetto_coupling(), 0.0);
  const std::vector<double> sigmas = {2.7, 1.0, 2.7};
  const MSFTable serial = msf_sweep(galvanetto(), skeleton_coarse(), topo, sigmas, 1e-3, 1);
  const MSFTable threaded = msf_sweep(galvanetto(), skeleton_coarse(), topo, sigmas, 1e-3, 3);
  REQUIRE(serial.size() == threaded.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].msf == threaded[i].msf);
    for (std::size_t b = 0; b < serial[i].multipliers.size(); ++b)
      CHECK(serial[i].multipliers[b] == threaded[i].multipliers[b]);
  }
  CHECK(serial[0].msf == serial[2].msf);
  CHECK(serial[0].multipliers[1] == serial[2].multipliers[1]);
}

TEST_CASE("full and reduced spectra agree") {
  const NetworkTopology k2 = build_topology(k2_adjacency(), galvanetto_coupling(), 0.0);

  SUBCASE("coupled two-node network") {
    const ValidationReport report = validate_against_full(
        galvanetto(), skeleton_coarse(), k2, 2.7, skeleton_coarse().step);
    CHECK(report.matching_distance <= 1e-8);
    CHECK(report.b_row_residual <= 1e-12);
    CHECK(report.saltation_field_residual <= 1e-12);
    CHECK(report.saltation_projection_residual <= 1e-12);
    CHECK(report.eb_norm <= 1e-12);
    CHECK(report.pass);
  }

  SUBCASE("uncoupled network duplicates the reduced multipliers") {
    const ValidationReport report = validate_against_full(
        galvanetto(), skeleton_coarse(), k2, 0.0, skeleton_coarse().step);
    CHECK(report.matching_distance <= 1e-12);
  }

  SUBCASE("three-node path graph") {
    const NetworkTopology p3 = build_topology(path3_adjacency(), galvanetto_coupling(), 0.0);
    const ValidationReport report = validate_against_full(
        galvanetto(), skeleton_coarse(), p3, 1.0, skeleton_coarse().step);
    CHECK(report.matching_distance <= 1e-8);
    CHECK(report.pass);
  }
}

TEST_CASE("validation guards the dense-computation size") {
  const int big = 33;  // n*N = 66 > 64
  Matrix ring = Matrix::Zero(big, big);
  for (int i = 0; i < big; ++i) {
    ring(i, (i + 1) % big) = 1.0;
    ring((i + 1) % big, i) = 1.0;
  }
  const NetworkTopology topo = build_topology(ring, galvanetto_coupling(), 0.0);
  CHECK_THROWS_AS(validate_against_full(galvanetto(), skeleton_coarse(), topo, 1.0, 1e-3),
                  SizeGuardExceeded);
}

TEST_CASE("sweep records failures per row and keeps going") {
  const NetworkTopology topo = build_topology(k2_adjacency(), galvanetto_coupling(), 0.0);
  OrbitSkeleton broken = skeleton_coarse();
  broken.anchor_state = vec2(std::numeric_limits<double>::quiet_NaN(), 0.0);
  const MSFTable table = msf_sweep(galvanetto(), broken, topo, {1.0, 2.0}, 1e-3);
  REQUIRE(table.size() == 2);
  CHECK(!table[0].ok);
  CHECK(!table[1].ok);
  CHECK(!table[0].error.empty());
}
