#include <doctest.h>

#include "test_support.hpp"

using namespace pwsmsf;
using pwsmsf::testing::galvanetto;
using pwsmsf::testing::galvanetto_coupling;
using pwsmsf::testing::k2_adjacency;
using pwsmsf::testing::path3_adjacency;
using pwsmsf::testing::skeleton_coarse;
using pwsmsf::testing::vec2;

TEST_CASE("topology of the two-node complete graph") {
  const NetworkTopology topo = build_topology(k2_adjacency(), galvanetto_coupling(), 1.0);
  CHECK(topo.laplacian(0, 0) == -1.0);
  CHECK(topo.laplacian(0, 1) == 1.0);
  CHECK(topo.spectrum(0) == 0.0);
  CHECK(topo.spectrum(1) == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK((topo.eigenbasis.transpose() * topo.eigenbasis - Matrix::Identity(2, 2))
            .cwiseAbs()
            .maxCoeff() <= 1e-14);
}

TEST_CASE("path graph spectrum and laplacian invariants") {
  const NetworkTopology topo = build_topology(path3_adjacency(), galvanetto_coupling(), 0.5);
  CHECK(topo.spectrum(0) == 0.0);
  CHECK(topo.spectrum(1) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(topo.spectrum(2) == doctest::Approx(-3.0).epsilon(1e-12));
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(topo.laplacian.row(i).sum()) <= 1e-14);
}

TEST_CASE("malformed topologies are rejected") {
  Matrix disconnected = Matrix::Zero(4, 4);
  disconnected(0, 1) = disconnected(1, 0) = 1.0;
  disconnected(2, 3) = disconnected(3, 2) = 1.0;
  CHECK_THROWS_AS(build_topology(disconnected, galvanetto_coupling(), 1.0), NotConnected);

  Matrix asymmetric = Matrix::Zero(2, 2);
  asymmetric(0, 1) = 1.0;
  CHECK_THROWS_AS(build_topology(asymmetric, galvanetto_coupling(), 1.0), NotSymmetric);

  Matrix weighted = k2_adjacency();
  weighted(0, 1) = weighted(1, 0) = 0.5;
  CHECK_THROWS_AS(build_topology(weighted, galvanetto_coupling(), 1.0), ConfigError);

  CHECK_THROWS_AS(build_topology(k2_adjacency(), galvanetto_coupling(), -1.0), ConfigError);
}

TEST_CASE("kronecker transform diagonalizes the coupling") {
  for (const Matrix& adjacency : {k2_adjacency(), path3_adjacency()}) {
    const NetworkTopology topo = build_topology(adjacency, galvanetto_coupling(), 1.0);
    const int n = 2;
    const Matrix w_big = kron(topo.eigenbasis, Matrix::Identity(n, n));
    const Matrix coupled = kron(topo.laplacian, topo.inner_coupling);
    const Matrix lambda_e =
        kron(Matrix(topo.spectrum.asDiagonal()), topo.inner_coupling);
    CHECK((w_big.transpose() * coupled * w_big - lambda_e).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("synchronous states are in the coupling kernel") {
  const NetworkTopology topo = build_topology(path3_adjacency(), galvanetto_coupling(), 2.0);
  const Vector sync = synchronous_state(vec2(0.37, -1.41), 3);
  const Matrix m = kron(topo.laplacian, topo.inner_coupling);
  CHECK((m * sync).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("network field blocks") {
  const AgentModel& model = galvanetto();

  SUBCASE("synchronous sliding state feels the single-agent sliding field") {
    const NetworkTopology topo = build_topology(k2_adjacency(), galvanetto_coupling(), 1.75);
    NetworkState state;
    state.x = synchronous_state(vec2(0.0, 0.15), 2);
    state.modes = {Mode::Sliding, Mode::Sliding};
    const Vector f = network_field(model, topo, state);
    const Vector fs = sliding_field(model, vec2(0.0, 0.15));
    CHECK((f.segment(0, 2) - fs).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((f.segment(2, 2) - fs).cwiseAbs().maxCoeff() <= 1e-12);
  }

  SUBCASE("sigma = 0 decouples the agents") {
    const NetworkTopology topo = build_topology(k2_adjacency(), galvanetto_coupling(), 0.0);
    NetworkState state;
    state.x = Vector(4);
    state.x << 0.2, -0.4, -1.1, 0.6;
    state.modes = {Mode::MinusRegion, Mode::PlusRegion};
    const Vector f = network_field(model, topo, state);
    CHECK(f.segment(0, 2) == model.field_minus(state.x.segment(0, 2)));
    CHECK(f.segment(2, 2) == model.field_plus(state.x.segment(2, 2)));
  }

  SUBCASE("coupled sliding block stays tangent") {
    const NetworkTopology topo = build_topology(k2_adjacency(), galvanetto_coupling(), 1.0);
    NetworkState state;
    state.x = Vector(4);
    state.x << 0.0, 0.15, 0.0, 0.14;
    state.modes = {Mode::Sliding, Mode::MinusRegion};
    const Vector f = network_field(model, topo, state);
    const Vector grad = model.switch_grad(state.x.segment(0, 2));
    CHECK(std::abs(grad.dot(f.segment(0, 2))) <= 1e-12);
  }

  SUBCASE("the sliding coefficient of one agent ignores other agents' modes") {
    const NetworkTopology topo = build_topology(k2_adjacency(), galvanetto_coupling(), 1.3);
    Vector x(4);
    x << 0.1, 0.15, -0.2, 0.05;
    const double alpha = coupled_alpha(galvanetto(), topo, x, 0);
    for (Mode other : {Mode::MinusRegion, Mode::PlusRegion}) {
      NetworkState state{x, {Mode::Sliding, other}};
      const Vector f = network_field(galvanetto(), topo, state);
      const Vector grad = galvanetto().switch_grad(x.segment(0, 2));
      CHECK(std::abs(grad.dot(f.segment(0, 2))) <= 1e-12);
      CHECK(coupled_alpha(galvanetto(), topo, x, 0) == alpha);
    }
  }
}

TEST_CASE("identical agents stay synchronized") {
  const AgentModel& model = galvanetto();
  const NetworkTopology topo = build_topology(k2_adjacency(), galvanetto_coupling(), 1.7);
  const Vector x0 = synchronous_state(vec2(0.3, -0.2), 2);
  const NetworkTrajectory traj = simulate_network(model, topo, x0, 30.0, 1e-3);
  for (double err : traj.sync_error) CHECK(err <= 1e-10);
}

TEST_CASE("uncoupled full monodromy is block diagonal with multipliers {1,0} twice") {
  const AgentModel& model = galvanetto();
  const OrbitSkeleton& skeleton = skeleton_coarse();
  const NetworkTopology topo = build_topology(k2_adjacency(), galvanetto_coupling(), 0.0);

  const Matrix full = full_monodromy(model, topo, skeleton);
  const Matrix reduced = reduced_transition(model, skeleton, 0.0,
                                            topo.inner_coupling, skeleton.step);
  const Matrix block_diag = kron(Matrix::Identity(2, 2), reduced);
  CHECK((full - block_diag).cwiseAbs().maxCoeff() <= 1e-13);

  const ComplexVector eigs = floquet_multipliers(full);
  CHECK(std::abs(eigs(0) - Complex(1.0, 0.0)) <= 1e-6);
  CHECK(std::abs(eigs(1) - Complex(1.0, 0.0)) <= 1e-6);
  CHECK(std::abs(eigs(2)) <= 1e-12);
  CHECK(std::abs(eigs(3)) <= 1e-12);
}

TEST_CASE("region labels follow the sign tree") {
  CHECK(region_index({false, false, false}) == 1);
  CHECK(region_index({false, false, true}) == 2);
  CHECK(region_index({false, true, false}) == 3);
  CHECK(region_index({true, true, true}) == 8);
  CHECK(region_index({false, false}) == 1);
  CHECK(region_index({true, false}) == 3);
}

TEST_CASE("saltation kronecker blocks are invariant under the eigenbasis change") {
  const OrbitSkeleton& skeleton = skeleton_coarse();
  const NetworkTopology topo = build_topology(k2_adjacency(), galvanetto_coupling(), 1.0);
  REQUIRE(!skeleton.events.empty());
  const Matrix s = skeleton.events.front().saltation;
  const Matrix v = kron(topo.eigenbasis, Matrix::Identity(2, 2));
  const Matrix transformed = v.transpose() * kron(Matrix::Identity(2, 2), s) * v;
  CHECK((transformed - kron(Matrix::Identity(2, 2), s)).cwiseAbs().maxCoeff() <= 1e-13);
}
