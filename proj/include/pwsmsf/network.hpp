#pragma once

#include <vector>

#include "pwsmsf/orbit.hpp"

namespace pwsmsf {

/// Undirected simple connected graph with inner coupling E and strength sigma.
/// laplacian = -D + A (negative semidefinite); spectrum sorted descending so
/// spectrum(0) = 0; eigenbasis W is orthonormal with W^T L W diagonal.
struct NetworkTopology {
  int num_agents = 0;
  Matrix adjacency;
  Matrix laplacian;
  Vector spectrum;
  Matrix eigenbasis;
  Matrix inner_coupling;
  double sigma = 0.0;
};

NetworkTopology build_topology(const Matrix& adjacency, const Matrix& inner_coupling,
                               double sigma);

/// Stacked state of length n*N with one mode per agent.
struct NetworkState {
  Vector x;
  std::vector<Mode> modes;
};

/// Coupled sliding coefficient of one agent: the tangency condition includes
/// the diffusive coupling term, and decouples across agents because each h_i
/// depends only on agent i.
double coupled_alpha(const AgentModel& model, const NetworkTopology& topology,
                     const Vector& stacked, int agent);

/// Right-hand side of the coupled network. Free agents contribute
/// f_mode(x_i) + sigma (M x)_i; sliding agents use the coupling-aware convex
/// combination, which keeps grad(h)^T block_i = 0.
Vector network_field(const AgentModel& model, const NetworkTopology& topology,
                     const NetworkState& state, double alpha_slop = 0.05);

struct NetworkEvent {
  double time = 0.0;
  int agent = 0;
  EventKind kind = EventKind::CrossMinusToPlus;
};

struct NetworkTrajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<double> sync_error;  // max over agent pairs of |x_i - x_j|
  std::vector<NetworkEvent> events;
};

struct SimulateOptions {
  int record_stride = 1;    // keep every record_stride-th grid sample
  int max_events = 10000;
  int max_event_iterations = 100;
  double alpha_slop = 0.05;
  std::optional<std::vector<Mode>> initial_modes;
};

/// Event-driven integration of the full n*N-dimensional Filippov network with
/// independent per-agent mode switching. Candidate events inside one step are
/// located individually and processed earliest-first; agents whose own trigger
/// condition is already met at that instant are handled at the same time in
/// index order (the tie is noted on stderr).
NetworkTrajectory simulate_network(const AgentModel& model,
                                   const NetworkTopology& topology, const Vector& x0,
                                   double t_end, double step,
                                   const SimulateOptions& options = {});

/// Monodromy of the full network along the synchronous orbit: per-segment
/// fundamental matrices with coefficient I_N x Df_mode + sigma L x E on free
/// segments and I_N x Df_Sigma + sigma L x (E + B) on sliding segments, with
/// I_N x S inserted at crossings and sliding entries (identity at exits).
/// A validation oracle; the production path is the reduced computation.
Matrix full_monodromy(const AgentModel& model, const NetworkTopology& topology,
                      const OrbitSkeleton& skeleton);

/// e (x) y: every agent at the same state.
Vector synchronous_state(const Vector& agent_state, int num_agents);

double max_pairwise_distance(const Vector& stacked, int dim, int num_agents);

/// Diagnostic label of the phase-space region spanned by the agents' sign
/// pattern, numbered 1..2^N along the sign tree with agent 1 most significant
/// (all-minus is 1, all-plus is 2^N). The simulator itself never enumerates
/// regions; bookkeeping is one mode per agent.
int region_index(const std::vector<bool>& agent_in_plus);

}  // namespace pwsmsf
