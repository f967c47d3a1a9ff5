#include "pwsmsf/network.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace pwsmsf {

NetworkTopology build_topology(const Matrix& adjacency, const Matrix& inner_coupling,
                               double sigma) {
  const Eigen::Index n_agents = adjacency.rows();
  if (adjacency.cols() != n_agents)
    throw DimensionMismatch("build_topology: adjacency must be square");
  if (inner_coupling.rows() != inner_coupling.cols())
    throw DimensionMismatch("build_topology: inner coupling must be square");
  if (sigma < 0.0) throw ConfigError("build_topology: sigma must be nonnegative");
  for (Eigen::Index i = 0; i < n_agents; ++i) {
    if (adjacency(i, i) != 0.0)
      throw ConfigError("build_topology: adjacency diagonal must be zero");
    for (Eigen::Index j = 0; j < n_agents; ++j) {
      if (adjacency(i, j) != 0.0 && adjacency(i, j) != 1.0)
        throw ConfigError("build_topology: adjacency entries must be 0 or 1");
      if (adjacency(i, j) != adjacency(j, i))
        throw NotSymmetric("build_topology: adjacency is not symmetric");
    }
  }

  NetworkTopology topo;
  topo.num_agents = static_cast<int>(n_agents);
  topo.adjacency = adjacency;
  topo.laplacian = adjacency;
  for (Eigen::Index i = 0; i < n_agents; ++i)
    topo.laplacian(i, i) = -adjacency.row(i).sum();
  topo.inner_coupling = inner_coupling;
  topo.sigma = sigma;

  Eigen::SelfAdjointEigenSolver<Matrix> solver(topo.laplacian);
  if (solver.info() != Eigen::Success)
    throw NonFiniteValue("build_topology: eigendecomposition failed");
  // Eigen sorts ascending; flip to descending so index 0 carries lambda = 0.
  topo.spectrum = solver.eigenvalues().reverse();
  topo.eigenbasis = solver.eigenvectors().rowwise().reverse();
  if (std::abs(topo.spectrum(0)) > 1e-9)
    throw NotConnected("build_topology: Laplacian kernel eigenvalue off zero");
  if (n_agents > 1 && topo.spectrum(1) > -1e-9)
    throw NotConnected("build_topology: zero eigenvalue has multiplicity > 1");
  topo.spectrum(0) = 0.0;  // exact kernel of the integer Laplacian
  return topo;
}

Vector synchronous_state(const Vector& agent_state, int num_agents) {
  Vector out(agent_state.size() * num_agents);
  for (int i = 0; i < num_agents; ++i)
    out.segment(i * agent_state.size(), agent_state.size()) = agent_state;
  return out;
}

double max_pairwise_distance(const Vector& stacked, int dim, int num_agents) {
  double worst = 0.0;
  for (int i = 0; i < num_agents; ++i)
    for (int j = i + 1; j < num_agents; ++j)
      worst = std::max(worst, (stacked.segment(i * dim, dim) -
                               stacked.segment(j * dim, dim)).norm());
  return worst;
}

int region_index(const std::vector<bool>& agent_in_plus) {
  int label = 1;
  for (bool in_plus : agent_in_plus) label = 2 * label - 1 + (in_plus ? 1 : 0);
  return label;
}

namespace {

// sigma * (M x)_i = sigma * sum_j L_ij E x_j
Vector coupling_block(const AgentModel& model, const NetworkTopology& topology,
                      const Vector& stacked, int agent) {
  const int n = model.dim;
  Vector c = Vector::Zero(n);
  for (int j = 0; j < topology.num_agents; ++j) {
    const double lij = topology.laplacian(agent, j);
    if (lij != 0.0) c += lij * (topology.inner_coupling * stacked.segment(j * n, n));
  }
  return topology.sigma * c;
}

// Normal components of the coupled fields of one agent.
std::pair<double, double> coupled_normals(const AgentModel& model,
                                          const NetworkTopology& topology,
                                          const Vector& stacked, int agent) {
  const int n = model.dim;
  const Vector xi = stacked.segment(agent * n, n);
  const Vector grad = model.switch_grad(xi);
  const double cn = grad.dot(coupling_block(model, topology, stacked, agent));
  return {grad.dot(model.field_minus(xi)) + cn, grad.dot(model.field_plus(xi)) + cn};
}

}  // namespace

double coupled_alpha(const AgentModel& model, const NetworkTopology& topology,
                     const Vector& stacked, int agent) {
  const auto [wm, wp] = coupled_normals(model, topology, stacked, agent);
  const int n = model.dim;
  const Vector xi = stacked.segment(agent * n, n);
  const double scale =
      1.0 + std::max(model.field_minus(xi).norm(), model.field_plus(xi).norm());
  if (std::abs(wm - wp) <= 1e-12 * scale)
    throw DegenerateDenominator("coupled_alpha: grad(h)^T (f^- - f^+) vanishes");
  return wm / (wm - wp);
}

Vector network_field(const AgentModel& model, const NetworkTopology& topology,
                     const NetworkState& state, double alpha_slop) {
  const int n = model.dim;
  const int num = topology.num_agents;
  if (state.x.size() != static_cast<Eigen::Index>(n) * num)
    throw DimensionMismatch("network_field: stacked state has the wrong length");
  if (static_cast<int>(state.modes.size()) != num)
    throw DimensionMismatch("network_field: one mode per agent required");
  if (topology.inner_coupling.rows() != n)
    throw DimensionMismatch("network_field: inner coupling size differs from agent dimension");

  Vector out(state.x.size());
  for (int i = 0; i < num; ++i) {
    const Vector xi = state.x.segment(i * n, n);
    const Vector ci = coupling_block(model, topology, state.x, i);
    Vector block;
    if (state.modes[i] == Mode::MinusRegion) {
      block = model.field_minus(xi) + ci;
    } else if (state.modes[i] == Mode::PlusRegion) {
      block = model.field_plus(xi) + ci;
    } else {
      const double alpha = coupled_alpha(model, topology, state.x, i);
      if (alpha < -alpha_slop || alpha > 1.0 + alpha_slop)
        throw SlidingLost("network_field: sliding coefficient of agent " +
                          std::to_string(i) + " is " + std::to_string(alpha));
      block = (1.0 - alpha) * model.field_minus(xi) +
              alpha * model.field_plus(xi) + ci;
    }
    out.segment(i * n, n) = block;
  }
  return out;
}

namespace {

struct Candidate {
  int agent = 0;
  bool manifold_hit = false;
  bool exit_to_plus = false;
  double t_star = 0.0;
  Vector x_star;
};

class NetworkSimulator {
 public:
  NetworkSimulator(const AgentModel& model, const NetworkTopology& topology,
                   const SimulateOptions& options)
      : model_(model), topo_(topology), opts_(options) {}

  NetworkTrajectory run(const Vector& x0, double t_end, double step) {
    const int n = model_.dim;
    const int num = topo_.num_agents;
    if (x0.size() != static_cast<Eigen::Index>(n) * num)
      throw DimensionMismatch("simulate_network: initial state has the wrong length");
    if (!(step > 0.0) || !(t_end > 0.0))
      throw Error("simulate_network: horizon and step must be positive");

    Vector x = x0;
    modes_ = opts_.initial_modes ? *opts_.initial_modes : initial_modes(x);
    if (static_cast<int>(modes_.size()) != num)
      throw DimensionMismatch("simulate_network: one initial mode per agent required");
    project_sliding(x);

    NetworkTrajectory traj;
    record(traj, 0.0, x, true);

    double t = 0.0;
    int k = 1;
    int grid_count = 0;
    int event_count = 0;
    while (t < t_end) {
      const double grid_time = k * step;
      const double t_target = std::min(grid_time, t_end);
      if (t_target <= t) {
        ++k;
        continue;
      }
      const double h = t_target - t;
      Vector x_new = flow_step(x, h);

      std::vector<Candidate> candidates = detect(x, x_new, t, h);
      if (candidates.empty()) {
        x = std::move(x_new);
        t = t_target;
        ++grid_count;
        const bool keep = t >= t_end || grid_count % opts_.record_stride == 0;
        record(traj, t, x, keep);
        if (t_target == grid_time) ++k;
        continue;
      }

      // Earliest event wins; exact ties fall back to agent index order.
      std::stable_sort(candidates.begin(), candidates.end(),
                       [](const Candidate& a, const Candidate& b) {
                         return a.t_star < b.t_star;
                       });
      if (candidates.size() > 1 &&
          candidates[1].t_star - candidates[0].t_star <= 1e-12 * (1.0 + t))
        std::clog << "simulate_network: simultaneous events at t=" << candidates[0].t_star
                  << "; processing agents in index order\n";

      const Candidate& chosen = candidates.front();
      x = chosen.x_star;
      t = chosen.t_star;
      process_event(traj, chosen, x, event_count);
      sweep_same_instant(traj, x, t, chosen.agent, event_count);
      project_sliding(x);
      record(traj, t, x, true);
      while (k * step <= t) ++k;
    }
    return traj;
  }

 private:
  std::vector<Mode> initial_modes(const Vector& x) const {
    const int n = model_.dim;
    std::vector<Mode> modes(topo_.num_agents);
    for (int i = 0; i < topo_.num_agents; ++i) {
      const Vector xi = x.segment(i * n, n);
      const double hval = model_.switch_fn(xi);
      if (std::abs(hval) > 1e-8 * (1.0 + xi.norm())) {
        modes[i] = hval < 0.0 ? Mode::MinusRegion : Mode::PlusRegion;
        continue;
      }
      const auto [wm, wp] = coupled_normals(model_, topo_, x, i);
      switch (classify_scalars(wm, wp, zero_band(xi))) {
        case PointKind::AttractiveSliding: modes[i] = Mode::Sliding; break;
        case PointKind::TransversalCrossingUp: modes[i] = Mode::PlusRegion; break;
        case PointKind::TransversalCrossingDown: modes[i] = Mode::MinusRegion; break;
        case PointKind::TangentialExitMinus: modes[i] = Mode::MinusRegion; break;
        case PointKind::TangentialExitPlus: modes[i] = Mode::PlusRegion; break;
        default:
          throw DegenerateEvent("simulate_network: agent " + std::to_string(i) +
                                " starts at a repulsive or degenerate point");
      }
    }
    return modes;
  }

  double zero_band(const Vector& xi) const {
    return 1e-9 * (1.0 + std::max(model_.field_minus(xi).norm(),
                                  model_.field_plus(xi).norm()));
  }

  void project_sliding(Vector& x) const {
    const int n = model_.dim;
    for (int i = 0; i < topo_.num_agents; ++i)
      if (modes_[i] == Mode::Sliding)
        x.segment(i * n, n) = project_onto_manifold(model_, x.segment(i * n, n));
  }

  Vector flow_step(const Vector& x, double h) const {
    NetworkState state{x, modes_};
    Vector out = rk4_step(
        [&](double, const Vector& s) {
          NetworkState probe{s, modes_};
          return network_field(model_, topo_, probe, opts_.alpha_slop);
        },
        x, 0.0, h);
    project_sliding(out);
    return out;
  }

  std::vector<Candidate> detect(const Vector& x, const Vector& x_new, double t,
                                double h) {
    const int n = model_.dim;
    std::vector<Candidate> found;
    for (int i = 0; i < topo_.num_agents; ++i) {
      Candidate cand;
      cand.agent = i;
      ScalarFn monitor;
      if (modes_[i] != Mode::Sliding) {
        const double interior = modes_[i] == Mode::MinusRegion ? -1.0 : 1.0;
        const Vector xi = x.segment(i * n, n);
        const double h_old = model_.switch_fn(xi);
        const double h_new = model_.switch_fn(x_new.segment(i * n, n));
        if (!(h_old * interior > 1e-11 * (1.0 + xi.norm()) && h_new * interior <= 0.0))
          continue;
        cand.manifold_hit = true;
        monitor = [this, i, n](const Vector& s) {
          return model_.switch_fn(s.segment(i * n, n));
        };
      } else {
        const double a_old = coupled_alpha(model_, topo_, x, i);
        const double a_new = coupled_alpha(model_, topo_, x_new, i);
        if (a_old > 0.0 && a_new <= 0.0) {
          monitor = [this, i](const Vector& s) {
            return coupled_alpha(model_, topo_, s, i);
          };
        } else if (a_old < 1.0 && a_new >= 1.0) {
          cand.exit_to_plus = true;
          monitor = [this, i](const Vector& s) {
            return coupled_alpha(model_, topo_, s, i) - 1.0;
          };
        } else if (a_new < -opts_.alpha_slop || a_new > 1.0 + opts_.alpha_slop) {
          throw SlidingLost("simulate_network: agent " + std::to_string(i) +
                            " lost sliding without a tracked exit");
        } else {
          continue;
        }
      }
      auto flow = [&](double dt) { return flow_step(x, dt); };
      NetworkState sa{x, modes_};
      NetworkState sb{x_new, modes_};
      const Vector f_a = network_field(model_, topo_, sa, opts_.alpha_slop);
      const Vector f_b = network_field(model_, topo_, sb, opts_.alpha_slop);
      auto [t_star, x_star] =
          detail::locate_on_flow(flow, monitor, t, x, t + h, x_new, f_a, f_b,
                                 opts_.max_event_iterations);
      cand.t_star = t_star;
      cand.x_star = std::move(x_star);
      found.push_back(std::move(cand));
    }
    return found;
  }

  void process_event(NetworkTrajectory& traj, const Candidate& cand, Vector& x,
                     int& event_count) {
    const int i = cand.agent;
    if (cand.manifold_hit) {
      process_manifold_hit(traj, x, cand.t_star, i, event_count);
    } else {
      process_exit(traj, x, cand.t_star, i, cand.exit_to_plus, event_count);
    }
  }

  void process_manifold_hit(NetworkTrajectory& traj, Vector& x, double t, int i,
                            int& event_count) {
    const int n = model_.dim;
    const auto [wm, wp] = coupled_normals(model_, topo_, x, i);
    const PointKind kind = classify_scalars(wm, wp, zero_band(x.segment(i * n, n)));
    const bool from_minus = modes_[i] == Mode::MinusRegion;
    EventKind event_kind;
    if (kind == PointKind::AttractiveSliding) {
      event_kind = from_minus ? EventKind::SlideEntryFromMinus
                              : EventKind::SlideEntryFromPlus;
      modes_[i] = Mode::Sliding;
      x.segment(i * n, n) = project_onto_manifold(model_, x.segment(i * n, n));
    } else if (from_minus && kind == PointKind::TransversalCrossingUp) {
      event_kind = EventKind::CrossMinusToPlus;
      modes_[i] = Mode::PlusRegion;
    } else if (!from_minus && kind == PointKind::TransversalCrossingDown) {
      event_kind = EventKind::CrossPlusToMinus;
      modes_[i] = Mode::MinusRegion;
    } else {
      throw DegenerateEvent("simulate_network: agent " + std::to_string(i) +
                            " hit its manifold non-generically (" +
                            std::to_string(wm) + ", " + std::to_string(wp) + ")");
    }
    push_event(traj, t, i, event_kind, event_count);
  }

  void process_exit(NetworkTrajectory& traj, Vector& x, double t, int i,
                    bool to_plus, int& event_count) {
    if (!confirm_exit(x, i, to_plus))
      throw DegenerateEvent("simulate_network: tangential exit of agent " +
                            std::to_string(i) + " failed the derivative condition");
    modes_[i] = to_plus ? Mode::PlusRegion : Mode::MinusRegion;
    push_event(traj, t, i,
               to_plus ? EventKind::TangentialExitToPlus
                       : EventKind::TangentialExitToMinus,
               event_count);
  }

  // Central finite difference of the coupled normal component along the flow.
  bool confirm_exit(const Vector& x, int i, bool to_plus) const {
    const int n = model_.dim;
    NetworkState state{x, modes_};
    const Vector f = network_field(model_, topo_, state, opts_.alpha_slop);
    const double delta = 1e-6 / (1.0 + f.norm());
    auto normal_side = [&](const Vector& s) {
      const Vector xi = s.segment(i * n, n);
      const Vector grad = model_.switch_grad(xi);
      const Vector fi = to_plus ? model_.field_plus(xi) : model_.field_minus(xi);
      return grad.dot(fi) + grad.dot(coupling_block(model_, topo_, s, i));
    };
    const double ddt =
        (normal_side(x + delta * f) - normal_side(x - delta * f)) / (2.0 * delta);
    const double band = 1e-9 * (1.0 + f.norm());
    return to_plus ? ddt > band : ddt < -band;
  }

  // Agents whose own trigger condition already holds at the event instant are
  // switched at the same time, in index order.
  void sweep_same_instant(NetworkTrajectory& traj, Vector& x, double t,
                          int processed, int& event_count) {
    const int n = model_.dim;
    for (int j = 0; j < topo_.num_agents; ++j) {
      if (j == processed) continue;
      if (modes_[j] == Mode::Sliding) {
        const double a = coupled_alpha(model_, topo_, x, j);
        if (a <= 0.0) {
          process_exit(traj, x, t, j, false, event_count);
        } else if (a >= 1.0) {
          process_exit(traj, x, t, j, true, event_count);
        }
        continue;
      }
      const Vector xj = x.segment(j * n, n);
      if (std::abs(model_.switch_fn(xj)) > 1e-9 * (1.0 + xj.norm())) continue;
      const auto [wm, wp] = coupled_normals(model_, topo_, x, j);
      const PointKind kind = classify_scalars(wm, wp, zero_band(xj));
      const bool from_minus = modes_[j] == Mode::MinusRegion;
      const bool entering = kind == PointKind::AttractiveSliding;
      const bool crossing = (from_minus && kind == PointKind::TransversalCrossingUp) ||
                            (!from_minus && kind == PointKind::TransversalCrossingDown);
      if (entering || crossing) process_manifold_hit(traj, x, t, j, event_count);
    }
  }

  void push_event(NetworkTrajectory& traj, double t, int agent, EventKind kind,
                  int& event_count) {
    if (++event_count > opts_.max_events)
      throw ChatterDetected("simulate_network: more than " +
                            std::to_string(opts_.max_events) + " events");
    traj.events.push_back({t, agent, kind});
  }

  void record(NetworkTrajectory& traj, double t, const Vector& x, bool keep) const {
    if (!keep) return;
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.sync_error.push_back(
        max_pairwise_distance(x, model_.dim, topo_.num_agents));
  }

  const AgentModel& model_;
  const NetworkTopology& topo_;
  const SimulateOptions& opts_;
  std::vector<Mode> modes_;
};

}  // namespace

NetworkTrajectory simulate_network(const AgentModel& model,
                                   const NetworkTopology& topology, const Vector& x0,
                                   double t_end, double step,
                                   const SimulateOptions& options) {
  NetworkSimulator sim(model, topology, options);
  return sim.run(x0, t_end, step);
}

Matrix full_monodromy(const AgentModel& model, const NetworkTopology& topology,
                      const OrbitSkeleton& skeleton) {
  const int n = model.dim;
  const int num = topology.num_agents;
  const int dim = n * num;
  const Matrix identity_blocks = Matrix::Identity(num, num);
  const Matrix sigma_le =
      topology.sigma * kron(topology.laplacian, topology.inner_coupling);

  Matrix fundamental = Matrix::Identity(dim, dim);
  Vector x = skeleton.anchor_state;
  for (std::size_t s = 0; s < skeleton.segments.size(); ++s) {
    const OrbitSegment& seg = skeleton.segments[s];
    if (s > 0) x = skeleton.events[s - 1].state;  // shared orbit nodes

    auto field = [&](const Vector& state) { return eval_field(model, seg.mode, state); };
    auto coefficient = [&](const Vector& state) -> Matrix {
      if (seg.mode == Mode::Sliding)
        return kron(identity_blocks, sliding_jacobian(model, state)) +
               topology.sigma *
                   kron(topology.laplacian,
                        topology.inner_coupling + b_matrix(model, state,
                                                           topology.inner_coupling));
      return kron(identity_blocks, jacobian(model, seg.mode, state)) + sigma_le;
    };

    detail::walk_segment(seg.t_start, seg.t_end, skeleton.step, [&](double h) {
      rk4_variational_step(field, coefficient, x, fundamental, h);
      if (seg.mode == Mode::Sliding) x = project_onto_manifold(model, x);
    });
    if (s < skeleton.events.size())
      fundamental =
          kron(identity_blocks, skeleton.events[s].saltation) * fundamental;
  }
  return fundamental;
}

}  // namespace pwsmsf
