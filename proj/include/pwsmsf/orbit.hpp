#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pwsmsf/integrator.hpp"

namespace pwsmsf {

struct OrbitSegment {
  Mode mode = Mode::MinusRegion;
  double t_start = 0.0;
  double t_end = 0.0;
};

/// One period of the attracting orbit: an anchor in free flow, the ordered
/// mode segments tiling [0, T], the events with their saltation matrices, and
/// the fine-grid samples used to reconstruct x_S(t).
struct OrbitSkeleton {
  double period = 0.0;
  Vector anchor_state;
  Mode anchor_mode = Mode::MinusRegion;
  std::vector<OrbitSegment> segments;
  std::vector<EventRecord> events;
  std::vector<TrajectorySample> samples;
  double step = 0.0;
};

struct OrbitSearchOptions {
  double tol = 1e-10;              // anchor-recurrence max-norm tolerance
  int max_laps = 200;
  double search_horizon = 400.0;   // time budget to find the first anchor event
  std::optional<EventKind> anchor; // default: first tangential exit seen
};

/// Locate the attracting periodic orbit through x0. A recurring event of the
/// anchor kind serves as Poincare section; once consecutive anchor states agree
/// to tol, the period is the recurrence time and the skeleton is assembled from
/// one lap re-anchored at a free-flow state.
OrbitSkeleton find_periodic_orbit(const AgentModel& model, const Vector& x0,
                                  double step, const OrbitSearchOptions& options = {});

/// Max-norm return gap over one re-integrated period; the orbit quality metric.
double orbit_residual(const AgentModel& model, const OrbitSkeleton& skeleton);

/// Structural checks: segments tile [0, T], event kinds match the adjacent
/// segment modes, event times lie strictly inside (0, T).
void validate_skeleton_grammar(const OrbitSkeleton& skeleton);

nlohmann::json skeleton_to_json(const OrbitSkeleton& skeleton);
OrbitSkeleton skeleton_from_json(const nlohmann::json& doc);

const char* to_string(Mode mode);
const char* to_string(EventKind kind);
Mode mode_from_string(const std::string& name);
EventKind event_kind_from_string(const std::string& name);

}  // namespace pwsmsf
