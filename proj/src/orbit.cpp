#include "pwsmsf/orbit.hpp"

#include <algorithm>
#include <cmath>

namespace pwsmsf {

namespace {

bool is_tangential_exit(EventKind kind) {
  return kind == EventKind::TangentialExitToMinus ||
         kind == EventKind::TangentialExitToPlus;
}

Mode mode_after(EventKind kind) {
  switch (kind) {
    case EventKind::CrossMinusToPlus: return Mode::PlusRegion;
    case EventKind::CrossPlusToMinus: return Mode::MinusRegion;
    case EventKind::SlideEntryFromMinus:
    case EventKind::SlideEntryFromPlus: return Mode::Sliding;
    case EventKind::TangentialExitToMinus: return Mode::MinusRegion;
    case EventKind::TangentialExitToPlus: return Mode::PlusRegion;
  }
  throw Error("mode_after: unknown event kind");
}

Mode mode_before(EventKind kind) {
  switch (kind) {
    case EventKind::CrossMinusToPlus: return Mode::MinusRegion;
    case EventKind::CrossPlusToMinus: return Mode::PlusRegion;
    case EventKind::SlideEntryFromMinus: return Mode::MinusRegion;
    case EventKind::SlideEntryFromPlus: return Mode::PlusRegion;
    case EventKind::TangentialExitToMinus:
    case EventKind::TangentialExitToPlus: return Mode::Sliding;
  }
  throw Error("mode_before: unknown event kind");
}

}  // namespace

OrbitSkeleton find_periodic_orbit(const AgentModel& model, const Vector& x0,
                                  double step, const OrbitSearchOptions& options) {
  IntegrationOptions scan;
  scan.record_samples = false;

  const double chunk = std::max(step * 16.0, options.search_horizon / 8.0);
  const double time_cap =
      options.search_horizon + std::max(0, options.max_laps) * chunk;

  std::optional<EventKind> anchor_kind = options.anchor;
  bool have_prev = false;
  EventRecord prev;
  EventRecord anchor_event;
  double period = 0.0;
  int laps = 0;
  bool converged = false;

  Vector x_cursor = x0;
  double t_cursor = 0.0;
  while (!converged) {
    if (!have_prev && t_cursor >= options.search_horizon)
      throw NoEventFound("find_periodic_orbit: no anchor event within the search horizon");
    if (t_cursor >= time_cap)
      throw NotConverged("find_periodic_orbit: anchor recurrence did not converge in time");

    const Trajectory traj =
        integrate_hybrid(model, x_cursor, t_cursor, t_cursor + chunk, step, scan);
    scan.initial_mode = traj.samples.back().mode;  // carry the mode across chunks
    for (const EventRecord& event : traj.events) {
      if (!anchor_kind) {
        if (is_tangential_exit(event.kind)) anchor_kind = event.kind;
      }
      if (!anchor_kind || event.kind != *anchor_kind) continue;
      if (!have_prev) {
        prev = event;
        have_prev = true;
        continue;
      }
      ++laps;
      const double gap = (event.state - prev.state).lpNorm<Eigen::Infinity>();
      period = event.time - prev.time;
      if (gap <= options.tol) {
        anchor_event = event;
        converged = true;
        break;
      }
      prev = event;
      if (laps >= options.max_laps)
        throw NotConverged("find_periodic_orbit: anchor states still differ by " +
                           std::to_string(gap) + " after " + std::to_string(laps) +
                           " laps");
    }
    x_cursor = traj.samples.back().state;
    t_cursor = traj.samples.back().time;
  }

  if (!(period > 0.0))
    throw NotConverged("find_periodic_orbit: nonpositive period estimate");

  // Shift the anchor off the event so the skeleton starts in free flow.
  scan.initial_mode.reset();
  const Trajectory lap =
      integrate_hybrid(model, anchor_event.state, 0.0, period, step, scan);
  if (lap.events.empty())
    throw NoEventFound("find_periodic_orbit: converged lap contains no events");
  double shift = -1.0;
  Mode interval_mode = mode_after(anchor_event.kind);
  double interval_start = 0.0;
  for (const EventRecord& event : lap.events) {
    if (interval_mode != Mode::Sliding && event.time > interval_start) {
      shift = 0.5 * (interval_start + event.time);
      break;
    }
    interval_start = event.time;
    interval_mode = mode_after(event.kind);
  }
  if (shift < 0.0) {
    if (interval_mode == Mode::Sliding)
      throw DegenerateEvent("find_periodic_orbit: no free-flow segment on the lap");
    shift = 0.5 * (interval_start + period);
  }
  const Trajectory to_anchor =
      integrate_hybrid(model, anchor_event.state, 0.0, shift, step, scan);
  const Vector s0 = to_anchor.samples.back().state;

  IntegrationOptions full;
  const Trajectory final_lap = integrate_hybrid(model, s0, 0.0, period, step, full);

  OrbitSkeleton skeleton;
  skeleton.period = period;
  skeleton.anchor_state = s0;
  skeleton.anchor_mode = final_lap.samples.front().mode;
  skeleton.events = final_lap.events;
  skeleton.samples = final_lap.samples;
  skeleton.step = step;

  double t_prev = 0.0;
  Mode seg_mode = skeleton.anchor_mode;
  for (const EventRecord& event : skeleton.events) {
    skeleton.segments.push_back({seg_mode, t_prev, event.time});
    t_prev = event.time;
    seg_mode = mode_after(event.kind);
  }
  skeleton.segments.push_back({seg_mode, t_prev, period});

  validate_skeleton_grammar(skeleton);

  const double closure =
      (final_lap.samples.back().state - s0).lpNorm<Eigen::Infinity>();
  if (closure > std::max(100.0 * options.tol, 1e-8))
    throw NotConverged("find_periodic_orbit: lap closure residual " +
                       std::to_string(closure));
  return skeleton;
}

double orbit_residual(const AgentModel& model, const OrbitSkeleton& skeleton) {
  IntegrationOptions scan;
  scan.record_samples = false;
  const Trajectory lap = integrate_hybrid(model, skeleton.anchor_state, 0.0,
                                          skeleton.period, skeleton.step, scan);
  return (lap.samples.back().state - skeleton.anchor_state).lpNorm<Eigen::Infinity>();
}

void validate_skeleton_grammar(const OrbitSkeleton& skeleton) {
  if (!(skeleton.period > 0.0)) throw Error("skeleton grammar: nonpositive period");
  if (skeleton.segments.empty()) throw Error("skeleton grammar: no segments");
  if (skeleton.segments.size() != skeleton.events.size() + 1)
    throw Error("skeleton grammar: segment count must exceed event count by one");
  if (skeleton.segments.front().t_start != 0.0)
    throw Error("skeleton grammar: first segment must start at 0");
  if (skeleton.segments.back().t_end != skeleton.period)
    throw Error("skeleton grammar: last segment must end at the period");
  for (std::size_t i = 0; i + 1 < skeleton.segments.size(); ++i)
    if (skeleton.segments[i].t_end != skeleton.segments[i + 1].t_start)
      throw Error("skeleton grammar: segments do not tile the period");
  for (std::size_t i = 0; i < skeleton.events.size(); ++i) {
    const EventRecord& event = skeleton.events[i];
    if (!(event.time > 0.0 && event.time < skeleton.period))
      throw Error("skeleton grammar: event time outside (0, T)");
    if (event.time != skeleton.segments[i].t_end)
      throw Error("skeleton grammar: event time does not match its segment boundary");
    if (skeleton.segments[i].mode != mode_before(event.kind))
      throw Error("skeleton grammar: event kind inconsistent with preceding mode");
    if (skeleton.segments[i + 1].mode != mode_after(event.kind))
      throw Error("skeleton grammar: event kind inconsistent with following mode");
  }
}

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::MinusRegion: return "minus";
    case Mode::PlusRegion: return "plus";
    case Mode::Sliding: return "sliding";
  }
  return "?";
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::CrossMinusToPlus: return "cross_minus_to_plus";
    case EventKind::CrossPlusToMinus: return "cross_plus_to_minus";
    case EventKind::SlideEntryFromMinus: return "slide_entry_from_minus";
    case EventKind::SlideEntryFromPlus: return "slide_entry_from_plus";
    case EventKind::TangentialExitToMinus: return "tangential_exit_to_minus";
    case EventKind::TangentialExitToPlus: return "tangential_exit_to_plus";
  }
  return "?";
}

Mode mode_from_string(const std::string& name) {
  if (name == "minus") return Mode::MinusRegion;
  if (name == "plus") return Mode::PlusRegion;
  if (name == "sliding") return Mode::Sliding;
  throw ConfigError("unknown mode name: " + name);
}

EventKind event_kind_from_string(const std::string& name) {
  if (name == "cross_minus_to_plus") return EventKind::CrossMinusToPlus;
  if (name == "cross_plus_to_minus") return EventKind::CrossPlusToMinus;
  if (name == "slide_entry_from_minus") return EventKind::SlideEntryFromMinus;
  if (name == "slide_entry_from_plus") return EventKind::SlideEntryFromPlus;
  if (name == "tangential_exit_to_minus") return EventKind::TangentialExitToMinus;
  if (name == "tangential_exit_to_plus") return EventKind::TangentialExitToPlus;
  throw ConfigError("unknown event kind: " + name);
}

namespace {

nlohmann::json vector_to_json(const Vector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

Vector vector_from_json(const nlohmann::json& doc) {
  Vector v(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) v(i) = doc[i].get<double>();
  return v;
}

Matrix matrix_from_json(const nlohmann::json& doc) {
  const std::size_t rows = doc.size();
  const std::size_t cols = rows == 0 ? 0 : doc[0].size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = doc[i][j].get<double>();
  return m;
}

}  // namespace

nlohmann::json skeleton_to_json(const OrbitSkeleton& skeleton) {
  nlohmann::json doc;
  doc["format"] = "pws-msf-skeleton";
  doc["version"] = 1;
  doc["period"] = skeleton.period;
  doc["step"] = skeleton.step;
  doc["anchor_state"] = vector_to_json(skeleton.anchor_state);
  doc["anchor_mode"] = to_string(skeleton.anchor_mode);
  doc["segments"] = nlohmann::json::array();
  for (const OrbitSegment& seg : skeleton.segments)
    doc["segments"].push_back({{"mode", to_string(seg.mode)},
                               {"t_start", seg.t_start},
                               {"t_end", seg.t_end}});
  doc["events"] = nlohmann::json::array();
  for (const EventRecord& event : skeleton.events)
    doc["events"].push_back({{"time", event.time},
                             {"kind", to_string(event.kind)},
                             {"state", vector_to_json(event.state)},
                             {"saltation", matrix_to_json(event.saltation)}});
  doc["samples"] = nlohmann::json::array();
  for (const TrajectorySample& sample : skeleton.samples)
    doc["samples"].push_back({{"time", sample.time},
                              {"state", vector_to_json(sample.state)},
                              {"mode", to_string(sample.mode)}});
  return doc;
}

OrbitSkeleton skeleton_from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "pws-msf-skeleton")
    throw ConfigError("skeleton_from_json: not a skeleton document");
  OrbitSkeleton skeleton;
  skeleton.period = doc.at("period").get<double>();
  skeleton.step = doc.at("step").get<double>();
  skeleton.anchor_state = vector_from_json(doc.at("anchor_state"));
  skeleton.anchor_mode = mode_from_string(doc.at("anchor_mode").get<std::string>());
  for (const auto& seg : doc.at("segments"))
    skeleton.segments.push_back({mode_from_string(seg.at("mode").get<std::string>()),
                                 seg.at("t_start").get<double>(),
                                 seg.at("t_end").get<double>()});
  for (const auto& event : doc.at("events")) {
    EventRecord record;
    record.time = event.at("time").get<double>();
    record.kind = event_kind_from_string(event.at("kind").get<std::string>());
    record.state = vector_from_json(event.at("state"));
    record.saltation = matrix_from_json(event.at("saltation"));
    skeleton.events.push_back(std::move(record));
  }
  for (const auto& sample : doc.at("samples"))
    skeleton.samples.push_back({sample.at("time").get<double>(),
                                vector_from_json(sample.at("state")),
                                mode_from_string(sample.at("mode").get<std::string>())});
  validate_skeleton_grammar(skeleton);
  return skeleton;
}

}  // namespace pwsmsf
