// pws-msf: orbit extraction, MSF sweeps, full-network simulation, and
// cross-validation for networks of identical Filippov agents.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pwsmsf/msf.hpp"

namespace {

constexpr const char* kToolVersion = "pws-msf 0.1.0";

using nlohmann::json;
using namespace pwsmsf;

std::string fmt17(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

struct RunConfig {
  std::string model_name = "galvanetto";
  std::map<std::string, double> model_params;
  Matrix adjacency;
  Matrix inner_coupling;
  std::vector<double> sigmas;
  bool sigma_from_user = false;
  double step = 1e-3;
  bool step_from_user = false;
  Vector orbit_x0;
  double orbit_tol = 1e-10;
  int max_laps = 200;
  double search_horizon = 400.0;
  double periods = 50.0;
  double perturbation = 1e-2;
  int stride = 1;
  int jobs = 1;
  std::string out_dir = "out";
  std::string skeleton_path;
  bool corrupt_saltation = false;

  json effective;
  std::string config_hash;
};

Matrix matrix_from_json(const json& doc) {
  const std::size_t rows = doc.size();
  const std::size_t cols = rows == 0 ? 0 : doc.at(0).size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (doc.at(i).size() != cols)
      throw ConfigError("config: ragged matrix literal");
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = doc.at(i).at(j).get<double>();
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

Matrix adjacency_from_config(const json& topo) {
  if (topo.contains("adjacency")) return matrix_from_json(topo.at("adjacency"));
  if (topo.contains("file")) {
    std::ifstream in(topo.at("file").get<std::string>());
    if (!in) throw ConfigError("config: cannot open adjacency file");
    json doc = json::parse(in);
    return adjacency_from_config(doc.is_object() ? doc : json{{"adjacency", doc}});
  }
  if (topo.contains("edges")) {
    const int nodes = topo.value("nodes", 0);
    if (nodes <= 0) throw ConfigError("config: edge-list topology requires 'nodes'");
    Matrix adjacency = Matrix::Zero(nodes, nodes);
    for (const auto& edge : topo.at("edges")) {
      const int a = edge.at(0).get<int>();
      const int b = edge.at(1).get<int>();
      if (a < 0 || b < 0 || a >= nodes || b >= nodes)
        throw ConfigError("config: edge endpoint out of range");
      adjacency(a, b) = adjacency(b, a) = 1.0;
    }
    return adjacency;
  }
  throw ConfigError("config: topology requires 'adjacency', 'edges', or 'file'");
}

std::vector<double> linspace(double lo, double hi, int count) {
  if (count < 1) throw ConfigError("config: sigma grid needs at least one point");
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  for (int i = 0; i < count; ++i)
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / (count - 1);
  return grid;
}

struct CommonFlags {
  std::string config_path;
  double sigma = 0.0;
  bool sigma_set = false;
  double sigma_min = 0.0, sigma_max = 0.0;
  int sigma_steps = 0;
  bool sweep_set = false;
  double step = 0.0;
  bool step_set = false;
  int jobs = 0;
  std::string out_dir;
  std::string skeleton_path;
  bool corrupt_saltation = false;
};

void add_common_options(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON configuration file");
  auto* sig = cmd->add_option("--sigma", flags.sigma, "single coupling strength");
  auto* smin = cmd->add_option("--sigma-min", flags.sigma_min, "sweep lower bound");
  auto* smax = cmd->add_option("--sigma-max", flags.sigma_max, "sweep upper bound");
  auto* ssteps = cmd->add_option("--sigma-steps", flags.sigma_steps, "sweep point count");
  auto* step = cmd->add_option("--step", flags.step, "integration step size");
  cmd->add_option("--jobs", flags.jobs, "worker threads for sweeps");
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--skeleton", flags.skeleton_path, "skeleton JSON to load instead of recomputing");
  cmd->add_flag("--corrupt-saltation", flags.corrupt_saltation)->group("");  // test hook
  cmd->callback([&flags, sig, smin, smax, ssteps, step] {
    flags.sigma_set = sig->count() > 0;
    flags.sweep_set = smin->count() > 0 || smax->count() > 0 || ssteps->count() > 0;
    flags.step_set = step->count() > 0;
  });
}

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig cfg;
  json doc = json::object();
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) throw ConfigError("config: cannot open '" + flags.config_path + "'");
    try {
      doc = json::parse(in);
    } catch (const json::exception& err) {
      throw ConfigError(std::string("config: invalid JSON: ") + err.what());
    }
  }

  if (doc.contains("model")) {
    const json& model = doc.at("model");
    if (!model.contains("name"))
      throw ConfigError("config: missing field model.name");
    cfg.model_name = model.at("name").get<std::string>();
    for (const auto& [key, value] : model.items())
      if (key != "name" && value.is_number())
        cfg.model_params[key] = value.get<double>();
  }

  cfg.adjacency = doc.contains("topology")
                      ? adjacency_from_config(doc.at("topology"))
                      : matrix_from_json(json::parse("[[0,1],[1,0]]"));

  cfg.inner_coupling = matrix_from_json(json::parse("[[0,0],[1,0]]"));
  if (doc.contains("coupling")) {
    const json& coupling = doc.at("coupling");
    if (coupling.contains("E")) cfg.inner_coupling = matrix_from_json(coupling.at("E"));
    if (coupling.contains("sigma")) {
      const json& sig = coupling.at("sigma");
      if (sig.is_number()) {
        cfg.sigmas = {sig.get<double>()};
      } else {
        cfg.sigmas = linspace(sig.at("min").get<double>(), sig.at("max").get<double>(),
                              sig.at("steps").get<int>());
      }
      cfg.sigma_from_user = true;
    }
  }

  if (doc.contains("integration") && doc.at("integration").contains("step")) {
    cfg.step = doc.at("integration").at("step").get<double>();
    cfg.step_from_user = true;
  }

  cfg.orbit_x0 = Vector::Zero(2);
  if (doc.contains("orbit")) {
    const json& orbit = doc.at("orbit");
    if (orbit.contains("x0")) {
      const auto& x0 = orbit.at("x0");
      cfg.orbit_x0 = Vector(x0.size());
      for (std::size_t i = 0; i < x0.size(); ++i) cfg.orbit_x0(i) = x0.at(i).get<double>();
    }
    cfg.orbit_tol = orbit.value("tol", cfg.orbit_tol);
    cfg.max_laps = orbit.value("max_laps", cfg.max_laps);
    cfg.search_horizon = orbit.value("search_horizon", cfg.search_horizon);
  }

  if (doc.contains("simulate")) {
    const json& sim = doc.at("simulate");
    cfg.periods = sim.value("periods", cfg.periods);
    cfg.perturbation = sim.value("perturbation", cfg.perturbation);
    cfg.stride = sim.value("stride", cfg.stride);
  }

  if (doc.contains("output")) cfg.out_dir = doc.at("output").value("dir", cfg.out_dir);

  // CLI flags override config fields.
  if (flags.sigma_set && flags.sweep_set)
    throw ConfigError("config: give either --sigma or a --sigma-min/max/steps sweep");
  if (flags.sigma_set) {
    cfg.sigmas = {flags.sigma};
    cfg.sigma_from_user = true;
  } else if (flags.sweep_set) {
    if (flags.sigma_steps <= 0)
      throw ConfigError("config: --sigma-steps must be positive");
    cfg.sigmas = linspace(flags.sigma_min, flags.sigma_max, flags.sigma_steps);
    cfg.sigma_from_user = true;
  }
  if (cfg.sigmas.empty()) cfg.sigmas = linspace(0.0, 5.0, 101);  // the default sweep
  if (flags.step_set) {
    cfg.step = flags.step;
    cfg.step_from_user = true;
  }
  if (flags.jobs > 0) cfg.jobs = flags.jobs;
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  cfg.skeleton_path = flags.skeleton_path;
  cfg.corrupt_saltation = flags.corrupt_saltation;

  json effective;
  effective["model"] = {{"name", cfg.model_name}};
  for (const auto& [key, value] : cfg.model_params) effective["model"][key] = value;
  effective["topology"] = {{"adjacency", matrix_to_json(cfg.adjacency)}};
  effective["coupling"] = {{"E", matrix_to_json(cfg.inner_coupling)},
                           {"sigma", cfg.sigmas}};
  effective["integration"] = {{"step", cfg.step}};
  effective["orbit"] = {{"x0", std::vector<double>(cfg.orbit_x0.data(),
                                                   cfg.orbit_x0.data() + cfg.orbit_x0.size())},
                        {"tol", cfg.orbit_tol},
                        {"max_laps", cfg.max_laps},
                        {"search_horizon", cfg.search_horizon}};
  effective["simulate"] = {{"periods", cfg.periods},
                           {"perturbation", cfg.perturbation},
                           {"stride", cfg.stride}};
  effective["output"] = {{"dir", cfg.out_dir}};
  cfg.effective = effective;
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a64(effective.dump())));
  cfg.config_hash = hex;
  return cfg;
}

void write_file_header(std::ofstream& out, const RunConfig& cfg) {
  out << "# " << kToolVersion << "\n";
  out << "# config-hash: fnv1a64:" << cfg.config_hash << "\n";
}

std::ofstream open_output(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out_dir);
  const auto path = std::filesystem::path(cfg.out_dir) / name;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file " + path.string());
  return out;
}

OrbitSkeleton obtain_skeleton(const RunConfig& cfg, const AgentModel& model,
                              bool announce = true) {
  if (!cfg.skeleton_path.empty()) {
    std::ifstream in(cfg.skeleton_path);
    if (!in) throw ConfigError("cannot open skeleton file " + cfg.skeleton_path);
    return skeleton_from_json(json::parse(in));
  }
  if (announce)
    std::cout << "computing periodic orbit (step " << cfg.step << ") ...\n";
  OrbitSearchOptions opts;
  opts.tol = cfg.orbit_tol;
  opts.max_laps = cfg.max_laps;
  opts.search_horizon = cfg.search_horizon;
  return find_periodic_orbit(model, cfg.orbit_x0, cfg.step, opts);
}

void write_skeleton(const RunConfig& cfg, const OrbitSkeleton& skeleton) {
  json doc = skeleton_to_json(skeleton);
  doc["meta"] = {{"tool", kToolVersion},
                 {"config_hash", std::string("fnv1a64:") + cfg.config_hash}};
  std::filesystem::create_directories(cfg.out_dir);
  const auto path = std::filesystem::path(cfg.out_dir) / "skeleton.json";
  std::ofstream out(path);
  out << doc.dump() << "\n";
  std::cout << "wrote " << path.string() << "\n";
}

int run_orbit(const RunConfig& cfg) {
  const AgentModel model = make_model(cfg.model_name, cfg.model_params);
  const OrbitSkeleton skeleton = obtain_skeleton(cfg, model);
  write_skeleton(cfg, skeleton);

  std::cout << "period: " << fmt17(skeleton.period) << "\n";
  std::cout << "anchor (" << to_string(skeleton.anchor_mode) << "):";
  for (Eigen::Index i = 0; i < skeleton.anchor_state.size(); ++i)
    std::cout << " " << fmt17(skeleton.anchor_state(i));
  std::cout << "\nevents:\n";
  for (const EventRecord& event : skeleton.events) {
    std::cout << "  t=" << fmt17(event.time) << "  " << to_string(event.kind) << "  state=";
    for (Eigen::Index i = 0; i < event.state.size(); ++i)
      std::cout << (i ? "," : "(") << fmt17(event.state(i));
    std::cout << ")\n";
  }
  std::cout << "return residual: " << fmt17(orbit_residual(model, skeleton)) << "\n";
  return 0;
}

int run_msf(const RunConfig& cfg) {
  const AgentModel model = make_model(cfg.model_name, cfg.model_params);
  const OrbitSkeleton skeleton = obtain_skeleton(cfg, model);
  const NetworkTopology topology = build_topology(cfg.adjacency, cfg.inner_coupling, 0.0);
  const MSFTable table =
      msf_sweep(model, skeleton, topology, cfg.sigmas, cfg.step, cfg.jobs);

  const int num = topology.num_agents;
  const int dim = model.dim;
  auto msf_csv = open_output(cfg, "msf.csv");
  write_file_header(msf_csv, cfg);
  msf_csv << "# tau_i_j: i = 1.." << num
          << " indexes the Laplacian eigenvalues in descending order (i=1 is "
             "lambda=0), j = 1.."
          << dim << " the multipliers in descending modulus\n";
  msf_csv << "# msf = max log-modulus over i >= 2; log-moduli are floored at "
             "-745 (a zero multiplier maps to the floor)\n";
  msf_csv << "sigma,msf,stable";
  for (int i = 1; i <= num; ++i)
    for (int j = 1; j <= dim; ++j)
      msf_csv << ",tau_" << i << "_" << j << "_re,tau_" << i << "_" << j << "_im";
  msf_csv << ",error\n";

  auto modulus_csv = open_output(cfg, "msf_modulus.csv");
  write_file_header(modulus_csv, cfg);
  modulus_csv << "sigma,max_transverse_multiplier_modulus\n";

  std::size_t failed = 0;
  for (const MSFRow& row : table) {
    msf_csv << fmt17(row.sigma) << ",";
    if (row.ok) {
      msf_csv << fmt17(row.msf) << "," << (row.stable ? "true" : "false");
      for (const ComplexVector& mults : row.multipliers)
        for (Eigen::Index j = 0; j < mults.size(); ++j)
          msf_csv << "," << fmt17(mults(j).real()) << "," << fmt17(mults(j).imag());
      msf_csv << ",";
    } else {
      ++failed;
      msf_csv << ",";
      for (int i = 0; i < num * dim * 2; ++i) msf_csv << ",";
      std::string message = row.error;
      for (char& c : message)
        if (c == ',' || c == '\n') c = ';';
      msf_csv << "," << message;
    }
    msf_csv << "\n";

    if (row.ok) {
      double modulus = 0.0;
      for (std::size_t i = 1; i < row.multipliers.size(); ++i)
        for (Eigen::Index j = 0; j < row.multipliers[i].size(); ++j)
          modulus = std::max(modulus, std::abs(row.multipliers[i](j)));
      modulus_csv << fmt17(row.sigma) << "," << fmt17(modulus) << "\n";
    }
  }

  std::cout << "msf rows: " << table.size() << " (" << failed << " failed)\n";
  for (const MSFRow& row : table)
    if (table.size() <= 12 && row.ok)
      std::cout << "  sigma=" << fmt17(row.sigma) << "  msf=" << fmt17(row.msf)
                << "  stable=" << (row.stable ? "true" : "false") << "\n";
  return failed == table.size() && !table.empty() ? 2 : 0;
}

int run_simulate(const RunConfig& cfg) {
  if (cfg.sigmas.size() != 1 && cfg.sigma_from_user == false)
    throw ConfigError("simulate: give a single sigma (--sigma)");
  if (cfg.sigmas.size() != 1)
    throw ConfigError("simulate: expects a single sigma, not a sweep");
  const double sigma = cfg.sigmas.front();

  const AgentModel model = make_model(cfg.model_name, cfg.model_params);
  const OrbitSkeleton skeleton = obtain_skeleton(cfg, model);
  const NetworkTopology topology =
      build_topology(cfg.adjacency, cfg.inner_coupling, sigma);

  Vector x0 = synchronous_state(skeleton.anchor_state, topology.num_agents);
  if (topology.num_agents > 1) x0(model.dim) += cfg.perturbation;  // agent 2, first component

  SimulateOptions opts;
  opts.record_stride = cfg.stride;
  const double horizon = cfg.periods * skeleton.period;
  const NetworkTrajectory traj =
      simulate_network(model, topology, x0, horizon, cfg.step, opts);

  auto traj_csv = open_output(cfg, "trajectory.csv");
  write_file_header(traj_csv, cfg);
  traj_csv << "t,sync_error";
  for (int i = 1; i <= topology.num_agents; ++i)
    for (int j = 1; j <= model.dim; ++j) traj_csv << ",x_" << i << "_" << j;
  traj_csv << "\n";
  for (std::size_t s = 0; s < traj.times.size(); ++s) {
    traj_csv << fmt17(traj.times[s]) << "," << fmt17(traj.sync_error[s]);
    for (Eigen::Index i = 0; i < traj.states[s].size(); ++i)
      traj_csv << "," << fmt17(traj.states[s](i));
    traj_csv << "\n";
  }

  auto sync_csv = open_output(cfg, "sync_error.csv");
  write_file_header(sync_csv, cfg);
  sync_csv << "t,sync_error\n";
  for (std::size_t s = 0; s < traj.times.size(); ++s)
    sync_csv << fmt17(traj.times[s]) << "," << fmt17(traj.sync_error[s]) << "\n";

  std::cout << "sigma=" << fmt17(sigma) << "  horizon=" << fmt17(horizon)
            << "  events=" << traj.events.size() << "\n";
  std::cout << "sync error: initial=" << fmt17(traj.sync_error.front())
            << "  final=" << fmt17(traj.sync_error.back()) << "\n";
  return 0;
}

int run_validate(const RunConfig& cfg) {
  const AgentModel model = make_model(cfg.model_name, cfg.model_params);
  OrbitSkeleton skeleton = obtain_skeleton(cfg, model);
  if (cfg.corrupt_saltation && !skeleton.events.empty())
    skeleton.events.front().saltation(0, 0) += 1e-3;  // negative-control hook
  const NetworkTopology topology = build_topology(cfg.adjacency, cfg.inner_coupling, 0.0);

  std::vector<double> sigmas = cfg.sigmas;
  if (!cfg.sigma_from_user) sigmas = {1.0};

  json persisted = json::array();
  bool all_pass = true;
  for (double sigma : sigmas) {
    const ValidationReport report =
        validate_against_full(model, skeleton, topology, sigma, cfg.step);
    all_pass = all_pass && report.pass;
    std::cout << "sigma=" << fmt17(sigma)
              << "  matching_distance=" << fmt17(report.matching_distance)
              << "  b_row_residual=" << fmt17(report.b_row_residual)
              << "  saltation_field=" << fmt17(report.saltation_field_residual)
              << "  saltation_projection=" << fmt17(report.saltation_projection_residual)
              << "  ||E+B||=" << fmt17(report.eb_norm)
              << (report.pass ? "  [pass]" : "  [FAIL]") << "\n";
    json spectra = json::object();
    for (const char* key : {"full", "reduced"}) {
      json list = json::array();
      const auto& source = key[0] == 'f' ? report.full_spectrum : report.reduced_union;
      for (const Complex& value : source)
        list.push_back({{"re", value.real()}, {"im", value.imag()}});
      spectra[key] = list;
    }
    persisted.push_back({{"sigma", sigma},
                         {"matching_distance", report.matching_distance},
                         {"b_row_residual", report.b_row_residual},
                         {"eb_norm", report.eb_norm},
                         {"saltation_field_residual", report.saltation_field_residual},
                         {"saltation_projection_residual",
                          report.saltation_projection_residual},
                         {"spectra", spectra},
                         {"pass", report.pass}});
  }
  json doc = {{"meta",
               {{"tool", kToolVersion},
                {"config_hash", std::string("fnv1a64:") + cfg.config_hash}}},
              {"reports", persisted}};
  auto out = open_output(cfg, "validation.json");
  out << doc.dump(2) << "\n";
  return all_pass ? 0 : 1;
}

int run_repro_paper(RunConfig cfg) {
  if (!cfg.step_from_user) cfg.step = 1e-4;  // the documented reproduction setting
  const std::vector<double> sigmas = {1.0, 1.2, 2.6, 2.7, 4.8};
  const std::vector<bool> expected = {false, false, false, true, true};

  const AgentModel model = make_model(cfg.model_name, cfg.model_params);
  const OrbitSkeleton skeleton = obtain_skeleton(cfg, model);
  const NetworkTopology topology = build_topology(cfg.adjacency, cfg.inner_coupling, 0.0);
  const MSFTable table = msf_sweep(model, skeleton, topology, sigmas, cfg.step, cfg.jobs);

  auto csv = open_output(cfg, "repro_paper.csv");
  write_file_header(csv, cfg);
  csv << "sigma,msf,stable,expected_stable,match\n";

  bool all_match = true;
  std::cout << "period: " << fmt17(skeleton.period) << "\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    const MSFRow& row = table[i];
    const bool match = row.ok && row.stable == expected[i];
    all_match = all_match && match;
    std::cout << "sigma=" << fmt17(row.sigma) << "  msf=" << fmt17(row.msf)
              << "  stable=" << (row.stable ? "true" : "false") << "  expected="
              << (expected[i] ? "true" : "false") << (match ? "  [ok]" : "  [MISMATCH]")
              << "\n";
    csv << fmt17(row.sigma) << "," << fmt17(row.msf) << ","
        << (row.stable ? "true" : "false") << "," << (expected[i] ? "true" : "false")
        << "," << (match ? "true" : "false") << "\n";
  }
  return all_match ? 0 : 1;
}

int dispatch(const std::string& command, const CommonFlags& flags) {
  const RunConfig cfg = resolve_config(flags);
  if (command == "orbit") return run_orbit(cfg);
  if (command == "msf") return run_msf(cfg);
  if (command == "simulate") return run_simulate(cfg);
  if (command == "validate") return run_validate(cfg);
  if (command == "repro-paper") return run_repro_paper(cfg);
  throw ConfigError("unknown subcommand " + command);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Master stability function for piecewise-smooth networks"};
  app.require_subcommand(1);

  std::map<std::string, CommonFlags> flags;
  const std::pair<const char*, const char*> commands[] = {
      {"orbit", "locate the periodic orbit and write its skeleton"},
      {"msf", "sweep the master stability function over sigma"},
      {"simulate", "integrate the full coupled network"},
      {"validate", "cross-check reduced multipliers against the full monodromy"},
      {"repro-paper", "five-sigma stability classification at step 1e-4"},
  };
  for (const auto& [name, description] : commands) {
    CLI::App* cmd = app.add_subcommand(name, description);
    add_common_options(cmd, flags[name]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 3;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return dispatch(command, flags[command]);
  } catch (const ConfigError& err) {
    std::cerr << "configuration error: " << err.what() << "\n";
    return 3;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
}
