#include "mtrack/experiment.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <sstream>

#include "mtrack/errors.hpp"
#include "mtrack/record_io.hpp"
#include "mtrack/scattering.hpp"

namespace mtrack {

using nlohmann::json;

std::string to_string(MediumCase c) {
  switch (c) {
    case MediumCase::Homogeneous: return "homogeneous";
    case MediumCase::CaseII: return "case-ii";
    case MediumCase::CaseIII: return "case-iii";
  }
  return "homogeneous";
}

MediumCase parse_medium_case(const std::string& s) {
  if (s == "homogeneous") return MediumCase::Homogeneous;
  if (s == "case-ii") return MediumCase::CaseII;
  if (s == "case-iii") return MediumCase::CaseIII;
  throw InvalidArgument("unknown medium '" + s + "' (homogeneous | case-ii | case-iii)");
}

MediumSpec make_medium(MediumCase c, double c0, double inclusion_speed) {
  MediumSpec m;
  m.c0 = c0;
  if (c != MediumCase::Homogeneous) {
    const double x1 = c == MediumCase::CaseII ? -2.0 : 2.0;
    m.inclusion = Cuboid{{x1, 0.0, 0.0}, {2.0, 10.0, 10.0}, inclusion_speed};
  }
  m.validate();
  return m;
}

ExperimentConfig::ExperimentConfig()
    : theta_min(std::numbers::pi / 4),
      theta_max(3 * std::numbers::pi / 4),
      phi_min(-std::numbers::pi / 4),
      phi_max(std::numbers::pi / 4) {}

void ExperimentConfig::validate() const {
  const auto& names = builtin_trajectory_names();
  if (std::find(names.begin(), names.end(), scenario) == names.end())
    throw InvalidArgument("unknown scenario '" + scenario + "'");
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be positive");
  };
  positive(omega0, "omega0");
  positive(c0, "c0");
  positive(inclusion_speed, "inclusion_speed");
  positive(patch_radius, "radius");
  positive(dt, "dt");
  positive(half_width, "half_width");
  if (terminal_time) positive(*terminal_time, "T");
  if (v_max) positive(*v_max, "vmax");
  if (receivers < 1) throw InvalidArgument("receivers must be at least 1");
  if (mesh < 2) throw InvalidArgument("mesh must be at least 2 points per axis");
  if (voxels < 1) throw InvalidArgument("voxels must be at least 1");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw InvalidArgument("noise must be non-negative");
  if (!(gap_factor > 1.0)) throw InvalidArgument("gap_factor must exceed 1");
  positive(stroke_speed, "stroke_speed");
  positive(connector_speed, "connector_speed");
  if (!(0.0 <= theta_min && theta_min < theta_max && theta_max <= std::numbers::pi))
    throw InvalidArgument("need 0 <= theta_min < theta_max <= pi");
  if (!(phi_min < phi_max && phi_max - phi_min <= 2 * std::numbers::pi))
    throw InvalidArgument("need phi_min < phi_max within one turn");
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"paper-default",    "paper-default-C",    "paper-default-3",
                                              "paper-default-8",  "paper-default-cyl",  "paper-default-cone",
                                              "paper-default-hello"};
  return names;
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  if (name == "paper-default" || name == "paper-default-C") return c;
  if (name == "paper-default-3") {
    c.scenario = "digit-3";
  } else if (name == "paper-default-8") {
    c.scenario = "digit-8";
  } else if (name == "paper-default-cyl") {
    c.scenario = "cyl-spiral";
    c.order = 1;
  } else if (name == "paper-default-cone") {
    c.scenario = "cone-spiral";
    c.order = 5;
  } else if (name == "paper-default-hello") {
    c.scenario = "hello";
    c.terminal_time = 8.0;
    c.noise = 0.30;
    c.segmented = true;
  } else {
    throw InvalidArgument("unknown preset '" + name + "'");
  }
  return c;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw InvalidArgument("config key '" + key + "': expected a number, got '" + v + "'");
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw InvalidArgument("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw InvalidArgument("config key '" + key + "': integer out of range");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidArgument("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::optional<double> to_optional(const std::string& key, const std::string& v) {
  if (v == "auto") return std::nullopt;
  return to_double(key, v);
}

struct KeyHandler {
  std::string key;
  std::string help;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

std::string opt_text(const std::optional<double>& v) { return v ? format_double(*v) : "auto"; }

const std::vector<KeyHandler>& handlers() {
  using C = ExperimentConfig;
  static const std::vector<KeyHandler> h{
      {"scenario", "trajectory id", [](C& c, const std::string& v) { c.scenario = v; },
       [](const C& c) { return c.scenario; }},
      {"medium", "homogeneous | case-ii | case-iii",
       [](C& c, const std::string& v) { c.medium = parse_medium_case(v); },
       [](const C& c) { return to_string(c.medium); }},
      {"inclusion_speed", "wave speed inside the cuboid, m/s",
       [](C& c, const std::string& v) { c.inclusion_speed = to_double("inclusion_speed", v); },
       [](const C& c) { return format_double(c.inclusion_speed); }},
      {"omega0", "source angular frequency, rad/s",
       [](C& c, const std::string& v) { c.omega0 = to_double("omega0", v); },
       [](const C& c) { return format_double(c.omega0); }},
      {"c0", "background wave speed, m/s", [](C& c, const std::string& v) { c.c0 = to_double("c0", v); },
       [](const C& c) { return format_double(c.c0); }},
      {"radius", "receiver sphere radius, m",
       [](C& c, const std::string& v) { c.patch_radius = to_double("radius", v); },
       [](const C& c) { return format_double(c.patch_radius); }},
      {"theta_min", "patch polar range start, rad",
       [](C& c, const std::string& v) { c.theta_min = to_double("theta_min", v); },
       [](const C& c) { return format_double(c.theta_min); }},
      {"theta_max", "patch polar range end, rad",
       [](C& c, const std::string& v) { c.theta_max = to_double("theta_max", v); },
       [](const C& c) { return format_double(c.theta_max); }},
      {"phi_min", "patch azimuth range start, rad",
       [](C& c, const std::string& v) { c.phi_min = to_double("phi_min", v); },
       [](const C& c) { return format_double(c.phi_min); }},
      {"phi_max", "patch azimuth range end, rad",
       [](C& c, const std::string& v) { c.phi_max = to_double("phi_max", v); },
       [](const C& c) { return format_double(c.phi_max); }},
      {"receivers", "number of receivers",
       [](C& c, const std::string& v) { c.receivers = to_uint("receivers", v); },
       [](const C& c) { return std::to_string(c.receivers); }},
      {"dt", "time step, s", [](C& c, const std::string& v) { c.dt = to_double("dt", v); },
       [](const C& c) { return format_double(c.dt); }},
      {"T", "terminal time, s (auto: scenario duration)",
       [](C& c, const std::string& v) { c.terminal_time = to_optional("T", v); },
       [](const C& c) { return opt_text(c.terminal_time); }},
      {"half_width", "search cube half width, m",
       [](C& c, const std::string& v) { c.half_width = to_double("half_width", v); },
       [](const C& c) { return format_double(c.half_width); }},
      {"mesh", "sampling points per axis", [](C& c, const std::string& v) { c.mesh = to_uint("mesh", v); },
       [](const C& c) { return std::to_string(c.mesh); }},
      {"noise", "relative noise level", [](C& c, const std::string& v) { c.noise = to_double("noise", v); },
       [](const C& c) { return format_double(c.noise); }},
      {"seed", "noise seed", [](C& c, const std::string& v) { c.seed = to_uint("seed", v); },
       [](const C& c) { return std::to_string(c.seed); }},
      {"method", "global | sequential | parallel",
       [](C& c, const std::string& v) { c.method = parse_search_method(v); },
       [](const C& c) { return to_string(c.method); }},
      {"vmax", "speed bound for tuned searches, m/s (auto: trajectory bound)",
       [](C& c, const std::string& v) { c.v_max = to_optional("vmax", v); },
       [](const C& c) { return opt_text(c.v_max); }},
      {"order", "Fourier smoothing order", [](C& c, const std::string& v) { c.order = to_uint("order", v); },
       [](const C& c) { return std::to_string(c.order); }},
      {"segmented", "split at gaps before smoothing",
       [](C& c, const std::string& v) { c.segmented = to_bool("segmented", v); },
       [](const C& c) { return std::string(c.segmented ? "true" : "false"); }},
      {"gap_factor", "gap threshold in mean consecutive distances",
       [](C& c, const std::string& v) { c.gap_factor = to_double("gap_factor", v); },
       [](const C& c) { return format_double(c.gap_factor); }},
      {"voxels", "inclusion voxels per axis", [](C& c, const std::string& v) { c.voxels = to_uint("voxels", v); },
       [](const C& c) { return std::to_string(c.voxels); }},
      {"stroke_speed", "hello: speed along strokes, m/s",
       [](C& c, const std::string& v) { c.stroke_speed = to_double("stroke_speed", v); },
       [](const C& c) { return format_double(c.stroke_speed); }},
      {"connector_speed", "hello: speed between letters, m/s",
       [](C& c, const std::string& v) { c.connector_speed = to_double("connector_speed", v); },
       [](const C& c) { return format_double(c.connector_speed); }},
  };
  return h;
}

const KeyHandler& handler(const std::string& key) {
  for (const auto& h : handlers())
    if (h.key == key) return h;
  throw InvalidArgument("unknown config key '" + key + "'");
}

std::string canonical_text(const ExperimentConfig& c) {
  std::string out;
  for (const auto& h : handlers()) out += h.key + " = " + h.get(c) + "\n";
  return out;
}

}  // namespace

void apply_config_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "preset") throw InvalidArgument("'preset' can only seed a config");
  handler(key).set(c, value);
}

const std::vector<std::pair<std::string, std::string>>& config_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = [] {
    std::vector<std::pair<std::string, std::string>> k{{"preset", "base preset (first key only)"}};
    for (const auto& h : handlers()) k.emplace_back(h.key, h.help);
    return k;
  }();
  return keys;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::istringstream is(text);
  std::string line;
  bool seen_key = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "preset") {
      if (seen_key) throw InvalidArgument("config: 'preset' must be the first key");
      c = preset(value);
    } else {
      handler(key).set(c, value);
    }
    seen_key = true;
  }
  return c;
}

ExperimentConfig load_config(const std::string& name_or_path) {
  const auto& names = preset_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return preset(name_or_path);
  std::ifstream is(name_or_path);
  if (!is) throw InvalidArgument("'" + name_or_path + "' is neither a preset nor a readable config file");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string to_config_text(const ExperimentConfig& c) { return "preset = " + c.preset + "\n" + canonical_text(c); }

std::string config_hash(const ExperimentConfig& c) {
  // The preset name is a label; only the effective values identify a run.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canonical_text(c)) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Trajectory config_trajectory(const ExperimentConfig& c) {
  BuiltinParams p;
  p.stroke_speed = c.stroke_speed;
  p.connector_speed = c.connector_speed;
  return builtin_trajectory(c.scenario, p);
}

ReceiverArray config_receivers(const ExperimentConfig& c) {
  return make_receiver_array(c.patch_radius, c.theta_min, c.theta_max, c.phi_min, c.phi_max, c.receivers);
}

TimeGrid config_grid(const ExperimentConfig& c, const Trajectory& traj) {
  const double T = c.terminal_time.value_or(traj.terminal_time());
  if (T > traj.terminal_time() * (1 + 1e-12))
    throw InvalidArgument("T exceeds the duration of scenario '" + c.scenario + "'");
  const double steps = std::round(T / c.dt);
  if (steps < 1 || std::abs(steps * c.dt - T) > 1e-9 * T)
    throw InvalidArgument("T must be a whole number of time steps dt");
  return TimeGrid::restore(std::min(T, traj.terminal_time()), static_cast<std::size_t>(steps), c.dt);
}

SamplingMesh config_mesh(const ExperimentConfig& c) { return SamplingMesh::cube(c.half_width, c.mesh); }

MediumSpec config_medium(const ExperimentConfig& c) { return make_medium(c.medium, c.c0, c.inclusion_speed); }

WaveRecord config_forward(const ExperimentConfig& c, const Trajectory& traj) {
  const ReceiverArray rcv = config_receivers(c);
  const TimeGrid grid = config_grid(c, traj);
  const MediumSpec medium = config_medium(c);
  if (medium.inclusion) return synthesize_record_inhomogeneous(traj, rcv, grid, medium, c.omega0, c.voxels);
  return synthesize_record(traj, rcv, grid, medium, SourceSignal{c.omega0});
}

PhaseError::PhaseError(std::string phase, const std::string& what)
    : std::runtime_error(phase + ": " + what), phase_(std::move(phase)) {}

namespace {

void timed(const char* phase, std::vector<PhaseTiming>& timings, const std::function<void()>& fn) {
  const auto start = std::chrono::steady_clock::now();
  try {
    fn();
  } catch (const PhaseError&) {
    throw;
  } catch (const std::exception& e) {
    throw PhaseError(phase, e.what());
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  timings.push_back({phase, elapsed.count()});
}

void write_points_csv(const std::filesystem::path& path, const std::vector<TimedPoint>& pts, bool projection) {
  auto os = open_output(path);
  os << (projection ? "t,x2,x3\n" : "t,x1,x2,x3\n");
  for (const auto& p : pts) {
    os << format_double(p.t);
    if (!projection) os << ',' << format_double(p.z.x1);
    os << ',' << format_double(p.z.x2) << ',' << format_double(p.z.x3) << '\n';
  }
}

json metrics_json(const TrajectoryMetrics& m, std::size_t skipped) {
  json j{{"points", m.per_step.size()},
         {"skipped", skipped},
         {"mean_error", m.mean},
         {"max_error", m.max},
         {"cell_size", m.cell_size},
         {"within_1_cell", m.within_1_cell},
         {"within_2_cells", m.within_2_cells},
         {"note", "thresholds on these values are recorded regression values"}};
  j["hausdorff_smoothed"] = m.has_hausdorff ? json(m.hausdorff) : json(nullptr);
  return j;
}

}  // namespace

std::map<std::string, std::filesystem::path> export_plot_data(const ExperimentReport& report, const Trajectory& truth,
                                                              const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::map<std::string, std::filesystem::path> files;
  std::vector<TimedPoint> exact;
  for (double t : report.recon.grid.times()) exact.push_back({t, truth.position_clamped(t)});
  const std::vector<TimedPoint> raw = timed_points(report.recon);

  files["truth"] = dir / "truth.csv";
  write_points_csv(files["truth"], exact, false);
  files["truth_x2x3"] = dir / "truth_x2x3.csv";
  write_points_csv(files["truth_x2x3"], exact, true);
  files["raw"] = dir / "raw.csv";
  write_points_csv(files["raw"], raw, false);
  files["raw_x2x3"] = dir / "raw_x2x3.csv";
  write_points_csv(files["raw_x2x3"], raw, true);

  if (!report.smoothed.segments.empty()) {
    files["smoothed"] = dir / "smoothed.csv";
    files["smoothed_x2x3"] = dir / "smoothed_x2x3.csv";
    auto full = open_output(files["smoothed"]);
    auto proj = open_output(files["smoothed_x2x3"]);
    full << "segment,t,x1,x2,x3\n";
    proj << "segment,t,x2,x3\n";
    const auto& set = report.smoothed;
    for (std::size_t s = 0; s < set.segments.size(); ++s) {
      const auto& seg = set.segments[s];
      for (std::size_t j = seg.range.begin; j < seg.range.end; ++j) {
        const double t = set.points[j].t;
        const Point3 z = seg.curve.eval(t);
        full << s + 1 << ',' << format_double(t) << ',' << format_double(z.x1) << ',' << format_double(z.x2) << ','
             << format_double(z.x3) << '\n';
        proj << s + 1 << ',' << format_double(t) << ',' << format_double(z.x2) << ',' << format_double(z.x3) << '\n';
      }
    }
  }
  return files;
}

ExperimentReport run_experiment(const ExperimentConfig& config, const std::filesystem::path& output_root) {
  config.validate();
  ExperimentReport rep;
  rep.config = config;
  rep.hash = config_hash(config);
  rep.run_dir = output_root / ("run-" + rep.hash);

  const Trajectory traj = config_trajectory(config);
  const SamplingMesh mesh = config_mesh(config);
  const double v_max = config.v_max.value_or(traj.v_max());
  std::optional<WaveRecord> clean, noisy;

  timed("synthesize", rep.timings, [&] { clean = config_forward(config, traj); });
  rep.forward_method = clean->meta().forward_method;
  timed("noise", rep.timings, [&] { noisy = add_noise(*clean, config.noise, config.seed); });
  timed("reconstruct", rep.timings, [&] {
    rep.recon = reconstruct(config.method, *noisy, mesh, v_max, IndicatorParams{config.omega0});
  });
  timed("postprocess", rep.timings, [&] {
    if (!rep.recon.points.empty())
      rep.smoothed = smooth(rep.recon, SmoothOptions{config.order, config.segmented, config.gap_factor});
  });
  timed("metrics", rep.timings, [&] {
    if (!rep.recon.points.empty())
      rep.metrics = trajectory_error(rep.recon, traj, mesh.cell_size(), &rep.smoothed);
    else
      rep.metrics.cell_size = mesh.cell_size();
  });
  timed("persist", rep.timings, [&] {
    const auto& dir = rep.run_dir;
    std::filesystem::create_directories(dir);
    {
      auto os = open_output(dir / "config.txt");
      os << to_config_text(config);
    }
    rep.artifacts["config"] = dir / "config.txt";
    save_record(dir, *noisy);
    rep.artifacts["record_csv"] = dir / "record.csv";
    rep.artifacts["record_json"] = dir / "record.json";
    save_recon(dir, rep.recon);
    rep.artifacts["recon_csv"] = dir / "recon.csv";
    rep.artifacts["recon_json"] = dir / "recon.json";
    if (rep.recon.schedule) rep.artifacts["schedule"] = dir / "schedule.csv";
    if (!rep.smoothed.segments.empty()) {
      save_smooth(dir, rep.smoothed);
      rep.artifacts["smooth_csv"] = dir / "smooth.csv";
      rep.artifacts["coeffs"] = dir / "coeffs.json";
    }
    for (auto& [name, path] : export_plot_data(rep, traj, dir)) rep.artifacts[name] = path;
    rep.smoothed_exported = rep.artifacts.contains("smoothed");

    json segs = json::array();
    for (const auto& s : rep.smoothed.segments)
      segs.push_back({{"first_step", s.range.begin + 1},
                      {"last_step", s.range.end},
                      {"order", s.curve.order},
                      {"order_reduced", s.order_reduced},
                      {"residual_rms", s.residual_rms}});
    json files = json::object();
    for (const auto& [name, path] : rep.artifacts) files[name] = path.filename().string();
    files["report"] = "report.json";
    files["timings"] = "timings.json";
    json report{{"hash", rep.hash},
                {"preset", config.preset},
                {"scenario", config.scenario},
                {"medium", to_string(config.medium)},
                {"forward_method", rep.forward_method},
                {"method", to_string(config.method)},
                {"v_max", v_max},
                {"n_steps", rep.recon.grid.size()},
                {"metrics", metrics_json(rep.metrics, rep.recon.skipped.size())},
                {"segments", segs},
                {"smoothed_exported", rep.smoothed_exported},
                {"files", files}};
    auto os = open_output(dir / "report.json");
    os << report.dump(2) << '\n';
    rep.artifacts["report"] = dir / "report.json";
  });

  // Wall-clock times vary run to run, so they live outside report.json.
  json t = json::object();
  double total = 0.0;
  for (const auto& p : rep.timings) {
    t[p.phase] = p.seconds;
    total += p.seconds;
  }
  t["total"] = total;
  auto os = open_output(rep.run_dir / "timings.json");
  os << t.dump(2) << '\n';
  rep.artifacts["timings"] = rep.run_dir / "timings.json";
  return rep;
}

std::vector<Point3> default_probes() { return {{5.0, -5.0, 5.0 * std::numbers::sqrt2}, {10.0, 0.0, 0.0}}; }

MediaComparison compare_media(const ExperimentConfig& base, const std::vector<Point3>& probes) {
  base.validate();
  const Trajectory traj = config_trajectory(base);
  const TimeGrid grid = config_grid(base, traj);
  const SamplingMesh mesh = config_mesh(base);
  const ReceiverArray rcv = config_receivers(base);
  const double v_max = base.v_max.value_or(traj.v_max());

  // Probes ride along as extra receivers so each case needs one solve per step.
  ReceiverArray combined = rcv;
  for (const auto& p : probes) {
    combined.positions.push_back(p);
    combined.weights.push_back(1.0);
  }

  MediaComparison cmp;
  cmp.probes = probes;
  cmp.times = grid.times();
  cmp.cell_size = mesh.cell_size();
  cmp.series.assign(3, std::vector<std::vector<double>>(probes.size()));
  const MediumCase cases[3] = {MediumCase::Homogeneous, MediumCase::CaseII, MediumCase::CaseIII};
  for (int k = 0; k < 3; ++k) {
    WaveRecord full = [&] {
      try {
        return synthesize_record_inhomogeneous(traj, combined, grid,
                                               make_medium(cases[k], base.c0, base.inclusion_speed), base.omega0,
                                               base.voxels);
      } catch (const std::exception& e) {
        throw PhaseError("synthesize " + to_string(cases[k]), e.what());
      }
    }();
    for (std::size_t p = 0; p < probes.size(); ++p) {
      const auto row = full.row(rcv.size() + p);
      cmp.series[k][p].assign(row.begin(), row.end());
    }
    WaveRecord record(rcv, grid, full.meta());
    for (std::size_t m = 0; m < rcv.size(); ++m) {
      const auto src = full.row(m);
      std::copy(src.begin(), src.end(), record.row(m).begin());
    }
    try {
      cmp.recon[k] = reconstruct(base.method, add_noise(record, base.noise, base.seed), mesh, v_max,
                                 IndicatorParams{base.omega0});
    } catch (const std::exception& e) {
      throw PhaseError("reconstruct " + to_string(cases[k]), e.what());
    }
  }

  for (std::size_t p = 0; p < probes.size(); ++p)
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double u0 = cmp.series[0][p][j];
      cmp.max_reference = std::max(cmp.max_reference, std::abs(u0));
      for (int k = 1; k < 3; ++k)
        cmp.max_deviation[k] = std::max(cmp.max_deviation[k], std::abs(cmp.series[k][p][j] - u0));
    }

  cmp.recon_delta.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<std::array<const ReconPoint*, 3>> by_step(grid.size() + 1, {nullptr, nullptr, nullptr});
  for (int k = 0; k < 3; ++k)
    for (const auto& pt : cmp.recon[k].points) by_step[pt.step][k] = &pt;
  for (std::size_t step = 1; step <= grid.size(); ++step) {
    const auto& s = by_step[step];
    if (!s[0] || !s[1] || !s[2]) continue;
    cmp.recon_delta[step - 1] = std::max({distance(s[0]->z, s[1]->z), distance(s[0]->z, s[2]->z),
                                          distance(s[1]->z, s[2]->z)});
  }
  return cmp;
}

void write_comparison(const std::filesystem::path& dir, const MediaComparison& cmp) {
  std::filesystem::create_directories(dir);
  {
    auto os = open_output(dir / "compare.csv");
    os << "probe,j,t,u0,u1,u2\n";
    for (std::size_t p = 0; p < cmp.probes.size(); ++p)
      for (std::size_t j = 0; j < cmp.times.size(); ++j)
        os << p + 1 << ',' << j + 1 << ',' << format_double(cmp.times[j]) << ','
           << format_double(cmp.series[0][p][j]) << ',' << format_double(cmp.series[1][p][j]) << ','
           << format_double(cmp.series[2][p][j]) << '\n';
  }
  {
    auto os = open_output(dir / "compare_recon.csv");
    os << "j,delta\n";
    for (std::size_t j = 0; j < cmp.recon_delta.size(); ++j)
      if (!std::isnan(cmp.recon_delta[j])) os << j + 1 << ',' << format_double(cmp.recon_delta[j]) << '\n';
  }
  double worst = 0.0;
  std::size_t within = 0, compared = 0;
  for (double d : cmp.recon_delta) {
    if (std::isnan(d)) continue;
    ++compared;
    worst = std::max(worst, d);
    if (d <= cmp.cell_size) ++within;
  }
  json probes = json::array();
  for (const auto& p : cmp.probes) probes.push_back({p.x1, p.x2, p.x3});
  const double ref = cmp.max_reference;
  json j{{"probes", probes},
         {"max_abs_u0", ref},
         {"max_dev_case_ii", cmp.max_deviation[1]},
         {"max_dev_case_iii", cmp.max_deviation[2]},
         {"rel_dev_case_ii", ref > 0 ? cmp.max_deviation[1] / ref : 0.0},
         {"rel_dev_case_iii", ref > 0 ? cmp.max_deviation[2] / ref : 0.0},
         {"cell_size", cmp.cell_size},
         {"recon_steps_compared", compared},
         {"recon_steps_within_1_cell", within},
         {"recon_max_delta", worst}};
  auto os = open_output(dir / "compare.json");
  os << j.dump(2) << '\n';
}

}  // namespace mtrack
