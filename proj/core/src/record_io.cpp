#include "mtrack/record_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "mtrack/errors.hpp"

namespace mtrack {

using nlohmann::json;

namespace {

json point_json(const Point3& p) { return json::array({p.x1, p.x2, p.x3}); }

Point3 point_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw IoError("expected a [x1, x2, x3] array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() && s.find_first_not_of(" \r", used) != std::string::npos) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError("not a number: '" + s + "'");
  }
}

std::size_t parse_index(const std::string& s) {
  const double v = parse_double(s);
  if (!(v >= 0.0) || v != std::floor(v)) throw IoError("not an index: '" + s + "'");
  return static_cast<std::size_t>(v);
}

json read_json(std::istream& is) {
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed JSON: ") + e.what());
  }
}

json medium_json(const MediumSpec& m) {
  json j{{"c0", m.c0}};
  if (m.inclusion)
    j["inclusion"] = {{"center", point_json(m.inclusion->center)},
                      {"size", point_json(m.inclusion->size)},
                      {"speed", m.inclusion->speed}};
  else
    j["inclusion"] = nullptr;
  return j;
}

MediumSpec medium_from(const json& j) {
  MediumSpec m;
  m.c0 = j.at("c0").get<double>();
  if (j.contains("inclusion") && !j["inclusion"].is_null()) {
    const json& c = j["inclusion"];
    m.inclusion = Cuboid{point_from(c.at("center")), point_from(c.at("size")), c.at("speed").get<double>()};
  }
  return m;
}

json grid_json(const TimeGrid& g) { return {{"T", g.terminal_time()}, {"N_t", g.size()}, {"dt", g.dt()}}; }

TimeGrid grid_from(const json& j) {
  return TimeGrid::restore(j.at("T").get<double>(), j.at("N_t").get<std::size_t>(), j.at("dt").get<double>());
}

std::filesystem::path sibling_json(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  return p.replace_extension(".json");
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  return os;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  return is;
}

void write_record_csv(std::ostream& os, const WaveRecord& record) {
  os << 't';
  for (double t : record.grid().times()) os << ',' << format_double(t);
  os << '\n';
  for (std::size_t m = 0; m < record.n_receivers(); ++m) {
    os << m + 1;
    for (double u : record.row(m)) os << ',' << format_double(u);
    os << '\n';
  }
}

void write_record_json(std::ostream& os, const WaveRecord& record) {
  const auto& rcv = record.receivers();
  const auto& meta = record.meta();
  json positions = json::array();
  for (const auto& p : rcv.positions) positions.push_back(point_json(p));
  json j;
  j["receivers"] = {{"positions", positions},
                    {"weights", rcv.weights},
                    {"patch",
                     {{"radius", rcv.patch.radius},
                      {"theta_min", rcv.patch.theta_min},
                      {"theta_max", rcv.patch.theta_max},
                      {"phi_min", rcv.patch.phi_min},
                      {"phi_max", rcv.patch.phi_max}}},
                    {"n_theta", rcv.n_theta},
                    {"n_phi", rcv.n_phi}};
  j["omega0"] = meta.omega0;
  j["c0"] = meta.c0;
  j["T"] = record.grid().terminal_time();
  j["N_t"] = record.n_steps();
  j["dt"] = record.grid().dt();
  j["noise"] = meta.noise;
  j["seed"] = meta.seed;
  j["trajectory_id"] = meta.trajectory_id;
  j["forward_method"] = meta.forward_method;
  if (meta.medium) j["medium"] = medium_json(*meta.medium);
  os << j.dump(2) << '\n';
}

WaveRecord read_record(std::istream& csv, std::istream& json_in) {
  const json j = read_json(json_in);
  try {
    ReceiverArray rcv;
    const json& r = j.at("receivers");
    for (const auto& p : r.at("positions")) rcv.positions.push_back(point_from(p));
    rcv.weights = r.at("weights").get<std::vector<double>>();
    const json& patch = r.at("patch");
    rcv.patch = {patch.at("radius").get<double>(), patch.at("theta_min").get<double>(),
                 patch.at("theta_max").get<double>(), patch.at("phi_min").get<double>(),
                 patch.at("phi_max").get<double>()};
    rcv.n_theta = r.at("n_theta").get<std::size_t>();
    rcv.n_phi = r.at("n_phi").get<std::size_t>();

    RecordMeta meta;
    meta.omega0 = j.at("omega0").get<double>();
    meta.c0 = j.at("c0").get<double>();
    meta.noise = j.at("noise").get<double>();
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.trajectory_id = j.at("trajectory_id").get<std::string>();
    meta.forward_method = j.at("forward_method").get<std::string>();
    if (j.contains("medium")) meta.medium = medium_from(j["medium"]);

    WaveRecord record(std::move(rcv), grid_from(j), std::move(meta));

    std::string line;
    if (!std::getline(csv, line)) throw IoError("record.csv: missing header");
    const auto header = split_csv_line(line);
    if (header.empty() || header[0] != "t" || header.size() != record.n_steps() + 1)
      throw IoError("record.csv: header does not match N_t from the metadata");
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
      if (line.empty() || line == "\r") continue;
      const auto cells = split_csv_line(line);
      if (cells.size() != record.n_steps() + 1) throw IoError("record.csv: row length mismatch");
      const std::size_t m = parse_index(cells[0]);
      if (m == 0 || m > record.n_receivers()) throw IoError("record.csv: receiver index out of range");
      auto row = record.row(m - 1);
      for (std::size_t k = 0; k < row.size(); ++k) row[k] = parse_double(cells[k + 1]);
      ++rows;
    }
    if (rows != record.n_receivers()) throw IoError("record.csv: receiver count does not match the metadata");
    record.validate();
    return record;
  } catch (const json::exception& e) {
    throw IoError(std::string("record.json: ") + e.what());
  }
}

void save_record(const std::filesystem::path& dir, const WaveRecord& record) {
  std::filesystem::create_directories(dir);
  auto csv = open_output(dir / "record.csv");
  write_record_csv(csv, record);
  auto js = open_output(dir / "record.json");
  write_record_json(js, record);
}

WaveRecord load_record(const std::filesystem::path& csv_path) {
  auto csv = open_input(csv_path);
  auto js = open_input(sibling_json(csv_path));
  return read_record(csv, js);
}

void write_recon_csv(std::ostream& os, const ReconResult& result) {
  os << "j,t,x1,x2,x3,indicator\n";
  for (const auto& p : result.points)
    os << p.step << ',' << format_double(p.t) << ',' << format_double(p.z.x1) << ',' << format_double(p.z.x2) << ','
       << format_double(p.z.x3) << ',' << format_double(p.indicator) << '\n';
}

void write_recon_json(std::ostream& os, const ReconResult& result) {
  json j;
  j["method"] = to_string(result.method);
  j["grid"] = grid_json(result.grid);
  j["skipped"] = result.skipped;
  std::vector<std::size_t> filled;
  for (const auto& p : result.points)
    if (p.filled) filled.push_back(p.step);
  j["filled"] = filled;
  if (result.schedule) {
    j["schedule_levels"] = result.schedule->levels;
    j["unvisited"] = result.schedule->unvisited;
  }
  os << j.dump(2) << '\n';
}

ReconResult read_recon(std::istream& csv, std::istream& json_in) {
  const json j = read_json(json_in);
  ReconResult r;
  std::vector<std::size_t> filled;
  try {
    r.method = parse_search_method(j.at("method").get<std::string>());
    r.grid = grid_from(j.at("grid"));
    r.skipped = j.at("skipped").get<std::vector<std::size_t>>();
    filled = j.value("filled", std::vector<std::size_t>{});
  } catch (const json::exception& e) {
    throw IoError(std::string("recon.json: ") + e.what());
  }
  std::string line;
  if (!std::getline(csv, line) || split_csv_line(line).size() != 6) throw IoError("recon.csv: bad header");
  while (std::getline(csv, line)) {
    if (line.empty() || line == "\r") continue;
    const auto c = split_csv_line(line);
    if (c.size() != 6) throw IoError("recon.csv: row length mismatch");
    ReconPoint p;
    p.step = parse_index(c[0]);
    if (p.step == 0 || p.step > r.grid.size()) throw IoError("recon.csv: step out of range");
    if (!r.points.empty() && p.step <= r.points.back().step) throw IoError("recon.csv: steps must increase");
    p.t = parse_double(c[1]);
    p.z = {parse_double(c[2]), parse_double(c[3]), parse_double(c[4])};
    p.indicator = parse_double(c[5]);
    p.filled = std::find(filled.begin(), filled.end(), p.step) != filled.end();
    r.points.push_back(p);
  }
  return r;
}

void write_schedule_csv(std::ostream& os, const TuningSchedule& schedule) {
  os << "level,slot,j,radius\n";
  for (const auto& e : schedule.entries)
    os << e.level << ',' << e.slot << ',' << e.step << ',' << format_double(e.radius) << '\n';
}

void save_recon(const std::filesystem::path& dir, const ReconResult& result) {
  std::filesystem::create_directories(dir);
  auto csv = open_output(dir / "recon.csv");
  write_recon_csv(csv, result);
  auto js = open_output(dir / "recon.json");
  write_recon_json(js, result);
  if (result.schedule) {
    auto sc = open_output(dir / "schedule.csv");
    write_schedule_csv(sc, *result.schedule);
  }
}

ReconResult load_recon(const std::filesystem::path& csv_path) {
  auto csv = open_input(csv_path);
  auto js = open_input(sibling_json(csv_path));
  return read_recon(csv, js);
}

void write_smooth_csv(std::ostream& os, const SegmentSet& set) {
  os << "segment,t,x1,x2,x3\n";
  for (std::size_t s = 0; s < set.segments.size(); ++s) {
    const auto& seg = set.segments[s];
    for (std::size_t j = seg.range.begin; j < seg.range.end; ++j) {
      const double t = set.points[j].t;
      const Point3 z = seg.curve.eval(t);
      os << s + 1 << ',' << format_double(t) << ',' << format_double(z.x1) << ',' << format_double(z.x2) << ','
         << format_double(z.x3) << '\n';
    }
  }
}

void write_coeffs_json(std::ostream& os, const SegmentSet& set) {
  json segs = json::array();
  for (std::size_t s = 0; s < set.segments.size(); ++s) {
    const auto& seg = set.segments[s];
    json a = json::array(), b = json::array();
    for (const auto& p : seg.curve.a) a.push_back(point_json(p));
    for (const auto& p : seg.curve.b) b.push_back(point_json(p));
    segs.push_back({{"segment", s + 1},
                    {"first_index", seg.range.begin},
                    {"count", seg.range.size()},
                    {"t_begin", set.points[seg.range.begin].t},
                    {"t_end", set.points[seg.range.end - 1].t},
                    {"requested_order", seg.requested_order},
                    {"order", seg.curve.order},
                    {"order_reduced", seg.order_reduced},
                    {"time_shift", seg.curve.time_shift},
                    {"time_scale", seg.curve.time_scale},
                    {"span", seg.curve.span},
                    {"a0", point_json(seg.curve.a0)},
                    {"a", a},
                    {"b", b},
                    {"residual_ss", seg.residual_ss},
                    {"residual_rms", seg.residual_rms}});
  }
  os << json{{"segments", segs}}.dump(2) << '\n';
}

void save_smooth(const std::filesystem::path& dir, const SegmentSet& set) {
  std::filesystem::create_directories(dir);
  auto csv = open_output(dir / "smooth.csv");
  write_smooth_csv(csv, set);
  auto js = open_output(dir / "coeffs.json");
  write_coeffs_json(js, set);
}

}  // namespace mtrack
