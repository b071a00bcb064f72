#include "mtrack/demo.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <iostream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <thread>

#include "mtrack/errors.hpp"
#include "mtrack/forward.hpp"

namespace mtrack {

using nlohmann::json;

void SessionConfig::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be positive");
  };
  positive(omega0, "omega0");
  positive(c0, "c0");
  positive(half_width, "half_width");
  positive(v_max, "vmax");
  positive(dt, "dt");
  positive(patch_radius, "radius");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw InvalidArgument("noise must be non-negative");
  if (method == SearchMethod::Parallel) throw InvalidArgument("live sessions support global or sequential search");
  if (mesh < 2) throw InvalidArgument("mesh must be at least 2 points per axis");
  if (receivers < 1) throw InvalidArgument("receivers must be at least 1");
  if (!(gap_factor > 1.0)) throw InvalidArgument("gap_factor must exceed 1");
  if (!(plane_scale > 0.0) || !(plane_scale / 2 <= half_width))
    throw InvalidArgument("bad plane mapping: plane_scale must be positive and keep the canvas inside the search cube");
  if (!(v_max < c0)) throw InvalidArgument("vmax must stay below c0");
}

Point3 canvas_to_space(double u, double v, double plane_scale) {
  return {0.0, plane_scale * (u - 0.5), plane_scale * (0.5 - v)};
}

namespace {

ReceiverArray session_receivers(const SessionConfig& c) {
  constexpr double pi = std::numbers::pi;
  return make_receiver_array(c.patch_radius, pi / 4, 3 * pi / 4, -pi / 4, pi / 4, c.receivers);
}

SamplingMesh session_mesh(const SessionConfig& c) { return SamplingMesh::cube(c.half_width, c.mesh); }

// One tracking step shared by the live and offline paths.
std::optional<ReconPoint> track_step(const SessionConfig& cfg, const SamplingMesh& mesh,
                                     std::optional<SequentialTracker>& tracker, double& running_max,
                                     const ColumnIndicator& column, std::size_t step) {
  if (cfg.method == SearchMethod::Sequential) {
    if (!tracker) tracker.emplace(mesh, cfg.v_max, cfg.dt);
    return tracker->advance(column, step);
  }
  running_max = std::max(running_max, column.column_norm());
  if (!column.defined() || column.column_norm() < 1e-12 * running_max) return std::nullopt;
  const ArgmaxResult best = grid_argmax(column, mesh);
  return ReconPoint{step, column.t(), best.z, best.value, false};
}

json point_json(const Point3& p) { return json::array({p.x1, p.x2, p.x3}); }

}  // namespace

Session::Session(SessionConfig config, std::string id)
    : config_(config), id_(std::move(id)), receivers_(session_receivers(config)), mesh_(session_mesh(config)) {
  config_.validate();
}

void Session::reset() {
  samples_.clear();
  knot_times_.clear();
  knots_.clear();
  tracker_.reset();
  running_max_norm_ = 0.0;
  points_.clear();
  skipped_.clear();
  emitted_ = 0;
}

std::optional<ReconPoint> Session::ingest_stroke_point(double t, double u, double v) {
  if (!std::isfinite(t) || (!samples_.empty() && !(t > samples_.back().t)))
    throw InvalidArgument("stroke_point: timestamps must increase strictly");
  if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0))
    throw InvalidArgument("stroke_point: (u, v) outside the canvas [0, 1]^2");

  const std::size_t step = samples_.size() + 1;
  const double t_step = static_cast<double>(step) * config_.dt;
  samples_.push_back({t, u, v});
  knot_times_.push_back(t_step);
  knots_.push_back(canvas_to_space(u, v, config_.plane_scale));

  std::vector<double> column(receivers_.size());
  try {
    const Trajectory path = Trajectory::sampled("stroke", knot_times_, knots_);
    const SourceSignal signal{config_.omega0};
    for (std::size_t m = 0; m < receivers_.size(); ++m) {
      const double clean = retarded_potential(receivers_.positions[m], t_step, path, config_.c0, signal);
      column[m] = config_.noise == 0.0 ? clean : clean * (1.0 + config_.noise * noise_draw(config_.seed, m, step));
    }
  } catch (...) {
    samples_.pop_back();
    knot_times_.pop_back();
    knots_.pop_back();
    throw;
  }

  const ColumnIndicator indicator(receivers_, column, t_step, IndicatorParams{config_.omega0});
  auto p = track_step(config_, mesh_, tracker_, running_max_norm_, indicator, step);
  if (p) {
    points_.push_back(*p);
    ++emitted_;
  } else {
    skipped_.push_back(step);
  }
  return p;
}

FinalizeResult Session::finalize() {
  if (points_.size() < 2) throw InvalidArgument("finalize: need at least two reconstructed points");
  FinalizeResult out;
  out.recon.method = config_.method;
  out.recon.grid = TimeGrid::from_step(config_.dt, samples_.size());
  out.recon.points = points_;
  out.recon.skipped = skipped_;
  out.smoothed = smooth(out.recon, SmoothOptions{config_.order, true, config_.gap_factor});
  reset();
  return out;
}

std::string recon_point_message(double client_t, const ReconPoint& p) {
  return json{{"type", "recon_point"},
              {"t", client_t},
              {"x1", p.z.x1},
              {"x2", p.z.x2},
              {"x3", p.z.x3},
              {"indicator", p.indicator}}
      .dump();
}

std::string skip_message(double client_t, const std::string& reason) {
  return json{{"type", "error"}, {"phase", "skip"}, {"t", client_t}, {"message", reason}}.dump();
}

std::string error_message(const std::string& phase, const std::string& message) {
  return json{{"type", "error"}, {"phase", phase}, {"message", message}}.dump();
}

std::vector<std::string> finalize_messages(const FinalizeResult& result) {
  std::vector<std::string> out;
  const auto& set = result.smoothed;
  json ranges = json::array();
  for (const auto& s : set.segments) ranges.push_back({s.range.begin + 1, s.range.end});
  out.push_back(json{{"type", "segment"}, {"ranges", ranges}}.dump());
  for (std::size_t k = 0; k < set.segments.size(); ++k) {
    const auto& seg = set.segments[k];
    json a = json::array(), b = json::array();
    for (const auto& p : seg.curve.a) a.push_back(point_json(p));
    for (const auto& p : seg.curve.b) b.push_back(point_json(p));
    json coeffs{{"order", seg.curve.order},
                {"order_reduced", seg.order_reduced},
                {"time_shift", seg.curve.time_shift},
                {"time_scale", seg.curve.time_scale},
                {"span", seg.curve.span},
                {"a0", point_json(seg.curve.a0)},
                {"a", a},
                {"b", b},
                {"residual_rms", seg.residual_rms}};
    out.push_back(json{{"type", "smooth"}, {"segment", k + 1}, {"coeffs", coeffs}}.dump());
  }
  return out;
}

SessionConfig parse_session_config(const std::string& json_line) {
  json j;
  try {
    j = json::parse(json_line);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidArgument("config: expected an object");
  SessionConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "type") continue;
      if (key == "omega0") c.omega0 = value.get<double>();
      else if (key == "c0") c.c0 = value.get<double>();
      else if (key == "noise") c.noise = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "method") c.method = parse_search_method(value.get<std::string>());
      else if (key == "mesh") c.mesh = value.get<std::size_t>();
      else if (key == "half_width") c.half_width = value.get<double>();
      else if (key == "plane_scale") c.plane_scale = value.get<double>();
      else if (key == "vmax") c.v_max = value.get<double>();
      else if (key == "order") c.order = value.get<std::size_t>();
      else if (key == "gap_factor") c.gap_factor = value.get<double>();
      else if (key == "dt") c.dt = value.get<double>();
      else if (key == "receivers") c.receivers = value.get<std::size_t>();
      else if (key == "radius") c.patch_radius = value.get<double>();
      else throw InvalidArgument("config: unknown field '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<std::string> Session::handle_line(const std::string& line) {
  if (line.find_first_not_of(" \t\r") == std::string::npos) return {};
  json msg;
  try {
    msg = json::parse(line);
  } catch (const json::exception&) {
    return {error_message("parse", "line is not valid JSON")};
  }
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
    return {error_message("parse", "message needs a string 'type' field")};
  const std::string type = msg["type"].get<std::string>();

  if (type == "config") {
    try {
      const SessionConfig c = parse_session_config(line);
      config_ = c;
      receivers_ = session_receivers(c);
      mesh_ = session_mesh(c);
      reset();
    } catch (const std::exception& e) {
      return {error_message("config", e.what())};
    }
    return {};
  }
  if (type == "stroke_point") {
    double t = 0, u = 0, v = 0;
    try {
      t = msg.at("t").get<double>();
      u = msg.at("u").get<double>();
      v = msg.at("v").get<double>();
    } catch (const json::exception&) {
      return {error_message("stroke_point", "stroke_point needs numeric t, u, v")};
    }
    try {
      if (auto p = ingest_stroke_point(t, u, v)) return {recon_point_message(t, *p)};
      return {skip_message(t, "indicator undefined at this step; point will be interpolated")};
    } catch (const std::exception& e) {
      return {error_message("stroke_point", e.what())};
    }
  }
  if (type == "finalize") {
    try {
      return finalize_messages(finalize());
    } catch (const std::exception& e) {
      return {error_message("finalize", e.what())};
    }
  }
  return {error_message("parse", "unknown message type '" + type + "'")};
}

std::vector<std::string> Session::handle_eof() {
  if (points_.size() < 2) return {};
  return finalize_messages(finalize());
}

ReconResult offline_replay(const SessionConfig& config, const std::vector<StrokeSample>& samples) {
  config.validate();
  if (samples.empty()) throw InvalidArgument("offline replay: no samples");
  std::vector<double> times;
  std::vector<Point3> points;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    times.push_back(static_cast<double>(j + 1) * config.dt);
    points.push_back(canvas_to_space(samples[j].u, samples[j].v, config.plane_scale));
  }
  const Trajectory path = Trajectory::sampled("stroke", times, points);
  const TimeGrid grid = TimeGrid::from_step(config.dt, samples.size());
  MediumSpec medium;
  medium.c0 = config.c0;
  const WaveRecord record =
      add_noise(synthesize_record(path, session_receivers(config), grid, medium, SourceSignal{config.omega0}),
                config.noise, config.seed);

  const SamplingMesh mesh = session_mesh(config);
  std::optional<SequentialTracker> tracker;
  double running_max = 0.0;
  ReconResult out;
  out.method = config.method;
  out.grid = grid;
  for (std::size_t step = 1; step <= grid.size(); ++step) {
    const ColumnIndicator column(record, step, IndicatorParams{config.omega0});
    if (auto p = track_step(config, mesh, tracker, running_max, column, step))
      out.points.push_back(*p);
    else
      out.skipped.push_back(step);
  }
  return out;
}

DemoServer::DemoServer(std::uint16_t port, SessionConfig defaults) : defaults_(defaults) {
  defaults_.validate();
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw IoError(std::string("socket: ") + std::strerror(errno));
  int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 16) < 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    throw IoError("cannot listen on port " + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

DemoServer::~DemoServer() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void DemoServer::stop() { stopping_ = true; }

namespace {

bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

void serve_connection(int fd, SessionConfig defaults, std::size_t id) {
  Session session(defaults, "session-" + std::to_string(id));
  std::string buffer;
  char chunk[4096];
  bool open = true;
  auto reply = [&](const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) out += l + '\n';
    if (!out.empty() && !send_all(fd, out)) open = false;
  };
  while (open) {
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    while (open && (nl = buffer.find('\n')) != std::string::npos) {
      const std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      reply(session.handle_line(line));
    }
  }
  if (open) {
    if (!buffer.empty()) reply(session.handle_line(buffer));
    try {
      reply(session.handle_eof());
    } catch (const std::exception& e) {
      reply({error_message("finalize", e.what())});
    }
  }
  ::close(fd);
}

}  // namespace

void DemoServer::run() {
  std::vector<std::jthread> workers;
  std::size_t next_id = 1;
  while (!stopping_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, 100);
    if (ready < 0 && errno != EINTR) throw IoError(std::string("poll: ") + std::strerror(errno));
    if (ready <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    workers.emplace_back(serve_connection, fd, defaults_, next_id++);
  }
}

}  // namespace mtrack
