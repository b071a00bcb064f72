#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "mtrack/demo.hpp"
#include "mtrack/errors.hpp"

using namespace mtrack;
using nlohmann::json;

namespace {

// Two horizontal strokes joined by an instant jump.
std::vector<StrokeSample> two_strokes() {
  std::vector<StrokeSample> s;
  double t = 0.0;
  for (int k = 0; k < 14; ++k) s.push_back({t += 0.05, 0.2 + 0.01 * k, 0.3});
  for (int k = 0; k < 14; ++k) s.push_back({t += 0.05, 0.6 + 0.01 * k, 0.7});
  return s;
}

std::string stroke_line(const StrokeSample& s) {
  return json{{"type", "stroke_point"}, {"t", s.t}, {"u", s.u}, {"v", s.v}}.dump();
}

}  // namespace

TEST_CASE("canvas maps onto the plane x1 = 0 with v pointing down") {
  CHECK(canvas_to_space(0.5, 0.5, 16.0) == Point3{0, 0, 0});
  CHECK(canvas_to_space(0.0, 0.0, 16.0) == Point3{0, -8, 8});
  CHECK(canvas_to_space(1.0, 1.0, 16.0) == Point3{0, 8, -8});
  SessionConfig c;
  CHECK_NOTHROW(c.validate());
  c.plane_scale = 20.0;  // canvas corners outside the search cube
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = SessionConfig{};
  c.method = SearchMethod::Parallel;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = SessionConfig{};
  c.v_max = 400.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("session rejects out-of-order and off-canvas samples without losing state") {
  Session s;
  CHECK(s.ingest_stroke_point(0.1, 0.5, 0.5));
  CHECK_THROWS_AS(s.ingest_stroke_point(0.1, 0.5, 0.5), InvalidArgument);
  CHECK_THROWS_AS(s.ingest_stroke_point(0.05, 0.5, 0.5), InvalidArgument);
  CHECK_THROWS_AS(s.ingest_stroke_point(0.2, 1.5, 0.5), InvalidArgument);
  CHECK(s.ingested() == 1);
  CHECK(s.ingest_stroke_point(0.2, 0.51, 0.5));
  CHECK(s.ingested() == 2);
  CHECK(s.emitted() == 2);
  Session fresh;
  CHECK_THROWS_AS(fresh.finalize(), InvalidArgument);
}

TEST_CASE("live tracking matches the offline replay of the same samples") {
  for (auto method : {SearchMethod::Sequential, SearchMethod::Global}) {
    SessionConfig cfg;
    cfg.method = method;
    cfg.receivers = 60;
    cfg.mesh = 17;
    Session live(cfg);
    const auto samples = two_strokes();
    std::vector<ReconPoint> online;
    for (const auto& s : samples)
      if (auto p = live.ingest_stroke_point(s.t, s.u, s.v)) online.push_back(*p);
    const auto offline = offline_replay(cfg, samples);
    REQUIRE(offline.points.size() == online.size());
    for (std::size_t k = 0; k < online.size(); ++k) {
      CHECK(offline.points[k].step == online[k].step);
      CHECK(offline.points[k].z == online[k].z);
      CHECK(offline.points[k].indicator == online[k].indicator);
    }
  }
  CHECK_THROWS_AS(offline_replay(SessionConfig{}, {}), InvalidArgument);
}

TEST_CASE("two strokes with a jump finalize into two smoothed segments") {
  SessionConfig cfg;
  cfg.method = SearchMethod::Global;
  cfg.noise = 0.0;
  Session s(cfg);
  for (const auto& p : two_strokes()) s.ingest_stroke_point(p.t, p.u, p.v);
  const auto result = s.finalize();
  REQUIRE(result.smoothed.segments.size() == 2);
  for (const auto& seg : result.smoothed.segments) CHECK(std::isfinite(seg.residual_rms));
  CHECK(result.smoothed.segments[0].range.end <= 14);
  CHECK(result.smoothed.segments[1].range.begin >= 14);
  CHECK(s.ingested() == 0);  // cleared for the next stroke

  const auto msgs = finalize_messages(result);
  REQUIRE(msgs.size() == 3);
  const auto seg = json::parse(msgs[0]);
  CHECK(seg["type"] == "segment");
  CHECK(seg["ranges"].size() == 2);
  const auto smooth = json::parse(msgs[1]);
  CHECK(smooth["type"] == "smooth");
  CHECK(smooth["segment"] == 1);
  CHECK(smooth["coeffs"]["a"].size() == smooth["coeffs"]["order"].get<std::size_t>());
  CHECK(smooth["coeffs"].contains("residual_rms"));
}

TEST_CASE("wire protocol messages") {
  const ReconPoint p{3, 0.3, {0.5, -1, 2}, 0.97, false};
  const auto m = json::parse(recon_point_message(1.25, p));
  CHECK(m["type"] == "recon_point");
  CHECK(m["t"] == 1.25);
  CHECK(m["x2"] == -1.0);
  CHECK(m["indicator"] == 0.97);
  const auto sk = json::parse(skip_message(2.0, "why"));
  CHECK(sk["type"] == "error");
  CHECK(sk["phase"] == "skip");
  const auto er = json::parse(error_message("parse", "bad"));
  CHECK(er["phase"] == "parse");
  CHECK(er["message"] == "bad");

  Session s;
  auto out = s.handle_line("not json");
  REQUIRE(out.size() == 1);
  CHECK(json::parse(out[0])["phase"] == "parse");
  out = s.handle_line(R"({"type":"dance"})");
  CHECK(json::parse(out[0])["phase"] == "parse");
  out = s.handle_line(R"({"type":"stroke_point","t":1})");
  CHECK(json::parse(out[0])["phase"] == "stroke_point");
  out = s.handle_line(R"({"type":"config","mesh":1})");
  CHECK(json::parse(out[0])["phase"] == "config");
  CHECK(s.handle_line("   ").empty());
  CHECK(s.handle_line(R"({"type":"config","mesh":13,"method":"global","noise":0})").empty());
  CHECK(s.config().mesh == 13);
  CHECK(s.config().method == SearchMethod::Global);
  out = s.handle_line(R"({"type":"finalize"})");
  CHECK(json::parse(out[0])["phase"] == "finalize");
  out = s.handle_line(stroke_line({0.1, 0.5, 0.5}));
  CHECK(json::parse(out[0])["type"] == "recon_point");
  CHECK(s.handle_eof().empty());  // one point is not enough to smooth

  CHECK_THROWS_AS(parse_session_config(R"({"type":"config","colour":"red"})"), InvalidArgument);
  CHECK_THROWS_AS(parse_session_config("[1,2]"), InvalidArgument);
  CHECK(parse_session_config(R"({"vmax":12.5,"seed":4})").v_max == 12.5);
}

TEST_CASE("server: one session per connection over TCP") {
  DemoServer server(0);
  REQUIRE(server.port() != 0);
  std::thread loop([&] { server.run(); });

  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(fd >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(server.port());
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);

  std::string request = R"({"type":"config","method":"global","noise":0,"mesh":17})" "\n";
  for (const auto& s : two_strokes()) request += stroke_line(s) + "\n";
  request += R"({"type":"finalize"})" "\n";
  REQUIRE(::send(fd, request.data(), request.size(), 0) == static_cast<ssize_t>(request.size()));
  ::shutdown(fd, SHUT_WR);

  std::string response;
  char buf[4096];
  ssize_t n;
  while ((n = ::recv(fd, buf, sizeof buf, 0)) > 0) response.append(buf, static_cast<std::size_t>(n));
  ::close(fd);
  server.stop();
  loop.join();

  std::istringstream lines(response);
  std::string line;
  int recon = 0, segments = 0, smooth = 0;
  while (std::getline(lines, line)) {
    const auto m = json::parse(line);
    if (m["type"] == "recon_point") ++recon;
    if (m["type"] == "segment") ++segments;
    if (m["type"] == "smooth") ++smooth;
  }
  CHECK(recon == 28);
  CHECK(segments == 1);
  CHECK(smooth == 2);
}
