#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtrack/imaging.hpp"
#include "mtrack/model.hpp"
#include "mtrack/postprocess.hpp"
#include "mtrack/trajectory.hpp"

namespace mtrack {

/// Acquisition and tracking settings of a live session.
struct SessionConfig {
  double omega0{1.0};
  double c0{330.0};
  double noise{0.05};
  std::uint64_t seed{1};
  SearchMethod method{SearchMethod::Sequential};  // sequential or global
  std::size_t mesh{25};
  double half_width{8.0};
  double plane_scale{16.0};  // canvas edge length in metres
  double v_max{20.0};
  std::size_t order{3};
  double gap_factor{3.0};
  double dt{0.1};
  std::size_t receivers{200};
  double patch_radius{10.0};

  void validate() const;
};

/// Canvas (u, v) in [0, 1]^2 to the plane x1 = 0: (0, s (u - 0.5), s (0.5 - v)).
Point3 canvas_to_space(double u, double v, double plane_scale);

struct StrokeSample {
  double t{};
  double u{};
  double v{};
};

struct FinalizeResult {
  ReconResult recon;
  SegmentSet smoothed;
};

/// One live writing session. Stroke sample j (1-based, in arrival order) is
/// synthesized at t_j = j * dt on the session grid; client timestamps only
/// order the samples and are echoed back.
class Session {
 public:
  explicit Session(SessionConfig config = {}, std::string id = "session");
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const SessionConfig& config() const { return config_; }
  const std::string& id() const { return id_; }
  std::size_t ingested() const { return samples_.size(); }
  std::size_t emitted() const { return emitted_; }

  /// Reconstructed point for the sample, or nothing when its column is skipped.
  /// Throws InvalidArgument for out-of-order times or off-canvas points.
  std::optional<ReconPoint> ingest_stroke_point(double t, double u, double v);

  /// Gap segmentation and per-segment smoothing of the points so far; the
  /// session is then cleared for the next stroke.
  FinalizeResult finalize();

  /// Wire protocol: one JSON line in, response lines out.
  std::vector<std::string> handle_line(const std::string& line);
  /// Messages for end of input (finalizes pending points, if any).
  std::vector<std::string> handle_eof();

 private:
  void reset();

  SessionConfig config_;
  std::string id_;
  ReceiverArray receivers_;
  SamplingMesh mesh_;
  std::vector<StrokeSample> samples_;
  std::vector<double> knot_times_;
  std::vector<Point3> knots_;
  std::optional<SequentialTracker> tracker_;
  double running_max_norm_{};  // global mode skip rule
  std::vector<ReconPoint> points_;
  std::vector<std::size_t> skipped_;
  std::size_t emitted_{};
};

/// Same samples through synthesize -> noise -> reconstruct on a full record.
ReconResult offline_replay(const SessionConfig& config, const std::vector<StrokeSample>& samples);

/// Parses a config message body (fields as in SessionConfig; unknown fields rejected).
SessionConfig parse_session_config(const std::string& json_line);

/// Wire encodings (single-line JSON).
std::string recon_point_message(double client_t, const ReconPoint& p);
std::string skip_message(double client_t, const std::string& reason);
std::string error_message(const std::string& phase, const std::string& message);
std::vector<std::string> finalize_messages(const FinalizeResult& result);

/// Newline-delimited JSON over TCP on 127.0.0.1, one session per connection.
class DemoServer {
 public:
  /// port 0 picks an ephemeral port.
  explicit DemoServer(std::uint16_t port, SessionConfig defaults = {});
  ~DemoServer();
  DemoServer(const DemoServer&) = delete;
  DemoServer& operator=(const DemoServer&) = delete;

  std::uint16_t port() const { return port_; }
  /// Accepts connections until stop() is called.
  void run();
  void stop();

 private:
  int listen_fd_{-1};
  std::uint16_t port_{};
  SessionConfig defaults_;
  std::atomic<bool> stopping_{false};
};

}  // namespace mtrack
