#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtrack/forward.hpp"
#include "mtrack/imaging.hpp"
#include "mtrack/model.hpp"
#include "mtrack/postprocess.hpp"
#include "mtrack/trajectory.hpp"

namespace mtrack {

/// Inclusion layouts of the finger-emitter comparison.
enum class MediumCase { Homogeneous, CaseII, CaseIII };

std::string to_string(MediumCase c);
MediumCase parse_medium_case(const std::string& s);

/// Homogeneous background with the named inclusion: a 2 x 10 x 10 cuboid
/// centred at (-2, 0, 0) (case-ii) or (2, 0, 0) (case-iii).
MediumSpec make_medium(MediumCase c, double c0, double inclusion_speed = 1500.0);

struct ExperimentConfig {
  std::string preset{"paper-default"};
  std::string scenario{"letter-C"};
  MediumCase medium{MediumCase::Homogeneous};
  double inclusion_speed{1500.0};
  double omega0{1.0};
  double c0{330.0};
  double patch_radius{10.0};
  double theta_min{};
  double theta_max{};
  double phi_min{};
  double phi_max{};
  std::size_t receivers{200};
  double dt{0.1};
  std::optional<double> terminal_time;  // scenario default when unset
  double half_width{8.0};
  std::size_t mesh{50};
  double noise{0.05};
  std::uint64_t seed{1};
  SearchMethod method{SearchMethod::Global};
  std::optional<double> v_max;  // trajectory bound when unset
  std::size_t order{3};
  bool segmented{false};
  double gap_factor{3.0};
  std::size_t voxels{20};
  double stroke_speed{8.0};
  double connector_speed{80.0};

  ExperimentConfig();
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Names accepted by preset(): paper-default, paper-default-C, -3, -8, -cyl, -cone, -hello.
const std::vector<std::string>& preset_names();
ExperimentConfig preset(const std::string& name);

/// Flat `key = value` text, `#` comments. A `preset` key (if any) must come
/// first and seeds the defaults; unknown keys are rejected.
ExperimentConfig parse_config(const std::string& text);
/// Preset name, or a path to a config file.
ExperimentConfig load_config(const std::string& name_or_path);
/// Every key in a fixed order; parse_config(to_config_text(c)) == c.
std::string to_config_text(const ExperimentConfig& c);
/// Sets one key from its text value; throws InvalidArgument for unknown keys or bad values.
void apply_config_key(ExperimentConfig& c, const std::string& key, const std::string& value);
/// Documented keys with one-line descriptions, for help output.
const std::vector<std::pair<std::string, std::string>>& config_keys();
/// 16 hex digits of the FNV-1a hash of the canonical text.
std::string config_hash(const ExperimentConfig& c);

/// Run-time objects derived from a config.
Trajectory config_trajectory(const ExperimentConfig& c);
ReceiverArray config_receivers(const ExperimentConfig& c);
TimeGrid config_grid(const ExperimentConfig& c, const Trajectory& traj);
SamplingMesh config_mesh(const ExperimentConfig& c);
MediumSpec config_medium(const ExperimentConfig& c);

/// Noiseless forward record: retarded potential in a homogeneous medium,
/// frequency-domain scattering otherwise.
WaveRecord config_forward(const ExperimentConfig& c, const Trajectory& traj);

/// Error raised inside a pipeline phase, labelled with the phase.
class PhaseError : public std::runtime_error {
 public:
  PhaseError(std::string phase, const std::string& what);
  const std::string& phase() const { return phase_; }

 private:
  std::string phase_;
};

struct PhaseTiming {
  std::string phase;
  double seconds{};
};

struct ExperimentReport {
  ExperimentConfig config;
  std::string hash;
  std::filesystem::path run_dir;
  std::string forward_method;
  ReconResult recon;
  SegmentSet smoothed;
  TrajectoryMetrics metrics;
  std::vector<PhaseTiming> timings;
  std::map<std::string, std::filesystem::path> artifacts;  // name -> file
  bool smoothed_exported{false};
};

/// synthesize -> noise -> reconstruct -> postprocess -> metrics -> persist,
/// all under output_root / "run-<hash>". Every file but timings.json is a
/// deterministic function of the config.
ExperimentReport run_experiment(const ExperimentConfig& config, const std::filesystem::path& output_root);

/// truth.csv, raw.csv, smoothed.csv (when any segment exists) and their
/// x2-x3 projections. Returns the files written.
std::map<std::string, std::filesystem::path> export_plot_data(const ExperimentReport& report,
                                                              const Trajectory& truth,
                                                              const std::filesystem::path& dir);

struct MediaComparison {
  std::vector<Point3> probes;
  std::vector<double> times;
  /// series[case][probe][j]: case 0 homogeneous, 1 case-ii, 2 case-iii.
  std::vector<std::vector<std::vector<double>>> series;
  double max_reference{};        // max |u0| over probes and steps
  double max_deviation[3]{};     // max |u_case - u0|
  ReconResult recon[3];
  std::vector<double> recon_delta;  // per step: max pairwise distance between cases
  double cell_size{};
};

/// Frequency-domain synthesis of all three media with a shared acquisition,
/// noise stream and reconstruction, plus the probe time series.
MediaComparison compare_media(const ExperimentConfig& base, const std::vector<Point3>& probes);

/// The two probe points of the finger-emitter comparison.
std::vector<Point3> default_probes();

void write_comparison(const std::filesystem::path& dir, const MediaComparison& cmp);

}  // namespace mtrack
