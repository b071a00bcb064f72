#include <CLI11.hpp>

#include <cstdio>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <string>

#include "mtrack/demo.hpp"
#include "mtrack/errors.hpp"
#include "mtrack/experiment.hpp"
#include "mtrack/forward.hpp"
#include "mtrack/imaging.hpp"
#include "mtrack/postprocess.hpp"
#include "mtrack/record_io.hpp"
#include "mtrack/trajectory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kUsage = 1;
constexpr int kRuntime = 2;

/// Config-key flags shared by the pipeline subcommands.
struct ConfigFlags {
  std::string base;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app, bool with_base) {
    if (with_base) app->add_option("--config", base, "preset name or config file");
    for (const auto& [key, help] : mtrack::config_keys()) {
      if (key == "preset") continue;
      app->add_option("--" + key, values[key], help);
    }
  }

  mtrack::ExperimentConfig build(const CLI::App* app) const {
    mtrack::ExperimentConfig c = base.empty() ? mtrack::preset("paper-default") : mtrack::load_config(base);
    for (const auto& [key, value] : values)
      if (app->count("--" + key) > 0) mtrack::apply_config_key(c, key, value);
    c.validate();
    return c;
  }
};

std::string footer() {
  std::string s = "Scenarios:";
  for (const auto& n : mtrack::builtin_trajectory_names()) s += " " + n;
  s += "\nPresets:";
  for (const auto& n : mtrack::preset_names()) s += " " + n;
  s += "\nExit codes: 0 success, 1 usage error, 2 runtime error.";
  return s;
}

json metrics_json(const mtrack::TrajectoryMetrics& m) {
  json j{{"points", m.per_step.size()},         {"mean_error", m.mean},
         {"max_error", m.max},                  {"cell_size", m.cell_size},
         {"within_1_cell", m.within_1_cell},    {"within_2_cells", m.within_2_cells}};
  j["hausdorff_smoothed"] = m.has_hausdorff ? json(m.hausdorff) : json(nullptr);
  return j;
}

mtrack::Trajectory load_truth(const std::string& spec) {
  const auto& names = mtrack::builtin_trajectory_names();
  if (std::find(names.begin(), names.end(), spec) != names.end()) return mtrack::builtin_trajectory(spec);
  auto is = mtrack::open_input(spec);
  return mtrack::read_trajectory_csv(is, fs::path(spec).stem().string());
}

mtrack::DemoServer* active_server = nullptr;

extern "C" void on_signal(int) {
  if (active_server) active_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mtrack: moving point-source tracking from limited-aperture wave records"};
  app.footer(footer());
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "synthesize a noisy receiver record");
  ConfigFlags sim_flags;
  std::string sim_out = ".";
  sim_flags.attach(sim, true);
  sim->add_option("--out", sim_out, "output directory")->capture_default_str();

  // reconstruct
  auto* rec = app.add_subcommand("reconstruct", "reconstruct the trajectory from a record");
  std::string rec_record, rec_method = "global", rec_out = ".";
  std::size_t rec_grid = 50;
  double rec_half = 8.0, rec_vmax = 0.0;
  rec->add_option("--record", rec_record, "record.csv (record.json alongside)")->required();
  rec->add_option("--method", rec_method, "global | sequential | parallel")->capture_default_str();
  rec->add_option("--grid", rec_grid, "sampling points per axis")->capture_default_str();
  rec->add_option("--half_width", rec_half, "search cube half width, m")->capture_default_str();
  rec->add_option("--vmax", rec_vmax, "speed bound, m/s (default: the record's built-in trajectory bound)");
  rec->add_option("--out", rec_out, "output directory")->capture_default_str();

  // postprocess
  auto* post = app.add_subcommand("postprocess", "Fourier smoothing of a reconstruction");
  std::string post_recon, post_out = ".";
  std::size_t post_order = 3;
  bool post_segmented = false;
  double post_gap = 3.0;
  post->add_option("--recon", post_recon, "recon.csv (recon.json alongside)")->required();
  post->add_option("--order", post_order, "Fourier order P")->capture_default_str();
  post->add_flag("--segmented", post_segmented, "split at gaps and smooth each segment");
  post->add_option("--gap_factor", post_gap, "gap threshold in mean consecutive distances")->capture_default_str();
  post->add_option("--out", post_out, "output directory")->capture_default_str();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "error metrics of a reconstruction against the truth");
  std::string eval_recon, eval_truth;
  double eval_cell = 16.0 / 49.0;
  eval->add_option("--recon", eval_recon, "recon.csv")->required();
  eval->add_option("--truth", eval_truth, "trajectory CSV (t,x1,x2,x3) or scenario id")->required();
  eval->add_option("--cell", eval_cell, "cell size for the within-k-cells fractions, m")->capture_default_str();

  // run
  auto* run = app.add_subcommand("run", "full pipeline for a preset or config file");
  ConfigFlags run_flags;
  std::string run_out = "runs";
  run_flags.attach(run, true);
  run->add_option("--out", run_out, "root directory for run-<hash> folders")->capture_default_str();

  // compare
  auto* cmp = app.add_subcommand("compare", "homogeneous vs case-ii vs case-iii media");
  ConfigFlags cmp_flags;
  std::string cmp_out = "compare";
  cmp_flags.attach(cmp, true);
  cmp->add_option("--out", cmp_out, "output directory")->capture_default_str();

  // trajectory
  auto* traj = app.add_subcommand("trajectory", "export a built-in trajectory as CSV");
  std::string traj_name = "letter-C", traj_out;
  std::size_t traj_samples = 1000;
  traj->add_option("--scenario", traj_name, "scenario id")->capture_default_str();
  traj->add_option("--samples", traj_samples, "uniform samples over (0, T]")->capture_default_str();
  traj->add_option("--out", traj_out, "output file (default stdout)");

  // serve
  auto* serve = app.add_subcommand("serve", "live demo service (newline-delimited JSON over TCP)");
  int serve_port = 7878;
  serve->add_option("--port", serve_port, "TCP port on 127.0.0.1 (0 = ephemeral)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (sim->parsed()) {
      const auto c = sim_flags.build(sim);
      const auto path = mtrack::config_trajectory(c);
      const auto record = mtrack::add_noise(mtrack::config_forward(c, path), c.noise, c.seed);
      mtrack::save_record(sim_out, record);
      std::cout << (fs::path(sim_out) / "record.csv").string() << '\n';
    } else if (rec->parsed()) {
      const auto method = mtrack::parse_search_method(rec_method);
      const auto mesh = mtrack::SamplingMesh::cube(rec_half, rec_grid);
      if (rec->count("--vmax") && !(rec_vmax > 0.0)) throw mtrack::InvalidArgument("--vmax must be positive");
      const auto record = mtrack::load_record(rec_record);
      double v_max = rec_vmax;
      if (!rec->count("--vmax")) {
        if (method != mtrack::SearchMethod::Global) {
          const auto& names = mtrack::builtin_trajectory_names();
          const auto& id = record.meta().trajectory_id;
          if (std::find(names.begin(), names.end(), id) == names.end())
            throw mtrack::InvalidArgument("--vmax is required for records of non-built-in trajectories");
          v_max = mtrack::builtin_trajectory(id).v_max();
        } else {
          v_max = 1.0;
        }
      }
      const auto result = mtrack::reconstruct(method, record, mesh, v_max, {record.meta().omega0});
      mtrack::save_recon(rec_out, result);
      std::cout << (fs::path(rec_out) / "recon.csv").string() << '\n';
    } else if (post->parsed()) {
      const auto result = mtrack::load_recon(post_recon);
      const auto set = mtrack::smooth(result, {post_order, post_segmented, post_gap});
      mtrack::save_smooth(post_out, set);
      std::cout << set.segments.size() << " segment(s) -> " << (fs::path(post_out) / "smooth.csv").string() << '\n';
    } else if (eval->parsed()) {
      if (!(eval_cell > 0.0)) throw mtrack::InvalidArgument("--cell must be positive");
      const auto result = mtrack::load_recon(eval_recon);
      const auto truth = load_truth(eval_truth);
      std::cout << metrics_json(mtrack::trajectory_error(result, truth, eval_cell)).dump(2) << '\n';
    } else if (run->parsed()) {
      const auto c = run_flags.build(run);
      const auto report = mtrack::run_experiment(c, run_out);
      json summary{{"run_dir", report.run_dir.string()},
                   {"scenario", c.scenario},
                   {"method", mtrack::to_string(c.method)},
                   {"forward_method", report.forward_method},
                   {"segments", report.smoothed.segments.size()},
                   {"metrics", metrics_json(report.metrics)}};
      std::cout << summary.dump(2) << '\n';
    } else if (cmp->parsed()) {
      const auto c = cmp_flags.build(cmp);
      const auto result = mtrack::compare_media(c, mtrack::default_probes());
      mtrack::write_comparison(cmp_out, result);
      std::cout << (fs::path(cmp_out) / "compare.json").string() << '\n';
    } else if (traj->parsed()) {
      if (traj_samples < 1) throw mtrack::InvalidArgument("--samples must be at least 1");
      const auto path = mtrack::builtin_trajectory(traj_name);
      const auto times = mtrack::TimeGrid(path.terminal_time(), traj_samples).times();
      if (traj_out.empty()) {
        mtrack::write_trajectory_csv(std::cout, path, times);
      } else {
        auto os = mtrack::open_output(traj_out);
        mtrack::write_trajectory_csv(os, path, times);
      }
    } else if (serve->parsed()) {
      if (serve_port < 0 || serve_port > 65535) throw mtrack::InvalidArgument("--port out of range");
      mtrack::DemoServer server(static_cast<std::uint16_t>(serve_port));
      active_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on 127.0.0.1:" << server.port() << std::endl;
      server.run();
      active_server = nullptr;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return 0;
}
