#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <numbers>
#include <sstream>
#include <unistd.h>

#include "mtrack/errors.hpp"
#include "mtrack/forward.hpp"
#include "mtrack/imaging.hpp"
#include "mtrack/postprocess.hpp"
#include "mtrack/record_io.hpp"

using namespace mtrack;
namespace fs = std::filesystem;
constexpr double kPi = std::numbers::pi;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mtrack-unit-" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

WaveRecord sample_record() {
  const auto tr = builtin_trajectory("digit-8");
  const auto rx = make_receiver_array(10.0, kPi / 4, 3 * kPi / 4, -kPi / 4, kPi / 4, 17);
  MediumSpec medium{330.0, std::nullopt};
  return add_noise(synthesize_record(tr, rx, TimeGrid(8.0, 23), medium, SourceSignal{}), 0.1, 77);
}

}  // namespace

TEST_CASE("doubles print so they read back bit-exactly") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 6.02214076e23, 0.0})
    CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("record round trip through streams and files") {
  const auto rec = sample_record();
  std::stringstream csv, js;
  write_record_csv(csv, rec);
  write_record_json(js, rec);
  const auto back = read_record(csv, js);
  CHECK(std::ranges::equal(back.values(), rec.values()));
  CHECK(back.receivers().positions == rec.receivers().positions);
  CHECK(back.receivers().weights == rec.receivers().weights);
  CHECK(back.grid().times() == rec.grid().times());
  CHECK(back.meta().noise == 0.1);
  CHECK(back.meta().seed == 77);
  CHECK(back.meta().trajectory_id == "digit-8");

  const auto dir = scratch("record");
  save_record(dir, rec);
  const auto loaded = load_record(dir / "record.csv");
  CHECK(std::ranges::equal(loaded.values(), rec.values()));
  fs::remove_all(dir);
}

TEST_CASE("record JSON carries the acquisition") {
  const auto rec = sample_record();
  std::stringstream js;
  write_record_json(js, rec);
  const auto j = nlohmann::json::parse(js.str());
  CHECK(j["N_t"] == 23);
  CHECK(j["receivers"]["positions"].size() == 17);
  CHECK(j["forward_method"] == "retarded");
}

TEST_CASE("malformed records raise IoError") {
  const auto rec = sample_record();
  std::stringstream good_js;
  write_record_json(good_js, rec);
  const std::string js = good_js.str();

  auto try_read = [&](const std::string& csv_text, const std::string& js_text) {
    std::stringstream c(csv_text), j(js_text);
    return read_record(c, j);
  };
  std::stringstream good_csv;
  write_record_csv(good_csv, rec);
  const std::string csv = good_csv.str();

  CHECK_THROWS_AS(try_read(csv, "{not json"), IoError);
  CHECK_THROWS_AS(try_read(csv, "{}"), IoError);
  CHECK_THROWS_AS(try_read("", js), IoError);
  CHECK_THROWS_AS(try_read("t,0.1\n", js), IoError);
  std::string short_csv = csv.substr(0, csv.rfind('\n', csv.size() - 2) + 1);  // last row removed
  CHECK_THROWS_AS(try_read(short_csv, js), IoError);
  std::string bad_cell = csv;
  bad_cell.replace(bad_cell.find("\n1,") + 3, 1, "x");
  CHECK_THROWS_AS(try_read(bad_cell, js), IoError);
  CHECK_THROWS_AS(load_record("/nonexistent/record.csv"), IoError);
  CHECK_THROWS_AS(open_output("/nonexistent/dir/out.csv"), IoError);
  CHECK_THROWS_AS(open_input("/nonexistent/in.csv"), IoError);
}

TEST_CASE("reconstruction round trip keeps skipped steps, fill flags and the schedule") {
  const auto rec = sample_record();
  const auto mesh = SamplingMesh::cube(8.0, 11);
  const auto res = reconstruct_parallel(rec, mesh, builtin_trajectory("digit-8").v_max(), {});
  std::stringstream csv, js;
  write_recon_csv(csv, res);
  write_recon_json(js, res);
  const auto back = read_recon(csv, js);
  CHECK(back.method == SearchMethod::Parallel);
  CHECK(back.skipped == res.skipped);
  REQUIRE(back.points.size() == res.points.size());
  for (std::size_t k = 0; k < res.points.size(); ++k) {
    CHECK(back.points[k].step == res.points[k].step);
    CHECK(back.points[k].z == res.points[k].z);
    CHECK(back.points[k].indicator == res.points[k].indicator);
    CHECK(back.points[k].filled == res.points[k].filled);
  }

  const auto dir = scratch("recon");
  save_recon(dir, res);
  CHECK(fs::exists(dir / "schedule.csv"));
  CHECK(load_recon(dir / "recon.csv").points.size() == res.points.size());
  std::stringstream sched;
  write_schedule_csv(sched, *res.schedule);
  std::string header;
  std::getline(sched, header);
  CHECK(header == "level,slot,j,radius");
  fs::remove_all(dir);

  std::stringstream bad_csv("j,t,x1,x2,x3,indicator\n5,0.1,0,0,0,1\n3,0.1,0,0,0,1\n"), js2(js.str());
  CHECK_THROWS_AS(read_recon(bad_csv, js2), IoError);
}

TEST_CASE("smoothed output lists each segment's curve and its coefficients") {
  std::vector<TimedPoint> pts;
  for (int j = 1; j <= 20; ++j) pts.push_back({0.1 * j, {j <= 10 ? 0.1 * j : 5.0 + 0.1 * j, 0, 0}});
  const auto set = smooth_points(pts, 0.1, SmoothOptions{2, true, 3.0});
  REQUIRE(set.segments.size() == 2);
  std::stringstream csv, js;
  write_smooth_csv(csv, set);
  write_coeffs_json(js, set);
  std::string line;
  int rows = 0;
  std::getline(csv, line);
  CHECK(line == "segment,t,x1,x2,x3");
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 20);
  const auto j = nlohmann::json::parse(js.str());
  REQUIRE(j["segments"].size() == 2);
  CHECK(j["segments"][1]["first_index"] == 10);
  CHECK(j["segments"][1]["a"].size() == 2);
  CHECK(j["segments"][0]["residual_rms"].get<double>() == set.segments[0].residual_rms);
  CHECK(j["segments"][0]["time_scale"].get<double>() == set.segments[0].curve.time_scale);
}
