#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "mtrack/model.hpp"
#include "mtrack/postprocess.hpp"

namespace mtrack {

/// Shortest text of v that reads back bit-exactly ("%.17g").
std::string format_double(double v);

/// `t,<t_1>,...` header, then `m,u(m,1),...` per receiver (m 1-based).
void write_record_csv(std::ostream& os, const WaveRecord& record);
/// Receiver layout, acquisition and provenance metadata.
void write_record_json(std::ostream& os, const WaveRecord& record);
WaveRecord read_record(std::istream& csv, std::istream& json);

/// Writes record.csv and record.json into dir.
void save_record(const std::filesystem::path& dir, const WaveRecord& record);
/// Reads a record from its CSV path; metadata comes from the .json next to it.
WaveRecord load_record(const std::filesystem::path& csv_path);

/// `j,t,x1,x2,x3,indicator` rows.
void write_recon_csv(std::ostream& os, const ReconResult& result);
/// Method, grid, skipped steps and fill flags.
void write_recon_json(std::ostream& os, const ReconResult& result);
ReconResult read_recon(std::istream& csv, std::istream& json);
/// recon.csv, recon.json and (parallel tuning only) schedule.csv.
void save_recon(const std::filesystem::path& dir, const ReconResult& result);
ReconResult load_recon(const std::filesystem::path& csv_path);

/// `level,slot,j,radius` rows.
void write_schedule_csv(std::ostream& os, const TuningSchedule& schedule);

/// `segment,t,x1,x2,x3` rows: each segment's curve at its own nodes.
void write_smooth_csv(std::ostream& os, const SegmentSet& set);
/// Per-segment order, coefficients and residuals.
void write_coeffs_json(std::ostream& os, const SegmentSet& set);
void save_smooth(const std::filesystem::path& dir, const SegmentSet& set);

/// Opens a file for writing, throwing IoError on failure.
std::ofstream open_output(const std::filesystem::path& path);
std::ifstream open_input(const std::filesystem::path& path);

}  // namespace mtrack
