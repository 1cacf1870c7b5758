#pragma once

#include <filesystem>
#include <nlohmann/json_fwd.hpp>

#include "core/closed_loop.hpp"
#include "core/multisine.hpp"
#include "core/plant.hpp"
#include "core/spectra.hpp"

namespace fblin {

// All CSV output uses shortest-round-trip doubles; rereading a file
// reproduces the in-memory values bit for bit.

void write_signal_csv(const std::filesystem::path& path, double fs,
                      const std::vector<double>& u);

void write_open_loop_csv(const std::filesystem::path& path, const OpenLoopRecord& rec);
OpenLoopRecord read_open_loop_csv(const std::filesystem::path& path);

// y_meas column of any record CSV carrying one (open-loop or decimated
// closed-loop logs).
std::vector<double> read_measured_channel(const std::filesystem::path& path);

void write_closed_loop_csv(const std::filesystem::path& path, const ClosedLoopRecord& rec);

// Outer-rate slice of a closed-loop record: t, v, y_meas.
void write_decimated_csv(const std::filesystem::path& path, const ClosedLoopRecord& rec);

void write_spectrum_csv(const std::filesystem::path& path, const SpectralEstimate& est);
void write_distortion_csv(const std::filesystem::path& path, const DistortionReport& rep);
void write_frf_csv(const std::filesystem::path& path, const FrfEstimate& frf);

nlohmann::ordered_json design_to_json(const ExcitationDesign& design);
ExcitationDesign design_from_json(const nlohmann::json& j);

nlohmann::ordered_json distortion_to_json(const DistortionReport& rep);
DistortionReport distortion_from_json(const nlohmann::json& j);
nlohmann::ordered_json delta_to_json(const DistortionDelta& delta);
nlohmann::ordered_json metrics_to_json(const ErrorMetrics& m);

void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace fblin
