#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "core/closed_loop.hpp"
#include "core/model.hpp"
#include "core/multisine.hpp"
#include "core/plant.hpp"
#include "core/spectra.hpp"

namespace fblin {

// Fully resolved experiment description. Every scenario has an embedded
// default configuration; a config document overrides individual fields.
struct ScenarioConfig {
  std::string scenario;
  std::uint64_t seed = 1;
  bool full_scale = false;
  unsigned threads = 0;  // realisation fan-out; 0 = hardware default, 1 = serial
  std::string out_dir;   // default output directory, CLI --out overrides

  // plant
  std::string plant_kind = "duffing";  // "duffing" | "surrogate"
  DuffingParams duffing;
  double plant_substep_s = 1e-4;
  double surrogate_feedback = 2e9;

  std::string model_path;  // resolved against the config file location

  MultisineSpec excitation;

  std::size_t realisations = 5;
  std::size_t periods = 3;
  std::size_t discard_periods = 1;
  std::size_t full_realisations = 10;
  std::size_t full_periods = 5;

  // mpc
  double q_weight = 1e12;
  double r_delta = 1.0;
  double ts_out = 1e-2;
  double ts_in = 1e-3;

  // ukf
  double ukf_r_cov = 1.13e-14;
  double ukf_q_scale = 0.05;  // q_cov = q_scale * r_cov * I
  double ukf_alpha = 1e-3;
  double ukf_beta = 2.0;
  double ukf_kappa = 0.0;

  std::optional<double> snr_db = 40.0;
  std::optional<double> noise_sigma_abs;  // absolute sigma, overrides snr_db

  // outer sine (beam scenario)
  double sine_freq_hz = 2.0;
  double sine_amplitude = 0.02;
  double sine_duration_s = 10.0;
  double sine_discard_s = 2.0;

  std::size_t active_realisations() const { return full_scale ? full_realisations : realisations; }
  std::size_t active_periods() const { return full_scale ? full_periods : periods; }
};

const std::vector<std::string>& scenario_ids();
ScenarioConfig default_config(const std::string& scenario_id);

// Parse a config document; defaults come from its scenario id. Relative
// model paths resolve against base_dir.
ScenarioConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::ordered_json config_to_json(const ScenarioConfig& cfg);
ScenarioConfig load_config(const std::filesystem::path& path);

struct ScenarioCheck {
  std::string name;
  bool passed = false;
  double value = 0.0;
  std::string detail;
};

struct ScenarioResult {
  std::string scenario;
  std::vector<std::filesystem::path> artifacts;
  nlohmann::ordered_json summary;
  std::vector<ScenarioCheck> checks;

  bool all_passed() const;
};

// Runs the scenario pipeline end to end, writing every record, report and
// a summary document under out_dir. Deterministic for a fixed config.
ScenarioResult run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);

// Building blocks, exposed for tests and the acceptance suite. These do no
// file I/O.

struct OpenLoopStudy {
  ExcitationDesign design;
  std::vector<SignalRecord> excitations;  // one period each
  std::vector<OpenLoopRecord> records;    // all periods
  std::vector<double> noise_sigma;        // per realisation, absolute
  SpectralEstimate spectrum;
  DistortionReport report;
};

OpenLoopStudy run_open_loop_study(const ScenarioConfig& cfg);

struct ClosedLoopStudy {
  std::vector<ClosedLoopRecord> records;
  SpectralEstimate spectrum;      // decimated measured output on the outer grid
  DistortionReport report;
  ErrorMetrics mpc;               // pooled over retained periods
  ErrorMetrics ukf;
  double ukf_err_mean = 0.0;      // retained-sample statistics
  double ukf_err_se = 0.0;
};

// Closed-loop counterpart of an open-loop study: same excitation design
// and realisation seeds, multisine applied as the outer input, noise
// sigma frozen from the open-loop records.
ClosedLoopStudy run_closed_loop_study(const ScenarioConfig& cfg, const PolyNlssModel& model,
                                      const OpenLoopStudy& open);

PolyNlssModel load_scenario_model(const ScenarioConfig& cfg);

// Single-stage pipelines behind the CLI subcommands. Each writes its
// artifact subtree under out_dir and returns the emitted paths.

// Excitation design plus one CSV per realisation.
std::vector<std::filesystem::path> run_excite_stage(const ScenarioConfig& cfg,
                                                    const std::filesystem::path& out_dir);

// Open-loop records, averaged spectrum, distortion report.
std::vector<std::filesystem::path> run_simulate_stage(const ScenarioConfig& cfg,
                                                      const std::filesystem::path& out_dir);

// Closed-loop records plus the before/after comparison against a fresh
// open-loop run with the same excitation seeds.
std::vector<std::filesystem::path> run_linearise_stage(const ScenarioConfig& cfg,
                                                       const std::filesystem::path& out_dir);

// Spectrum and distortion report for previously recorded outputs.
std::vector<std::filesystem::path> run_analyse_stage(
    const std::filesystem::path& design_path,
    const std::vector<std::filesystem::path>& record_paths, std::size_t discard_periods,
    double resonance_hint_hz, const std::filesystem::path& out_dir);

// Delta document between two persisted distortion reports.
std::filesystem::path run_compare_stage(const std::filesystem::path& before_path,
                                        const std::filesystem::path& after_path,
                                        const std::filesystem::path& out_path);

}  // namespace fblin
