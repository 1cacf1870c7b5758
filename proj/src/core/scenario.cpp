#include "core/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <numbers>
#include <thread>

#include "core/errors.hpp"
#include "core/mpc.hpp"
#include "core/record_io.hpp"
#include "core/rng.hpp"
#include "core/ukf.hpp"
#include "core/util.hpp"

namespace fblin {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<double> tile(const std::vector<double>& period, std::size_t count) {
  std::vector<double> out;
  out.reserve(period.size() * count);
  for (std::size_t p = 0; p < count; ++p) out.insert(out.end(), period.begin(), period.end());
  return out;
}

// Index-parallel fan-out with deterministic work: every index derives its
// own seeds, so schedule order cannot influence results.
template <typename F>
void for_each_index(std::size_t count, unsigned threads, F&& fn) {
  unsigned workers = threads == 0 ? std::thread::hardware_concurrency() : threads;
  workers = std::min<unsigned>(workers, static_cast<unsigned>(count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> futures;
  futures.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    futures.push_back(std::async(std::launch::async, [&]() {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    }));
  }
  for (auto& f : futures) f.get();
}

std::unique_ptr<Plant> make_plant(const ScenarioConfig& cfg, const PolyNlssModel* model) {
  if (cfg.plant_kind == "duffing")
    return std::make_unique<DuffingPlant>(cfg.duffing, cfg.plant_substep_s);
  if (cfg.plant_kind == "surrogate") {
    if (model == nullptr)
      throw ValidationError("scenario: surrogate plant needs a model document");
    // The identified model already absorbs the artificial hardening spring
    // in its E matrix (E tracks -k_fb*B).  The truth plant therefore runs
    // the linear shell with the spring re-applied externally; keeping E as
    // well would double the spring and blow up the loop.
    //
    // The shell is refined to the 4096 Hz actuator rate before the spring
    // wraps around it, so the one-sample spring lag is 1/4096 s rather
    // than one sample of the identified 1024 Hz model.
    constexpr double kActuatorRateHz = 4096.0;
    PolyNlssModel shell = *model;
    shell.E.setZero();
    const double steps = kActuatorRateHz * shell.ts;
    const auto factor = static_cast<int>(std::lround(steps));
    if (factor >= 1) {
      if (std::abs(steps - factor) > 1e-9)
        throw ValidationError("scenario: model rate does not divide the actuator rate");
      shell = refine_model(shell, factor);
    }
    return std::make_unique<SurrogatePlant>(std::move(shell), cfg.surrogate_feedback);
  }
  throw ValidationError("scenario: unknown plant kind '" + cfg.plant_kind + "'");
}

}  // namespace

const std::vector<std::string>& scenario_ids() {
  static const std::vector<std::string> ids = {
      "duffing-open", "duffing-linearised", "duffing-cubic-only", "duffing-extrapolation",
      "beam-surrogate"};
  return ids;
}

ScenarioConfig default_config(const std::string& scenario_id) {
  ScenarioConfig cfg;
  cfg.scenario = scenario_id;
  cfg.out_dir = "runs/" + scenario_id;

  if (scenario_id == "duffing-open" || scenario_id == "duffing-linearised" ||
      scenario_id == "duffing-cubic-only" || scenario_id == "duffing-extrapolation") {
    cfg.plant_kind = "duffing";
    cfg.excitation.fs = 100.0;
    cfg.excitation.samples = 4000;
    cfg.excitation.f_min = 0.0;
    cfg.excitation.f_max = 10.0;
    // Nominal force levels 0.12 N / 0.22 N interpreted as the root sum of
    // per-line powers; time-domain RMS is nominal/sqrt(2).  This is the
    // only reading that lands the apparent resonance near 3.8 Hz with odd
    // distortions ~10 dB under the response; taking the nominal value as
    // time RMS shifts the resonance to 4.1 Hz and odd distortions reach
    // the response level.
    cfg.excitation.rms =
        (scenario_id == "duffing-extrapolation" ? 0.22 : 0.12) / std::sqrt(2.0);
    cfg.excitation.kind = MultisineKind::odd;
    cfg.excitation.group_size = 4;
    cfg.snr_db = 40.0;
    cfg.q_weight = 1e12;
    cfg.r_delta = 1.0;
    cfg.ts_out = 1e-2;
    cfg.ts_in = 1e-3;
    cfg.ukf_r_cov = 1.13e-14;
    cfg.ukf_q_scale = 0.05;
    if (scenario_id != "duffing-open") cfg.model_path = "models/duffing_nlss.json";
    return cfg;
  }

  if (scenario_id == "beam-surrogate") {
    cfg.plant_kind = "surrogate";
    cfg.model_path = "models/beam_nlss.json";
    cfg.surrogate_feedback = 2e9;
    // Same odd multisine drives the plant input before linearisation and
    // the outer input after it, always at the outer rate.
    //
    // Drive level and loop rates are calibrated to the surrogate's stable
    // envelope: the re-applied hardening spring turns the identified shell
    // unstable once |y| sustains ~1.5e-4, so the multisine is kept near
    // 1e-4 RMS output and the controller runs from a 204.8 Hz coarsening
    // of the model (at the identified 1024 Hz rate the model's short-time
    // step response is inverse, and every horizon split there feeds back
    // with the wrong sign).
    cfg.excitation.fs = 20.48;
    cfg.excitation.samples = 1024;
    cfg.excitation.f_min = 0.1;
    cfg.excitation.f_max = 10.0;
    cfg.excitation.rms = 0.004;
    cfg.excitation.kind = MultisineKind::odd;
    cfg.excitation.group_size = 4;
    cfg.realisations = 2;
    cfg.periods = 3;
    cfg.full_realisations = 5;
    cfg.full_periods = 4;
    cfg.q_weight = 1e7;
    cfg.r_delta = 1.0;
    cfg.ts_out = 50.0 / 1024.0;
    cfg.ts_in = 5.0 / 1024.0;
    cfg.ukf_r_cov = 3.39e-15;
    cfg.ukf_q_scale = 10.0;
    cfg.snr_db.reset();
    cfg.noise_sigma_abs = std::sqrt(3.39e-15);  // the tuned R_UKF is the noise variance
    return cfg;
  }

  throw ValidationError("unknown scenario '" + scenario_id + "'");
}

namespace {

void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const std::string& where) {
  for (const auto& item : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
          return item.key() == k;
        }) == allowed.end())
      throw ValidationError("config: unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ScenarioConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ValidationError("config: document must be an object");
  require_keys(j,
               {"schema", "scenario", "seed", "threads", "out_dir", "plant", "model",
                "excitation", "runs", "full_scale", "mpc", "ukf", "noise", "sine"},
               "top level");
  if (j.contains("schema") && j.at("schema").get<std::string>() != "fblin-config-v1")
    throw ValidationError("config: unsupported schema");
  if (!j.contains("scenario")) throw ValidationError("config: missing scenario id");

  ScenarioConfig cfg = default_config(j.at("scenario").get<std::string>());

  try {
    maybe(j, "seed", cfg.seed);
    maybe(j, "threads", cfg.threads);
    maybe(j, "out_dir", cfg.out_dir);
    maybe(j, "model", cfg.model_path);

    if (j.contains("plant")) {
      const json& p = j.at("plant");
      require_keys(p, {"kind", "m", "c_l", "k_l", "k_q", "k_c", "substep_s", "feedback_gain"},
                   "plant");
      maybe(p, "kind", cfg.plant_kind);
      maybe(p, "m", cfg.duffing.m);
      maybe(p, "c_l", cfg.duffing.c_l);
      maybe(p, "k_l", cfg.duffing.k_l);
      maybe(p, "k_q", cfg.duffing.k_q);
      maybe(p, "k_c", cfg.duffing.k_c);
      maybe(p, "substep_s", cfg.plant_substep_s);
      maybe(p, "feedback_gain", cfg.surrogate_feedback);
    }
    if (j.contains("excitation")) {
      const json& e = j.at("excitation");
      require_keys(e, {"fs", "samples", "f_min", "f_max", "rms", "kind", "group_size"},
                   "excitation");
      maybe(e, "fs", cfg.excitation.fs);
      maybe(e, "samples", cfg.excitation.samples);
      maybe(e, "f_min", cfg.excitation.f_min);
      maybe(e, "f_max", cfg.excitation.f_max);
      maybe(e, "rms", cfg.excitation.rms);
      if (e.contains("kind")) {
        const std::string kind = e.at("kind").get<std::string>();
        if (kind == "full") cfg.excitation.kind = MultisineKind::full;
        else if (kind == "odd") cfg.excitation.kind = MultisineKind::odd;
        else throw ValidationError("config: excitation kind must be 'full' or 'odd'");
      }
      maybe(e, "group_size", cfg.excitation.group_size);
    }
    if (j.contains("runs")) {
      const json& r = j.at("runs");
      require_keys(r, {"realisations", "periods", "discard_periods"}, "runs");
      maybe(r, "realisations", cfg.realisations);
      maybe(r, "periods", cfg.periods);
      maybe(r, "discard_periods", cfg.discard_periods);
    }
    if (j.contains("full_scale")) {
      const json& f = j.at("full_scale");
      require_keys(f, {"realisations", "periods"}, "full_scale");
      maybe(f, "realisations", cfg.full_realisations);
      maybe(f, "periods", cfg.full_periods);
    }
    if (j.contains("mpc")) {
      const json& m = j.at("mpc");
      require_keys(m, {"q_weight", "r_delta", "ts_out", "ts_in"}, "mpc");
      maybe(m, "q_weight", cfg.q_weight);
      maybe(m, "r_delta", cfg.r_delta);
      maybe(m, "ts_out", cfg.ts_out);
      maybe(m, "ts_in", cfg.ts_in);
    }
    if (j.contains("ukf")) {
      const json& u = j.at("ukf");
      require_keys(u, {"r_cov", "q_scale", "alpha", "beta", "kappa"}, "ukf");
      maybe(u, "r_cov", cfg.ukf_r_cov);
      maybe(u, "q_scale", cfg.ukf_q_scale);
      maybe(u, "alpha", cfg.ukf_alpha);
      maybe(u, "beta", cfg.ukf_beta);
      maybe(u, "kappa", cfg.ukf_kappa);
    }
    if (j.contains("noise")) {
      const json& n = j.at("noise");
      require_keys(n, {"snr_db", "sigma"}, "noise");
      if (n.contains("snr_db")) {
        if (n.at("snr_db").is_null()) cfg.snr_db.reset();
        else cfg.snr_db = n.at("snr_db").get<double>();
      }
      if (n.contains("sigma")) {
        if (n.at("sigma").is_null()) cfg.noise_sigma_abs.reset();
        else cfg.noise_sigma_abs = n.at("sigma").get<double>();
      }
    }
    if (j.contains("sine")) {
      const json& s = j.at("sine");
      require_keys(s, {"freq_hz", "amplitude", "duration_s", "discard_s"}, "sine");
      maybe(s, "freq_hz", cfg.sine_freq_hz);
      maybe(s, "amplitude", cfg.sine_amplitude);
      maybe(s, "duration_s", cfg.sine_duration_s);
      maybe(s, "discard_s", cfg.sine_discard_s);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config document malformed: ") + e.what());
  }

  if (!cfg.model_path.empty()) {
    const std::filesystem::path p(cfg.model_path);
    if (p.is_relative() && !base_dir.empty())
      cfg.model_path = (base_dir / p).lexically_normal().string();
  }
  if (cfg.discard_periods >= cfg.active_periods())
    throw ValidationError("config: discard_periods must leave at least one period");
  return cfg;
}

ordered_json config_to_json(const ScenarioConfig& cfg) {
  ordered_json j;
  j["schema"] = "fblin-config-v1";
  j["scenario"] = cfg.scenario;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["out_dir"] = cfg.out_dir;
  ordered_json plant{{"kind", cfg.plant_kind}};
  if (cfg.plant_kind == "duffing") {
    plant["m"] = cfg.duffing.m;
    plant["c_l"] = cfg.duffing.c_l;
    plant["k_l"] = cfg.duffing.k_l;
    plant["k_q"] = cfg.duffing.k_q;
    plant["k_c"] = cfg.duffing.k_c;
    plant["substep_s"] = cfg.plant_substep_s;
  } else {
    plant["feedback_gain"] = cfg.surrogate_feedback;
  }
  j["plant"] = plant;
  if (!cfg.model_path.empty()) j["model"] = cfg.model_path;
  j["excitation"] = {{"fs", cfg.excitation.fs},
                     {"samples", cfg.excitation.samples},
                     {"f_min", cfg.excitation.f_min},
                     {"f_max", cfg.excitation.f_max},
                     {"rms", cfg.excitation.rms},
                     {"kind", cfg.excitation.kind == MultisineKind::full ? "full" : "odd"},
                     {"group_size", cfg.excitation.group_size}};
  j["runs"] = {{"realisations", cfg.realisations},
               {"periods", cfg.periods},
               {"discard_periods", cfg.discard_periods}};
  j["full_scale"] = {{"realisations", cfg.full_realisations}, {"periods", cfg.full_periods}};
  j["mpc"] = {{"q_weight", cfg.q_weight},
              {"r_delta", cfg.r_delta},
              {"ts_out", cfg.ts_out},
              {"ts_in", cfg.ts_in}};
  j["ukf"] = {{"r_cov", cfg.ukf_r_cov},
              {"q_scale", cfg.ukf_q_scale},
              {"alpha", cfg.ukf_alpha},
              {"beta", cfg.ukf_beta},
              {"kappa", cfg.ukf_kappa}};
  ordered_json noise;
  noise["snr_db"] = cfg.snr_db ? json(*cfg.snr_db) : json(nullptr);
  noise["sigma"] = cfg.noise_sigma_abs ? json(*cfg.noise_sigma_abs) : json(nullptr);
  j["noise"] = noise;
  if (cfg.scenario == "beam-surrogate")
    j["sine"] = {{"freq_hz", cfg.sine_freq_hz},
                 {"amplitude", cfg.sine_amplitude},
                 {"duration_s", cfg.sine_duration_s},
                 {"discard_s", cfg.sine_discard_s}};
  return j;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_json_file(path), path.parent_path());
}

PolyNlssModel load_scenario_model(const ScenarioConfig& cfg) {
  if (cfg.model_path.empty())
    throw ValidationError("scenario '" + cfg.scenario + "' needs a model document");
  return load_model(cfg.model_path);
}

OpenLoopStudy run_open_loop_study(const ScenarioConfig& cfg) {
  OpenLoopStudy study;
  study.design =
      design_multisine(cfg.excitation, rng::derive_seed(cfg.seed, "excitation/design"));
  const std::size_t r_count = cfg.active_realisations();
  const std::size_t p_count = cfg.active_periods();
  study.excitations = realisations(study.design, r_count);
  study.records.resize(r_count);
  study.noise_sigma.assign(r_count, 0.0);

  PolyNlssModel surrogate_model;
  const bool needs_model = cfg.plant_kind == "surrogate";
  if (needs_model) surrogate_model = load_scenario_model(cfg);

  for_each_index(r_count, cfg.threads, [&](std::size_t r) {
    auto plant = make_plant(cfg, needs_model ? &surrogate_model : nullptr);
    const std::vector<double> u_full = tile(study.excitations[r].samples, p_count);
    NoiseConfig nc;
    nc.snr_db = cfg.snr_db;
    nc.sigma = cfg.noise_sigma_abs;
    nc.seed = rng::derive_seed(cfg.seed, "noise/open-loop", r);
    study.records[r] = run_open_loop(*plant, u_full, cfg.excitation.fs, nc);
    if (nc.sigma) study.noise_sigma[r] = *nc.sigma;
    else if (nc.snr_db) study.noise_sigma[r] = noise_sigma_for(study.records[r].y_true, *nc.snr_db);
  });

  std::vector<std::vector<double>> outputs;
  outputs.reserve(r_count);
  for (const auto& rec : study.records) outputs.push_back(rec.y_meas);
  study.spectrum = spectra(outputs, study.design, cfg.discard_periods);
  if (!study.design.detection_lines.empty())
    study.report = distortions(study.spectrum, study.design);
  return study;
}

ClosedLoopStudy run_closed_loop_study(const ScenarioConfig& cfg, const PolyNlssModel& model,
                                      const OpenLoopStudy& open) {
  if (std::abs(cfg.excitation.fs * cfg.ts_out - 1.0) > 1e-9)
    throw ValidationError("closed-loop study needs the excitation sampled at the outer rate");
  const auto n_max = static_cast<std::size_t>(std::lround(cfg.ts_out / cfg.ts_in));
  const MpcGainSet gains = precompute_gains(model, cfg.q_weight, cfg.r_delta, n_max);

  UkfConfig ucfg;
  ucfg.q_cov = cfg.ukf_q_scale * cfg.ukf_r_cov *
               Eigen::MatrixXd::Identity(model.order(), model.order());
  ucfg.r_cov = cfg.ukf_r_cov;
  ucfg.alpha = cfg.ukf_alpha;
  ucfg.beta = cfg.ukf_beta;
  ucfg.kappa = cfg.ukf_kappa;

  PolyNlssModel surrogate_model;
  const bool needs_model = cfg.plant_kind == "surrogate";
  if (needs_model) surrogate_model = load_scenario_model(cfg);

  const std::size_t r_count = open.records.size();
  const std::size_t p_count = cfg.active_periods();

  ClosedLoopStudy study;
  study.records.resize(r_count);
  for_each_index(r_count, cfg.threads, [&](std::size_t r) {
    auto plant = make_plant(cfg, needs_model ? &surrogate_model : nullptr);
    Ukf ukf(model, ucfg);
    const std::vector<double> v_full = tile(open.excitations[r].samples, p_count);
    ClosedLoopOptions opts;
    opts.ts_out = cfg.ts_out;
    opts.ts_in = cfg.ts_in;
    if (open.noise_sigma[r] > 0.0) opts.noise_sigma = open.noise_sigma[r];
    opts.noise_seed = rng::derive_seed(cfg.seed, "noise/closed-loop", r);
    study.records[r] = run_linearised(*plant, gains, ukf, v_full, opts);
  });

  std::vector<std::vector<double>> outputs;
  outputs.reserve(r_count);
  for (const auto& rec : study.records) outputs.push_back(rec.decimate(rec.y_meas));
  study.spectrum = spectra(outputs, open.design, cfg.discard_periods);
  if (!open.design.detection_lines.empty())
    study.report = distortions(study.spectrum, open.design, open.report.resonance_hz);

  // Pooled error ratios over the retained (post-discard) inner samples of
  // every realisation.
  const std::size_t skip = cfg.excitation.samples * n_max * cfg.discard_periods;
  double sq_mpc = 0.0, sq_ukf = 0.0, sq_y = 0.0, sum_ukf = 0.0;
  std::size_t n_kept = 0;
  for (const auto& rec : study.records) {
    for (std::size_t g = skip; g < rec.t.size(); ++g) {
      sq_mpc += rec.err_mpc[g] * rec.err_mpc[g];
      sq_ukf += rec.err_ukf[g] * rec.err_ukf[g];
      sq_y += rec.y_meas[g] * rec.y_meas[g];
      sum_ukf += rec.err_ukf[g];
      ++n_kept;
    }
  }
  if (n_kept == 0) throw ValidationError("closed-loop study: nothing retained after discard");
  const double nd = static_cast<double>(n_kept);
  study.mpc.rms_error = std::sqrt(sq_mpc / nd);
  study.ukf.rms_error = std::sqrt(sq_ukf / nd);
  study.mpc.rms_signal = study.ukf.rms_signal = std::sqrt(sq_y / nd);
  study.mpc.ratio_percent = 100.0 * study.mpc.rms_error / study.mpc.rms_signal;
  study.ukf.ratio_percent = 100.0 * study.ukf.rms_error / study.ukf.rms_signal;
  study.ukf_err_mean = sum_ukf / nd;
  const double var = std::max(0.0, sq_ukf / nd - study.ukf_err_mean * study.ukf_err_mean);
  study.ukf_err_se = std::sqrt(var / nd);
  return study;
}

bool ScenarioResult::all_passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const ScenarioCheck& c) { return c.passed; });
}

namespace {

// ---- scenario assembly helpers ----------------------------------------

struct Emitter {
  std::filesystem::path root;
  std::vector<std::filesystem::path>* artifacts;

  std::filesystem::path at(const std::string& rel) {
    const std::filesystem::path p = root / rel;
    std::filesystem::create_directories(p.parent_path());
    artifacts->push_back(p);
    return p;
  }
};

void add_check(ScenarioResult& result, const std::string& name, bool passed, double value,
               std::string detail) {
  result.checks.push_back({name, passed, value, std::move(detail)});
}

ordered_json checks_to_json(const ScenarioResult& result) {
  ordered_json arr = ordered_json::array();
  for (const ScenarioCheck& c : result.checks)
    arr.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value},
                   {"detail", c.detail}});
  return arr;
}

std::string index_name(const std::string& stem, std::size_t r, const char* ext) {
  char idx[8];
  std::snprintf(idx, sizeof(idx), "%02zu", r);
  return stem + "_" + idx + ext;
}

void emit_open_study(Emitter& em, const ScenarioConfig& cfg, const OpenLoopStudy& open) {
  write_json_file(em.at("excitation/design.json"), design_to_json(open.design));
  for (std::size_t r = 0; r < open.excitations.size(); ++r)
    write_signal_csv(em.at(index_name("excitation/realisation", r, ".csv")),
                     cfg.excitation.fs, open.excitations[r].samples);
  for (std::size_t r = 0; r < open.records.size(); ++r)
    write_open_loop_csv(em.at(index_name("openloop/realisation", r, ".csv")),
                        open.records[r]);
  write_spectrum_csv(em.at("openloop/spectrum.csv"), open.spectrum);
  if (!open.design.detection_lines.empty()) {
    write_distortion_csv(em.at("openloop/report.csv"), open.report);
    write_json_file(em.at("openloop/report.json"), distortion_to_json(open.report));
  }
}

void emit_closed_study(Emitter& em, const std::string& dir, const ClosedLoopStudy& closed,
                       bool with_report) {
  write_closed_loop_csv(em.at(dir + "/realisation_00.csv"), closed.records.front());
  for (std::size_t r = 0; r < closed.records.size(); ++r)
    write_decimated_csv(em.at(index_name(dir + "/decim", r, ".csv")), closed.records[r]);
  write_spectrum_csv(em.at(dir + "/spectrum.csv"), closed.spectrum);
  if (with_report) {
    write_distortion_csv(em.at(dir + "/report.csv"), closed.report);
    write_json_file(em.at(dir + "/report.json"), distortion_to_json(closed.report));
  }
}

ordered_json closed_metrics_json(const ClosedLoopStudy& closed) {
  return ordered_json{{"mpc", metrics_to_json(closed.mpc)},
                      {"ukf", metrics_to_json(closed.ukf)},
                      {"ukf_err_mean", closed.ukf_err_mean},
                      {"ukf_err_se", closed.ukf_err_se}};
}

ordered_json report_summary_json(const DistortionReport& rep) {
  return ordered_json{{"resonance_hz", rep.resonance_hz},
                      {"output_at_resonance_db", rep.output_at_resonance_db},
                      {"odd_at_resonance_db", rep.odd_at_resonance_db},
                      {"even_at_resonance_db", rep.even_at_resonance_db},
                      {"floor_at_resonance_db", rep.floor_at_resonance_db},
                      {"odd_rel_db", rep.odd_rel_db},
                      {"even_rel_db", rep.even_rel_db}};
}

// Worst (smallest) gap between the output reference level and the
// detection/even levels in +-0.5 Hz bands around the given frequencies.
double worst_gap_db(const SpectralEstimate& spec, double output_ref_db,
                    std::initializer_list<double> freqs) {
  double worst = std::numeric_limits<double>::infinity();
  for (double f : freqs) {
    for (LineRole role : {LineRole::detection, LineRole::unexcited}) {
      const double lvl = band_max_level_db(spec, role, f, 0.5);
      if (!std::isnan(lvl)) worst = std::min(worst, output_ref_db - lvl);
    }
  }
  return worst;
}

void write_metadata(Emitter& em, const ScenarioConfig& cfg) {
  ordered_json j;
  j["schema"] = "run-metadata-v1";
  j["scenario"] = cfg.scenario;
  j["seed"] = cfg.seed;
  j["full_scale"] = cfg.full_scale;
  ordered_json models = ordered_json::array();
  if (!cfg.model_path.empty())
    models.push_back({{"path", cfg.model_path},
                      {"git_blob_sha1", git_blob_sha1_file(cfg.model_path)}});
  j["models"] = models;
  write_json_file(em.at("metadata.json"), j);
}

// Surrogate study: the same odd multisine excites the plant input before
// linearisation and the outer input after it, so output spectra compare
// directly. A separate sine run probes reference tracking.
void run_beam_scenario(const ScenarioConfig& cfg, Emitter& em, nlohmann::ordered_json& summary,
                       ScenarioResult& result) {
  const PolyNlssModel model = load_scenario_model(cfg);

  // Controller-side model: the identified model coarsened to the inner
  // rate, linear part only.  Its E column duplicates the spring that the
  // truth plant already applies, and the coarse-rate hold of the cubic
  // term is itself unstable at the studied amplitudes, so the controller
  // leaves the spring to integral action instead of modelling it.
  const double steps = cfg.ts_in / model.ts;
  const auto coarse = static_cast<int>(std::lround(steps));
  if (coarse < 1 || std::abs(steps - coarse) > 1e-9)
    throw ValidationError("beam scenario: inner rate must be a whole coarsening of the model rate");
  PolyNlssModel ctrl = coarsen_model(model, coarse);
  ctrl.E.setZero();

  const OpenLoopStudy open = run_open_loop_study(cfg);
  ClosedLoopStudy closed = run_closed_loop_study(cfg, ctrl, open);
  // Re-detect the apparent resonance instead of carrying the open-loop one;
  // the shift between the two is what the scenario asserts.
  closed.report = distortions(closed.spectrum, open.design);

  emit_open_study(em, cfg, open);
  emit_closed_study(em, "closedloop", closed, true);
  const auto n_max = static_cast<std::size_t>(std::lround(cfg.ts_out / cfg.ts_in));
  const MpcGainSet gains = precompute_gains(ctrl, cfg.q_weight, cfg.r_delta, n_max);
  write_text_file(em.at("closedloop/gains.txt"), gains_to_text(gains));
  write_json_file(em.at("compare.json"), delta_to_json(compare_reports(open.report, closed.report)));

  // Outer-loop sine tracking run.
  UkfConfig ucfg;
  ucfg.q_cov = cfg.ukf_q_scale * cfg.ukf_r_cov *
               Eigen::MatrixXd::Identity(ctrl.order(), ctrl.order());
  ucfg.r_cov = cfg.ukf_r_cov;
  ucfg.alpha = cfg.ukf_alpha;
  ucfg.beta = cfg.ukf_beta;
  ucfg.kappa = cfg.ukf_kappa;
  Ukf ukf(ctrl, ucfg);
  auto plant = make_plant(cfg, &model);

  const auto n_outer = static_cast<std::size_t>(std::lround(cfg.sine_duration_s / cfg.ts_out));
  std::vector<double> v(n_outer);
  for (std::size_t k = 0; k < n_outer; ++k)
    v[k] = cfg.sine_amplitude *
           std::sin(2.0 * std::numbers::pi * cfg.sine_freq_hz * static_cast<double>(k) * cfg.ts_out);

  ClosedLoopOptions opts;
  opts.ts_out = cfg.ts_out;
  opts.ts_in = cfg.ts_in;
  if (cfg.noise_sigma_abs) opts.noise_sigma = *cfg.noise_sigma_abs;
  else if (!open.noise_sigma.empty() && open.noise_sigma[0] > 0.0)
    opts.noise_sigma = open.noise_sigma[0];
  opts.noise_seed = rng::derive_seed(cfg.seed, "noise/sine");

  ErrorMetrics sine_metrics;
  double peak_factor = std::numeric_limits<double>::quiet_NaN();
  std::string sine_failure;
  try {
    const ClosedLoopRecord sine = run_linearised(*plant, gains, ukf, v, opts);
    write_closed_loop_csv(em.at("sine/record.csv"), sine);

    const auto skip = static_cast<std::size_t>(std::lround(cfg.sine_discard_s / cfg.ts_in));
    if (skip >= sine.t.size())
      throw ValidationError("beam scenario: sine discard leaves no samples");
    double sq_err = 0.0, sq_y = 0.0, peak = 0.0;
    for (std::size_t g = skip; g < sine.t.size(); ++g) {
      sq_err += sine.err_mpc[g] * sine.err_mpc[g];
      sq_y += sine.y_meas[g] * sine.y_meas[g];
      peak = std::max(peak, std::abs(sine.u[g]));
    }
    const double nd = static_cast<double>(sine.t.size() - skip);
    sine_metrics.rms_error = std::sqrt(sq_err / nd);
    sine_metrics.rms_signal = std::sqrt(sq_y / nd);
    sine_metrics.ratio_percent = 100.0 * sine_metrics.rms_error / sine_metrics.rms_signal;
    peak_factor = peak / cfg.sine_amplitude;
  } catch (const DivergenceError& e) {
    // The spring-wrapped shell has no stable orbit at this reference
    // amplitude (see README).  Record the divergence instead of aborting;
    // the dependent checks fail below with the reason attached.
    sine_failure = e.what();
    sine_metrics.rms_error = sine_metrics.rms_signal = 0.0;
    sine_metrics.ratio_percent = std::numeric_limits<double>::quiet_NaN();
  }

  const std::size_t q_low = open.design.excited_lines.front();
  const double dc_before = open.spectrum.level_db(q_low);
  const double dc_after = closed.spectrum.level_db(q_low);
  const double shift = open.report.resonance_hz - closed.report.resonance_hz;

  summary["open"] = report_summary_json(open.report);
  summary["closed"] = report_summary_json(closed.report);
  summary["metrics"] = closed_metrics_json(closed);
  if (sine_failure.empty()) {
    ordered_json sine_json = metrics_to_json(sine_metrics);
    sine_json["input_peak"] = peak_factor * cfg.sine_amplitude;
    sine_json["input_peak_factor"] = peak_factor;
    summary["sine"] = sine_json;
  } else {
    summary["sine"] = ordered_json{{"diverged", true}, {"error", sine_failure}};
  }
  summary["dc_line_before_db"] = dc_before;
  summary["dc_line_after_db"] = dc_after;

  const std::string sine_note =
      sine_failure.empty() ? "expect [0.5, 3]" : "expect [0.5, 3]; " + sine_failure;
  add_check(result, "sine-tracking-ratio-percent",
            sine_metrics.ratio_percent >= 0.5 && sine_metrics.ratio_percent <= 3.0,
            sine_metrics.ratio_percent, sine_note);
  add_check(result, "plant-input-peak-factor", peak_factor > 10.0, peak_factor,
            sine_failure.empty()
                ? "peak plant input over outer sine amplitude, expect > 10"
                : "peak plant input over outer sine amplitude, expect > 10; " + sine_failure);
  add_check(result, "resonance-shift-hz", shift > 0.0, shift,
            "open-loop apparent resonance minus linearised resonance, expect > 0");
  add_check(result, "dc-line-gain-db", dc_after - dc_before > 0.0, dc_after - dc_before,
            "lowest excited line, linearised minus open loop, expect > 0");
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
  ScenarioResult result;
  result.scenario = cfg.scenario;
  std::filesystem::create_directories(out_dir);
  Emitter em{out_dir, &result.artifacts};

  ordered_json summary;
  summary["schema"] = "scenario-summary-v1";
  summary["scenario"] = cfg.scenario;
  summary["seed"] = cfg.seed;
  summary["full_scale"] = cfg.full_scale;

  try {
    write_json_file(em.at("config.json"), config_to_json(cfg));
    write_metadata(em, cfg);

    if (cfg.scenario == "duffing-open") {
      const OpenLoopStudy open = run_open_loop_study(cfg);
      emit_open_study(em, cfg, open);
      summary["open"] = report_summary_json(open.report);
      add_check(result, "open-odd-rel-db", open.report.odd_rel_db >= -15.0 &&
                open.report.odd_rel_db <= -5.0, open.report.odd_rel_db,
                "odd distortion relative to output at resonance, dB, expect [-15, -5]");
    } else if (cfg.scenario == "duffing-linearised") {
      const PolyNlssModel model = load_scenario_model(cfg);
      const OpenLoopStudy open = run_open_loop_study(cfg);
      const ClosedLoopStudy closed = run_closed_loop_study(cfg, model, open);
      emit_open_study(em, cfg, open);
      emit_closed_study(em, "closedloop", closed, true);
      const MpcGainSet gains = precompute_gains(
          model, cfg.q_weight, cfg.r_delta,
          static_cast<std::size_t>(std::lround(cfg.ts_out / cfg.ts_in)));
      write_text_file(em.at("closedloop/gains.txt"), gains_to_text(gains));
      const DistortionDelta delta = compare_reports(open.report, closed.report);
      write_json_file(em.at("compare.json"), delta_to_json(delta));

      summary["open"] = report_summary_json(open.report);
      summary["closed"] = report_summary_json(closed.report);
      summary["metrics"] = closed_metrics_json(closed);
      const double gap = worst_gap_db(closed.spectrum, closed.report.output_at_resonance_db,
                                      {open.report.resonance_hz, 2.0 * open.report.resonance_hz});
      summary["residual_gap_db"] = gap;

      add_check(result, "mpc-ratio-percent",
                closed.mpc.ratio_percent >= 0.02 && closed.mpc.ratio_percent <= 0.2,
                closed.mpc.ratio_percent, "expect [0.02, 0.2]");
      add_check(result, "ukf-ratio-percent",
                closed.ukf.ratio_percent >= 1.5 && closed.ukf.ratio_percent <= 6.0,
                closed.ukf.ratio_percent, "expect [1.5, 6]");
      add_check(result, "residual-gap-db", gap >= 35.0, gap,
                "distortion levels near the resonance and its double, dB below output, expect >= 35");
    } else if (cfg.scenario == "duffing-cubic-only") {
      const PolyNlssModel model = load_scenario_model(cfg);
      const PolyNlssModel cubic = zero_quadratic(model);
      const OpenLoopStudy open = run_open_loop_study(cfg);
      const ClosedLoopStudy full = run_closed_loop_study(cfg, model, open);
      const ClosedLoopStudy reduced = run_closed_loop_study(cfg, cubic, open);
      emit_open_study(em, cfg, open);
      emit_closed_study(em, "closedloop_full", full, true);
      emit_closed_study(em, "closedloop_cubic_only", reduced, true);
      const DistortionDelta delta = compare_reports(open.report, reduced.report);
      write_json_file(em.at("compare.json"), delta_to_json(delta));

      summary["open"] = report_summary_json(open.report);
      summary["closed_full"] = closed_metrics_json(full);
      summary["closed_cubic_only"] = closed_metrics_json(reduced);
      summary["even_suppression_db"] = delta.even_suppression_db;

      const double mpc_change = std::max(reduced.mpc.ratio_percent / full.mpc.ratio_percent,
                                         full.mpc.ratio_percent / reduced.mpc.ratio_percent);
      const double ukf_increase = reduced.ukf.ratio_percent / full.ukf.ratio_percent;
      const double mean_t = std::abs(reduced.ukf_err_mean) / reduced.ukf_err_se;
      add_check(result, "mpc-ratio-change-factor", mpc_change < 2.0, mpc_change,
                "cubic-only vs full model, expect < 2");
      add_check(result, "ukf-ratio-increase-factor", ukf_increase >= 1.7, ukf_increase,
                "cubic-only vs full model, expect >= 1.7");
      add_check(result, "even-suppression-db",
                delta.even_suppression_db >= 8.0 && delta.even_suppression_db <= 25.0,
                delta.even_suppression_db, "at resonance vs open loop, expect [8, 25]");
      add_check(result, "ukf-mean-offset-significance", mean_t > 3.0, mean_t,
                "|mean err_ukf| / standard error, expect > 3");
    } else if (cfg.scenario == "duffing-extrapolation") {
      const PolyNlssModel model = load_scenario_model(cfg);
      const OpenLoopStudy open = run_open_loop_study(cfg);
      const ClosedLoopStudy closed = run_closed_loop_study(cfg, model, open);
      emit_open_study(em, cfg, open);
      emit_closed_study(em, "closedloop", closed, true);
      const DistortionDelta delta = compare_reports(open.report, closed.report);
      write_json_file(em.at("compare.json"), delta_to_json(delta));

      summary["open"] = report_summary_json(open.report);
      summary["closed"] = report_summary_json(closed.report);
      summary["metrics"] = closed_metrics_json(closed);
      const double gap = worst_gap_db(closed.spectrum, closed.report.output_at_resonance_db,
                                      {open.report.resonance_hz, 2.0 * open.report.resonance_hz});
      summary["residual_gap_db"] = gap;

      add_check(result, "mpc-ratio-percent", closed.mpc.ratio_percent <= 0.1,
                closed.mpc.ratio_percent, "expect <= 0.1");
      add_check(result, "residual-gap-db", gap >= 30.0, gap,
                "distortion levels near the resonance and its double, dB below output, expect >= 30");
    } else if (cfg.scenario == "beam-surrogate") {
      run_beam_scenario(cfg, em, summary, result);
    } else {
      throw ValidationError("unknown scenario '" + cfg.scenario + "'");
    }
  } catch (...) {
    summary["completed"] = false;
    summary["checks"] = checks_to_json(result);
    try {
      write_json_file(out_dir / "summary.json", summary);
    } catch (...) {
    }
    throw;
  }

  summary["completed"] = true;
  summary["checks"] = checks_to_json(result);
  summary["all_passed"] = result.all_passed();
  write_json_file(em.at("summary.json"), summary);
  result.summary = std::move(summary);
  return result;
}

std::vector<std::filesystem::path> run_excite_stage(const ScenarioConfig& cfg,
                                                    const std::filesystem::path& out_dir) {
  std::vector<std::filesystem::path> artifacts;
  std::filesystem::create_directories(out_dir);
  Emitter em{out_dir, &artifacts};
  const ExcitationDesign design =
      design_multisine(cfg.excitation, rng::derive_seed(cfg.seed, "excitation/design"));
  write_json_file(em.at("excitation/design.json"), design_to_json(design));
  const auto signals = realisations(design, cfg.active_realisations());
  for (std::size_t r = 0; r < signals.size(); ++r)
    write_signal_csv(em.at(index_name("excitation/realisation", r, ".csv")),
                     cfg.excitation.fs, signals[r].samples);
  return artifacts;
}

std::vector<std::filesystem::path> run_simulate_stage(const ScenarioConfig& cfg,
                                                      const std::filesystem::path& out_dir) {
  std::vector<std::filesystem::path> artifacts;
  std::filesystem::create_directories(out_dir);
  Emitter em{out_dir, &artifacts};
  const OpenLoopStudy open = run_open_loop_study(cfg);
  emit_open_study(em, cfg, open);
  return artifacts;
}

std::vector<std::filesystem::path> run_linearise_stage(const ScenarioConfig& cfg,
                                                       const std::filesystem::path& out_dir) {
  std::vector<std::filesystem::path> artifacts;
  std::filesystem::create_directories(out_dir);
  Emitter em{out_dir, &artifacts};
  const PolyNlssModel model = load_scenario_model(cfg);
  const OpenLoopStudy open = run_open_loop_study(cfg);
  const ClosedLoopStudy closed = run_closed_loop_study(cfg, model, open);
  emit_closed_study(em, "closedloop", closed, !open.design.detection_lines.empty());
  const MpcGainSet gains = precompute_gains(
      model, cfg.q_weight, cfg.r_delta,
      static_cast<std::size_t>(std::lround(cfg.ts_out / cfg.ts_in)));
  write_text_file(em.at("closedloop/gains.txt"), gains_to_text(gains));
  write_json_file(em.at("closedloop/metrics.json"), closed_metrics_json(closed));
  if (!open.design.detection_lines.empty())
    write_json_file(em.at("compare.json"),
                    delta_to_json(compare_reports(open.report, closed.report)));
  return artifacts;
}

std::vector<std::filesystem::path> run_analyse_stage(
    const std::filesystem::path& design_path,
    const std::vector<std::filesystem::path>& record_paths, std::size_t discard_periods,
    double resonance_hint_hz, const std::filesystem::path& out_dir) {
  if (record_paths.empty()) throw ValidationError("analyse: no record files given");
  const ExcitationDesign design = design_from_json(read_json_file(design_path));
  std::vector<std::vector<double>> outputs;
  outputs.reserve(record_paths.size());
  for (const auto& p : record_paths) outputs.push_back(read_measured_channel(p));

  std::vector<std::filesystem::path> artifacts;
  std::filesystem::create_directories(out_dir);
  Emitter em{out_dir, &artifacts};
  const SpectralEstimate spec = spectra(outputs, design, discard_periods);
  write_spectrum_csv(em.at("spectrum.csv"), spec);
  if (!design.detection_lines.empty()) {
    const DistortionReport rep = distortions(spec, design, resonance_hint_hz);
    write_distortion_csv(em.at("report.csv"), rep);
    write_json_file(em.at("report.json"), distortion_to_json(rep));
  }
  return artifacts;
}

std::filesystem::path run_compare_stage(const std::filesystem::path& before_path,
                                        const std::filesystem::path& after_path,
                                        const std::filesystem::path& out_path) {
  const DistortionReport before = distortion_from_json(read_json_file(before_path));
  const DistortionReport after = distortion_from_json(read_json_file(after_path));
  if (!out_path.parent_path().empty())
    std::filesystem::create_directories(out_path.parent_path());
  write_json_file(out_path, delta_to_json(compare_reports(before, after)));
  return out_path;
}

}  // namespace fblin
