// Shared-library boundary. Everything here is exception-to-status
// plumbing; behaviour lives in core/.

#include "fblin.h"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "core/errors.hpp"
#include "core/model.hpp"
#include "core/record_io.hpp"
#include "core/scenario.hpp"

struct fbl_model {
  fblin::PolyNlssModel m;
};

namespace {

thread_local std::string t_error;

struct check_failed_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename F>
fbl_status guard(F&& fn) {
  try {
    fn();
    t_error.clear();
    return FBL_OK;
  } catch (const fblin::DivergenceError& e) {
    t_error = e.what();
    return FBL_ERR_DIVERGED;
  } catch (const fblin::IoError& e) {
    t_error = e.what();
    return FBL_ERR_IO;
  } catch (const check_failed_error& e) {
    t_error = e.what();
    return FBL_ERR_CHECK_FAILED;
  } catch (const std::exception& e) {
    t_error = e.what();
    return FBL_ERR_INVALID;
  } catch (...) {
    t_error = "unknown error";
    return FBL_ERR_INVALID;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw fblin::ValidationError(what);
}

fblin::ScenarioConfig resolve_config(const char* scenario, const char* config_path,
                                     const fbl_run_options* opts) {
  fblin::ScenarioConfig cfg;
  if (config_path != nullptr && *config_path != '\0') {
    cfg = fblin::load_config(config_path);
    if (scenario != nullptr && *scenario != '\0' && cfg.scenario != scenario)
      throw fblin::ValidationError("scenario id does not match the config document");
  } else if (scenario != nullptr && *scenario != '\0') {
    cfg = fblin::default_config(scenario);
  } else {
    throw fblin::ValidationError("need a scenario id or a config document");
  }
  if (opts != nullptr) {
    if (opts->has_seed != 0) cfg.seed = opts->seed;
    if (opts->full_scale != 0) cfg.full_scale = true;
    if (opts->threads != 0) cfg.threads = opts->threads;
  }
  return cfg;
}

std::string resolve_out_dir(const char* out_dir, const fblin::ScenarioConfig& cfg) {
  if (out_dir != nullptr && *out_dir != '\0') return out_dir;
  require(!cfg.out_dir.empty(), "no output directory given");
  return cfg.out_dir;
}

}  // namespace

extern "C" {

const char* fbl_last_error(void) { return t_error.c_str(); }

const char* fbl_version(void) { return "0.1.0"; }

fbl_status fbl_model_load(const char* path, fbl_model** out) {
  return guard([&] {
    require(path != nullptr && out != nullptr, "fbl_model_load: NULL argument");
    *out = new fbl_model{fblin::load_model(path)};
  });
}

fbl_status fbl_model_save(const fbl_model* model, const char* path) {
  return guard([&] {
    require(model != nullptr && path != nullptr, "fbl_model_save: NULL argument");
    fblin::save_model(model->m, path);
  });
}

void fbl_model_free(fbl_model* model) { delete model; }

int fbl_model_order(const fbl_model* model) {
  return model == nullptr ? 0 : model->m.order();
}

int fbl_model_num_terms(const fbl_model* model) {
  return model == nullptr ? 0 : model->m.num_terms();
}

double fbl_model_sample_time(const fbl_model* model) {
  return model == nullptr ? 0.0 : model->m.ts;
}

fbl_status fbl_model_simulate(const fbl_model* model, const double* u, size_t len,
                              double* y_out) {
  return guard([&] {
    require(model != nullptr && u != nullptr && y_out != nullptr,
            "fbl_model_simulate: NULL argument");
    require(len > 0, "fbl_model_simulate: empty input");
    const std::vector<double> u_seq(u, u + len);
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(model->m.order());
    const fblin::SimResult sim = fblin::simulate(model->m, x0, u_seq);
    std::memcpy(y_out, sim.y.data(), len * sizeof(double));
  });
}

fbl_status fbl_model_zero_quadratic(const fbl_model* model, fbl_model** out) {
  return guard([&] {
    require(model != nullptr && out != nullptr, "fbl_model_zero_quadratic: NULL argument");
    *out = new fbl_model{fblin::zero_quadratic(model->m)};
  });
}

size_t fbl_scenario_count(void) { return fblin::scenario_ids().size(); }

const char* fbl_scenario_name(size_t index) {
  const auto& ids = fblin::scenario_ids();
  return index < ids.size() ? ids[index].c_str() : nullptr;
}

fbl_status fbl_write_default_config(const char* scenario, const char* path) {
  return guard([&] {
    require(scenario != nullptr && path != nullptr,
            "fbl_write_default_config: NULL argument");
    fblin::write_json_file(path, fblin::config_to_json(fblin::default_config(scenario)));
  });
}

fbl_status fbl_run_scenario(const char* scenario, const char* config_path,
                            const char* out_dir, const fbl_run_options* opts,
                            int* all_passed_out) {
  return guard([&] {
    const fblin::ScenarioConfig cfg = resolve_config(scenario, config_path, opts);
    const fblin::ScenarioResult result =
        fblin::run_scenario(cfg, resolve_out_dir(out_dir, cfg));
    const bool passed = result.all_passed();
    if (all_passed_out != nullptr) *all_passed_out = passed ? 1 : 0;
    if (opts != nullptr && opts->check != 0 && !passed) {
      std::string failed;
      for (const auto& c : result.checks) {
        if (c.passed) continue;
        if (!failed.empty()) failed += ", ";
        failed += c.name;
      }
      throw check_failed_error("scenario checks failed: " + failed);
    }
  });
}

fbl_status fbl_excite(const char* scenario, const char* config_path, const char* out_dir,
                      const fbl_run_options* opts) {
  return guard([&] {
    const fblin::ScenarioConfig cfg = resolve_config(scenario, config_path, opts);
    fblin::run_excite_stage(cfg, resolve_out_dir(out_dir, cfg));
  });
}

fbl_status fbl_simulate(const char* scenario, const char* config_path, const char* out_dir,
                        const fbl_run_options* opts) {
  return guard([&] {
    const fblin::ScenarioConfig cfg = resolve_config(scenario, config_path, opts);
    fblin::run_simulate_stage(cfg, resolve_out_dir(out_dir, cfg));
  });
}

fbl_status fbl_linearise(const char* scenario, const char* config_path, const char* out_dir,
                         const fbl_run_options* opts) {
  return guard([&] {
    const fblin::ScenarioConfig cfg = resolve_config(scenario, config_path, opts);
    fblin::run_linearise_stage(cfg, resolve_out_dir(out_dir, cfg));
  });
}

fbl_status fbl_analyse(const char* design_path, const char* const* record_paths,
                       size_t record_count, size_t discard_periods,
                       double resonance_hint_hz, const char* out_dir) {
  return guard([&] {
    require(design_path != nullptr && out_dir != nullptr, "fbl_analyse: NULL argument");
    require(record_paths != nullptr && record_count > 0, "fbl_analyse: no records given");
    std::vector<std::filesystem::path> records;
    records.reserve(record_count);
    for (size_t i = 0; i < record_count; ++i) {
      require(record_paths[i] != nullptr, "fbl_analyse: NULL record path");
      records.emplace_back(record_paths[i]);
    }
    fblin::run_analyse_stage(design_path, records, discard_periods, resonance_hint_hz,
                             out_dir);
  });
}

fbl_status fbl_compare(const char* before_report_path, const char* after_report_path,
                       const char* out_path) {
  return guard([&] {
    require(before_report_path != nullptr && after_report_path != nullptr &&
                out_path != nullptr,
            "fbl_compare: NULL argument");
    fblin::run_compare_stage(before_report_path, after_report_path, out_path);
  });
}

}  // extern "C"
