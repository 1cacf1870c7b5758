// fblin: experiment harness for the feedback-linearising controller.
//
// Exit codes: 0 success, 1 bad arguments/config/IO, 2 divergence,
// 3 failed acceptance checks (with --check).

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "fblin.h"

namespace {

struct CommonArgs {
  std::string scenario;
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool full_scale = false;
  bool check = false;
  unsigned threads = 0;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_check) {
  cmd->add_option("--scenario", args.scenario, "built-in scenario id");
  cmd->add_option("--config", args.config, "config document (overrides scenario defaults)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out, "output directory");
  args.seed_opt = cmd->add_option("--seed", args.seed, "master seed override");
  cmd->add_flag("--full-scale", args.full_scale, "full realisation/period counts");
  cmd->add_option("--threads", args.threads, "realisation worker count (0 = hardware)");
  if (with_check)
    cmd->add_flag("--check", args.check, "fail (exit 3) when an embedded check fails");
}

fbl_run_options to_options(const CommonArgs& args) {
  fbl_run_options opts{};
  opts.seed = args.seed;
  opts.has_seed = args.seed_opt != nullptr && args.seed_opt->count() > 0 ? 1 : 0;
  opts.full_scale = args.full_scale ? 1 : 0;
  opts.check = args.check ? 1 : 0;
  opts.threads = args.threads;
  return opts;
}

const char* or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

int finish(fbl_status status) {
  switch (status) {
    case FBL_OK:
      return 0;
    case FBL_ERR_DIVERGED:
      std::fprintf(stderr, "error: %s\n", fbl_last_error());
      return 2;
    case FBL_ERR_CHECK_FAILED:
      std::fprintf(stderr, "error: %s\n", fbl_last_error());
      return 3;
    default:
      std::fprintf(stderr, "error: %s\n", fbl_last_error());
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"feedback-linearisation experiment harness"};
  app.require_subcommand(1);

  CommonArgs excite_args, simulate_args, linearise_args, scenario_args;

  CLI::App* excite = app.add_subcommand("excite", "design a multisine and export realisations");
  add_common(excite, excite_args, false);

  CLI::App* simulate = app.add_subcommand("simulate", "open-loop records, spectra and report");
  add_common(simulate, simulate_args, false);

  CLI::App* linearise =
      app.add_subcommand("linearise", "closed-loop records plus before/after comparison");
  add_common(linearise, linearise_args, false);

  CLI::App* scenario = app.add_subcommand("scenario", "named end-to-end experiment");
  add_common(scenario, scenario_args, true);
  bool list_scenarios = false;
  std::string write_config;
  scenario->add_flag("--list", list_scenarios, "list built-in scenario ids");
  scenario->add_option("--write-config", write_config,
                       "write the scenario's default config document and exit");

  std::string design_path, analyse_out;
  std::vector<std::string> record_paths;
  std::size_t discard = 1;
  double resonance_hint = std::nan("");
  CLI::App* analyse = app.add_subcommand("analyse", "spectra and distortions from record CSVs");
  analyse->add_option("--design", design_path, "excitation design document")
      ->required()
      ->check(CLI::ExistingFile);
  analyse->add_option("records", record_paths, "record CSVs, one per realisation")
      ->required()
      ->check(CLI::ExistingFile);
  analyse->add_option("--discard", discard, "transient periods to drop (default 1)");
  analyse->add_option("--resonance", resonance_hint, "resonance hint in Hz (default: detect)");
  analyse->add_option("--out", analyse_out, "output directory")->required();

  std::string before_path, after_path, compare_out;
  CLI::App* compare = app.add_subcommand("compare", "delta between two distortion reports");
  compare->add_option("--before", before_path, "report before linearisation")
      ->required()
      ->check(CLI::ExistingFile);
  compare->add_option("--after", after_path, "report after linearisation")
      ->required()
      ->check(CLI::ExistingFile);
  compare->add_option("--out", compare_out, "output document path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (excite->parsed()) {
    const fbl_run_options opts = to_options(excite_args);
    return finish(fbl_excite(or_null(excite_args.scenario), or_null(excite_args.config),
                             or_null(excite_args.out), &opts));
  }
  if (simulate->parsed()) {
    const fbl_run_options opts = to_options(simulate_args);
    return finish(fbl_simulate(or_null(simulate_args.scenario), or_null(simulate_args.config),
                               or_null(simulate_args.out), &opts));
  }
  if (linearise->parsed()) {
    const fbl_run_options opts = to_options(linearise_args);
    return finish(fbl_linearise(or_null(linearise_args.scenario),
                                or_null(linearise_args.config), or_null(linearise_args.out),
                                &opts));
  }
  if (scenario->parsed()) {
    if (list_scenarios) {
      for (size_t i = 0; i < fbl_scenario_count(); ++i)
        std::printf("%s\n", fbl_scenario_name(i));
      return 0;
    }
    if (!write_config.empty())
      return finish(
          fbl_write_default_config(or_null(scenario_args.scenario), write_config.c_str()));
    const fbl_run_options opts = to_options(scenario_args);
    int all_passed = 0;
    const fbl_status status =
        fbl_run_scenario(or_null(scenario_args.scenario), or_null(scenario_args.config),
                         or_null(scenario_args.out), &opts, &all_passed);
    if (status == FBL_OK)
      std::printf("checks: %s\n", all_passed != 0 ? "pass" : "fail (see summary.json)");
    return finish(status);
  }
  if (analyse->parsed()) {
    std::vector<const char*> records;
    records.reserve(record_paths.size());
    for (const auto& p : record_paths) records.push_back(p.c_str());
    return finish(fbl_analyse(design_path.c_str(), records.data(), records.size(), discard,
                              resonance_hint, analyse_out.c_str()));
  }
  if (compare->parsed())
    return finish(
        fbl_compare(before_path.c_str(), after_path.c_str(), compare_out.c_str()));

  return 1;
}
