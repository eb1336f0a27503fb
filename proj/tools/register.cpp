// register: simulate scenarios, run Monte-Carlo bias estimation, sweep scenario parameters.
//
// Exit codes: 0 success, 1 configuration or I/O error, 2 every run failed in the solver.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>

#include "senreg/errors.hpp"
#include "senreg/harness.hpp"
#include "senreg/scenario_config.hpp"

using namespace senreg;

namespace {

struct EstimateFlags {
  std::string weight = "nls";
  double tol = 1e-5;
  double admm_tol = 1e-9;
  int max_sweeps = 1000;
  int runs = 100;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out = "results";
};

void add_estimate_flags(CLI::App* cmd, EstimateFlags& f) {
  cmd->add_option("--weight", f.weight, "Weighting: nls (identity) or pml (pseudo-ML)")
      ->check(CLI::IsMember({"nls", "pml"}))
      ->capture_default_str();
  cmd->add_option("--tol", f.tol, "BCD stop: max bias change between sweeps (m / rad)")->capture_default_str();
  cmd->add_option("--admm-tol", f.admm_tol, "ADMM primal and dual residual tolerance")->capture_default_str();
  cmd->add_option("--max-sweeps", f.max_sweeps, "BCD sweep limit")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--runs", f.runs, "Monte-Carlo runs")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--seed", f.seed, "Base seed")->capture_default_str();
  cmd->add_option("--workers", f.workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
}

MonteCarloOptions to_options(const EstimateFlags& f) {
  MonteCarloOptions o;
  o.mode = f.weight == "pml" ? WeightMode::PseudoML : WeightMode::Identity;
  o.bcd.tol = f.tol;
  o.bcd.admm.tol = f.admm_tol;
  o.bcd.max_sweeps = f.max_sweeps;
  o.workers = f.workers;
  return o;
}

ScenarioConfig load_or_default(const std::string& path) {
  if (path.empty()) return default_scenario_config();
  return load_scenario_config(path);
}

void print_summary(const RmseTable& t) {
  std::printf("runs %d, failures %d\n", t.runs, t.failures);
  for (BiasKind kind : kAllBiasKinds) {
    const double v = t.mean(kind);
    if (kind == BiasKind::Range) {
      std::printf("  mean rmse %-9s %.6g m\n", std::string(to_string(kind)).c_str(), v);
    } else {
      std::printf("  mean rmse %-9s %.6g deg\n", std::string(to_string(kind)).c_str(), rad_to_deg(v));
    }
  }
}

std::vector<std::string> split_values(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  for (const auto& v : out) {
    if (v.empty()) throw ConfigError("values", "empty entry in value list");
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-sensor registration bias estimation"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::uint64_t sim_seed = 1;
  std::string sim_out = "scenario";
  auto* simulate = app.add_subcommand("simulate", "Write one simulated data set as CSV");
  simulate->add_option("--scenario", scenario_path, "Scenario JSON (default: built-in four-sensor scenario)");
  simulate->add_option("--seed", sim_seed, "Seed")->capture_default_str();
  simulate->add_option("--out", sim_out, "Output directory")->capture_default_str();

  EstimateFlags est;
  auto* estimate = app.add_subcommand("estimate", "Monte-Carlo estimation, writes runs.csv and rmse.csv");
  estimate->add_option("--scenario", scenario_path, "Scenario JSON (default: built-in four-sensor scenario)");
  add_estimate_flags(estimate, est);

  EstimateFlags swp;
  std::string param;
  std::string values;
  auto* sweep_cmd = app.add_subcommand("sweep", "Monte-Carlo batches over parameter values, writes sweep.csv");
  sweep_cmd->add_option("--scenario", scenario_path, "Scenario JSON (default: built-in four-sensor scenario)");
  sweep_cmd->add_option("--param", param, "noise, q or bias-scale")
      ->required()
      ->check(CLI::IsMember({"noise", "q", "bias-scale"}));
  sweep_cmd->add_option("--values", values, "Comma-separated values; noise values read SIGMA_RANGE_M:SIGMA_ANGLE_DEG")
      ->required();
  add_estimate_flags(sweep_cmd, swp);

  auto* config_cmd = app.add_subcommand("default-config", "Print the built-in scenario as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*config_cmd) {
      std::cout << scenario_config_to_json(default_scenario_config()) << "\n";
      return 0;
    }
    const ScenarioConfig config = load_or_default(scenario_path);
    if (*simulate) {
      const Scenario s = generate_scenario(config, sim_seed);
      emit_scenario(sim_out, s);
      std::printf("wrote %zu measurements to %s\n", s.measurements.size(), sim_out.c_str());
      return 0;
    }
    if (*estimate) {
      const MonteCarloResult res = run_monte_carlo(config, est.runs, est.seed, to_options(est));
      emit_results(est.out, res, config.sensors.size());
      print_summary(res.table);
      for (const auto& r : res.records) {
        if (!r.ok) std::fprintf(stderr, "run %d failed: %s\n", r.run, r.failure.c_str());
      }
      return res.table.runs == 0 ? 2 : 0;
    }
    if (*sweep_cmd) {
      const auto points =
          sweep(config, parse_sweep_parameter(param), split_values(values), swp.runs, swp.seed, to_options(swp));
      emit_sweep(swp.out, points);
      bool any_ok = false;
      for (const auto& p : points) {
        std::printf("%s = %s: ", param.c_str(), p.value.c_str());
        print_summary(p.result.table);
        any_ok = any_ok || p.result.table.runs > 0;
      }
      return any_ok ? 0 : 2;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
