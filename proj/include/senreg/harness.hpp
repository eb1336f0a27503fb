#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "senreg/assembly.hpp"
#include "senreg/model.hpp"
#include "senreg/solver.hpp"

namespace senreg {

/// Outcome of one Monte-Carlo run. Errors are estimate - truth in stored units (m / rad).
struct RunRecord {
  int run = 0;
  std::uint64_t seed = 0;
  WeightMode mode = WeightMode::Identity;
  bool ok = false;
  std::string failure;  ///< solver error message when !ok
  BiasSet estimate;
  BiasSet truth;
  int sweeps = 0;
  long admm_iterations = 0;
  int rejected_updates = 0;
  Termination termination = Termination::SweepLimit;
  double objective = 0.0;
  double last_change = 0.0;
  double wall_time = 0.0;  ///< seconds; kept out of runs.csv so that file stays reproducible

  /// estimate - truth, angle differences wrapped to (-pi, pi].
  BiasSet error() const;
};

/// Root-mean-square error per sensor and bias kind over the successful runs (m / rad).
struct RmseTable {
  BiasSet rmse;
  int runs = 0;
  int failures = 0;

  std::size_t sensor_count() const { return rmse.sensor_count(); }
  /// Mean of the per-sensor RMSE values of one kind.
  double mean(BiasKind kind) const;
};

/// sqrt(mean(e^2)) per entry over records with ok set; failed runs only bump `failures`.
RmseTable rmse_table(const std::vector<RunRecord>& records, std::size_t sensor_count);

struct MonteCarloOptions {
  WeightMode mode = WeightMode::Identity;
  BcdOptions bcd;
  int workers = 1;
};

struct MonteCarloResult {
  RmseTable table;
  std::vector<RunRecord> records;  ///< ordered by run index
};

/// Seed of run `run` under `base_seed`.
std::uint64_t run_seed(std::uint64_t base_seed, int run);

/// Simulates and estimates one run. Solver and domain errors are caught into the record.
RunRecord run_once(const ScenarioConfig& config, int run, std::uint64_t seed, const MonteCarloOptions& opts);

/// Runs `runs` independent trials on `opts.workers` threads. Deterministic in base_seed.
/// Throws ConfigError for an invalid config and ContractViolation for runs < 1.
MonteCarloResult run_monte_carlo(const ScenarioConfig& config, int runs, std::uint64_t base_seed,
                                 const MonteCarloOptions& opts);

enum class SweepParameter { Noise, ProcessNoise, BiasScale };
/// "noise", "q" or "bias-scale". Throws ConfigError otherwise.
SweepParameter parse_sweep_parameter(const std::string& name);
std::string_view to_string(SweepParameter p);

/// Copy of `config` with one sweep value applied. Noise values read "SIGMA_RANGE_M:SIGMA_ANGLE_DEG"
/// and set both angle sigmas of every sensor; q and bias-scale values are plain numbers.
/// Throws ConfigError on a malformed or out-of-range value.
ScenarioConfig apply_sweep_value(const ScenarioConfig& config, SweepParameter p, const std::string& value);

struct SweepPoint {
  std::string value;
  MonteCarloResult result;
};

/// One Monte-Carlo batch per value, all with the same base seed. Throws ConfigError on an empty
/// value list.
std::vector<SweepPoint> sweep(const ScenarioConfig& config, SweepParameter p, const std::vector<std::string>& values,
                              int runs, std::uint64_t base_seed, const MonteCarloOptions& opts);

// CSV output. Floats carry 17 significant digits. Range values are in meters; rmse.csv and
// sweep.csv report angles in degrees, runs.csv in radians.

void write_runs_csv(std::ostream& out, const std::vector<RunRecord>& records, std::size_t sensor_count);
void write_rmse_csv(std::ostream& out, const RmseTable& table);
void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points);
void write_timing_csv(std::ostream& out, const std::vector<RunRecord>& records);

/// Reads rmse.csv back into internal units. Throws ConfigError on malformed input.
RmseTable parse_rmse_csv(const std::string& text);

/// runs.csv, rmse.csv and timing.csv under `dir` (created if missing).
void emit_results(const std::filesystem::path& dir, const MonteCarloResult& result, std::size_t sensor_count);
/// sweep.csv and timing.csv under `dir`.
void emit_sweep(const std::filesystem::path& dir, const std::vector<SweepPoint>& points);
/// measurements.csv, truth.csv and biases.csv under `dir`.
void emit_scenario(const std::filesystem::path& dir, const Scenario& scenario);

}  // namespace senreg
