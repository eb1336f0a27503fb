#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "senreg/geometry.hpp"

namespace senreg {

/// 64-bit Mersenne twister; every Monte-Carlo run draws from its own substream.
using Rng = std::mt19937_64;

/// Deterministic, decorrelated generator for (base_seed, stream).
Rng make_substream(std::uint64_t base_seed, std::uint64_t stream);

/// One sensor: known placement, presumed orientation, and the (unknown to the estimator) biases.
struct SensorConfig {
  Vec3 position = Vec3::Zero();     ///< meters, global frame
  EulerAngles orientation;          ///< presumed roll/pitch/yaw
  EulerAngles orientation_bias;     ///< true roll/pitch/yaw offsets
  double range_bias = 0.0;          ///< meters
  double azimuth_bias = 0.0;        ///< radians; only used to exercise the yaw/azimuth ambiguity
  double elevation_bias = 0.0;      ///< radians
  NoiseSigmas noise;
};

/// Nearly-constant-velocity target. State at t = 0 is (initial_position, velocity).
struct MotionSpec {
  Vec3 initial_position = Vec3::Zero();  ///< m
  Vec3 velocity = Vec3::Zero();          ///< m/s
  double q = 0.0;                        ///< process noise density, m^2/s^3
};

/// Time-ordered observation instances; exactly one sensor per instance.
struct Schedule {
  std::vector<double> times;  ///< seconds, strictly increasing
  std::vector<int> sensors;   ///< zero-based sensor index per instance

  std::size_t size() const { return times.size(); }
  /// T_k = t_{k+1} - t_k, length K - 1.
  std::vector<double> intervals() const;
};

struct Measurement {
  int instance = 0;
  int sensor = 0;
  double time = 0.0;
  SphericalReading reading;
};

struct TruthTrack {
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
};

/// Position and velocity process noise over an interval of length `dt`. Per axis the pair is
/// Gaussian with covariance [[q dt^3/3, q dt^2/2], [q dt^2/2, q dt]].
std::pair<Vec3, Vec3> draw_process_noise(double q, double dt, Rng& rng);

/// Propagates the target from t = 0 through every scheduled instance.
TruthTrack simulate_track(const MotionSpec& motion, const Schedule& schedule, std::uint64_t seed);

/// Biased noisy reading of `position` by `sensor`:
/// h(R^T(orientation + orientation_bias)(position - p)) - (range, azimuth, elevation bias) + noise.
/// Throws DomainError when the target sits on the sensor.
SphericalReading measure(const Vec3& position, const SensorConfig& sensor, const Vec3& noise);

/// Periodic asynchronous schedule: sensor m reports at offsets[m] + j * period, j < count.
struct ScheduleSpec {
  double period = 10.0;
  std::vector<double> offsets;
  int count_per_sensor = 20;
};

struct ScenarioConfig {
  std::vector<SensorConfig> sensors;
  MotionSpec target;
  ScheduleSpec schedule;
};

/// Four-sensor reference scenario (positions and biases of the reference table,
/// sigma_range 0.05 m, sigma_angle 0.02 deg, q 0.5 m^2/s^3).
ScenarioConfig default_scenario_config();

/// Copy of `config` with every measurement and process noise set to zero.
ScenarioConfig noiseless(ScenarioConfig config);

/// Copy of `config` with every bias multiplied by `factor`.
ScenarioConfig scale_biases(ScenarioConfig config, double factor);

/// Sorted merge of the per-sensor report times. Throws ConfigError on coincident stamps.
Schedule build_schedule(const ScheduleSpec& spec, int sensor_count);

struct Scenario {
  ScenarioConfig config;
  Schedule schedule;
  TruthTrack truth;
  std::vector<Measurement> measurements;
};

/// Full synthetic dataset; deterministic in `seed`.
Scenario generate_scenario(const ScenarioConfig& config, std::uint64_t seed);

}  // namespace senreg
