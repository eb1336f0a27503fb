#include "senreg/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "senreg/errors.hpp"
#include "senreg/scenario_config.hpp"

namespace senreg {

Rng make_substream(std::uint64_t base_seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(base_seed), static_cast<std::uint32_t>(base_seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x5e6e7e9u};
  return Rng(seq);
}

std::vector<double> Schedule::intervals() const {
  std::vector<double> out;
  if (times.size() < 2) return out;
  out.reserve(times.size() - 1);
  for (std::size_t k = 0; k + 1 < times.size(); ++k) out.push_back(times[k + 1] - times[k]);
  return out;
}

std::pair<Vec3, Vec3> draw_process_noise(double q, double dt, Rng& rng) {
  if (q <= 0.0 || dt <= 0.0) return {Vec3::Zero(), Vec3::Zero()};
  std::normal_distribution<double> unit(0.0, 1.0);
  // Cholesky factor of [[q dt^3/3, q dt^2/2], [q dt^2/2, q dt]]
  const double l11 = std::sqrt(q * dt * dt * dt / 3.0);
  const double l21 = 0.5 * std::sqrt(3.0 * q * dt);
  const double l22 = 0.5 * std::sqrt(q * dt);
  Vec3 pos, vel;
  for (int axis = 0; axis < 3; ++axis) {
    const double a = unit(rng);
    const double b = unit(rng);
    pos[axis] = l11 * a;
    vel[axis] = l21 * a + l22 * b;
  }
  return {pos, vel};
}

TruthTrack simulate_track(const MotionSpec& motion, const Schedule& schedule, std::uint64_t seed) {
  Rng rng = make_substream(seed, 0);
  TruthTrack track;
  track.positions.reserve(schedule.size());
  track.velocities.reserve(schedule.size());
  Vec3 pos = motion.initial_position;
  Vec3 vel = motion.velocity;
  double t = 0.0;
  for (double tk : schedule.times) {
    const double dt = tk - t;
    const auto [n, ndot] = draw_process_noise(motion.q, dt, rng);
    pos = pos + dt * vel + n;
    vel = vel + ndot;
    t = tk;
    track.positions.push_back(pos);
    track.velocities.push_back(vel);
  }
  return track;
}

SphericalReading measure(const Vec3& position, const SensorConfig& sensor, const Vec3& noise) {
  const Vec3 rel = position - sensor.position;
  if (!(rel.norm() > 0.0)) throw DomainError("measure: target coincides with sensor");
  // Yaw bias and azimuth bias enter only through their sum, so they are folded before any
  // trigonometry is evaluated.
  const double yaw = sensor.orientation.yaw + (sensor.orientation_bias.yaw + sensor.azimuth_bias);
  const Mat3 rot = rot_x(sensor.orientation.roll + sensor.orientation_bias.roll) *
                   rot_y(sensor.orientation.pitch + sensor.orientation_bias.pitch) * rot_z(yaw);
  const SphericalReading clean = cart_to_sphere(rot.transpose() * rel);
  SphericalReading out;
  out.range = clean.range - sensor.range_bias + noise[0];
  out.azimuth = wrap_angle(clean.azimuth + noise[1]);
  out.elevation = wrap_angle(clean.elevation - sensor.elevation_bias + noise[2]);
  return out;
}

namespace {

SensorConfig table_sensor(Vec3 position_km, double range_km, double elev_deg, double roll_deg,
                          double pitch_deg, double yaw_deg) {
  SensorConfig s;
  s.position = 1000.0 * position_km;
  s.range_bias = 1000.0 * range_km;
  s.elevation_bias = deg_to_rad(elev_deg);
  s.orientation_bias = EulerAngles(deg_to_rad(roll_deg), deg_to_rad(pitch_deg), deg_to_rad(yaw_deg));
  s.noise = NoiseSigmas{0.05, deg_to_rad(0.02), deg_to_rad(0.02)};
  return s;
}

}  // namespace

ScenarioConfig default_scenario_config() {
  ScenarioConfig cfg;
  cfg.sensors = {
      table_sensor({0, -15, 0}, -0.5, -2, -2, 1, -1),
      table_sensor({-20, 5, 2}, 0.3, -2, 2, -1, -1),
      table_sensor({20, 5, 0}, -0.4, -2, 2, -2, 2),
      table_sensor({0, 10, -1}, -0.2, -1, -2, -1, 1),
  };
  cfg.target.initial_position = Vec3(-30e3, -5e3, 8e3);
  cfg.target.velocity = Vec3(0.0, 300.0, 0.0);
  cfg.target.q = 0.5;
  cfg.schedule.period = 10.0;
  cfg.schedule.offsets = {2.5, 5.0, 7.5, 10.0};
  cfg.schedule.count_per_sensor = 20;
  return cfg;
}

ScenarioConfig noiseless(ScenarioConfig config) {
  for (auto& s : config.sensors) s.noise = NoiseSigmas{};
  config.target.q = 0.0;
  return config;
}

ScenarioConfig scale_biases(ScenarioConfig config, double factor) {
  for (auto& s : config.sensors) {
    s.range_bias *= factor;
    s.azimuth_bias *= factor;
    s.elevation_bias *= factor;
    s.orientation_bias = EulerAngles(factor * s.orientation_bias.roll, factor * s.orientation_bias.pitch,
                                     factor * s.orientation_bias.yaw);
  }
  return config;
}

Schedule build_schedule(const ScheduleSpec& spec, int sensor_count) {
  struct Slot {
    double time;
    int sensor;
  };
  std::vector<Slot> slots;
  for (int m = 0; m < sensor_count; ++m) {
    for (int j = 0; j < spec.count_per_sensor; ++j) {
      slots.push_back({spec.offsets.at(m) + j * spec.period, m});
    }
  }
  std::stable_sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) { return a.time < b.time; });
  Schedule out;
  for (const auto& s : slots) {
    if (!out.times.empty() && !(s.time > out.times.back())) {
      throw ConfigError("schedule", "two reports share time stamp " + std::to_string(s.time) + " s");
    }
    out.times.push_back(s.time);
    out.sensors.push_back(s.sensor);
  }
  return out;
}

Scenario generate_scenario(const ScenarioConfig& config, std::uint64_t seed) {
  validate(config);
  Scenario sc;
  sc.config = config;
  sc.schedule = build_schedule(config.schedule, static_cast<int>(config.sensors.size()));
  sc.truth = simulate_track(config.target, sc.schedule, seed);

  Rng rng = make_substream(seed, 1);
  std::normal_distribution<double> unit(0.0, 1.0);
  sc.measurements.reserve(sc.schedule.size());
  for (std::size_t k = 0; k < sc.schedule.size(); ++k) {
    const int m = sc.schedule.sensors[k];
    const SensorConfig& sensor = config.sensors[m];
    const Vec3 noise(sensor.noise.range * unit(rng), sensor.noise.azimuth * unit(rng),
                     sensor.noise.elevation * unit(rng));
    Measurement meas;
    meas.instance = static_cast<int>(k);
    meas.sensor = m;
    meas.time = sc.schedule.times[k];
    meas.reading = measure(sc.truth.positions[k], sensor, noise);
    sc.measurements.push_back(meas);
  }
  return sc;
}

}  // namespace senreg
