#include "senreg/scenario_config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <json.hpp>
#include <set>
#include <sstream>

#include "senreg/errors.hpp"

namespace senreg {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

void reject_unknown(const json& j, const std::string& path, std::initializer_list<const char*> known) {
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(path.empty() ? key : path + "." + key, "unknown field");
  }
}

const json& field(const json& j, const std::string& path, const char* key) {
  auto it = j.find(key);
  const std::string p = path.empty() ? key : path + "." + key;
  if (it == j.end()) throw ConfigError(p, "missing required field");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "not finite");
  return v;
}

double number_field(const json& j, const std::string& path, const char* key) {
  return number(field(j, path, key), path + "." + key);
}

double optional_number(const json& j, const std::string& path, const char* key, double fallback) {
  return j.contains(key) ? number(j.at(key), path + "." + key) : fallback;
}

Vec3 vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(path, "expected an array of 3 numbers");
  return {number(j[0], path + "[0]"), number(j[1], path + "[1]"), number(j[2], path + "[2]")};
}

SensorConfig parse_sensor(const json& j, const std::string& path) {
  require_object(j, path);
  reject_unknown(j, path, {"position_km", "orientation_deg", "biases", "noise"});
  SensorConfig s;
  s.position = 1000.0 * vec3(field(j, path, "position_km"), path + ".position_km");
  if (j.contains("orientation_deg")) {
    const Vec3 o = vec3(j.at("orientation_deg"), path + ".orientation_deg");
    s.orientation = EulerAngles(deg_to_rad(o[0]), deg_to_rad(o[1]), deg_to_rad(o[2]));
  }

  const std::string bp = path + ".biases";
  const json& b = field(j, path, "biases");
  require_object(b, bp);
  reject_unknown(b, bp, {"range_km", "azimuth_deg", "elevation_deg", "roll_deg", "pitch_deg", "yaw_deg"});
  s.range_bias = 1000.0 * number_field(b, bp, "range_km");
  s.azimuth_bias = deg_to_rad(optional_number(b, bp, "azimuth_deg", 0.0));
  s.elevation_bias = deg_to_rad(number_field(b, bp, "elevation_deg"));
  s.orientation_bias = EulerAngles(deg_to_rad(number_field(b, bp, "roll_deg")),
                                   deg_to_rad(number_field(b, bp, "pitch_deg")),
                                   deg_to_rad(number_field(b, bp, "yaw_deg")));

  const std::string np = path + ".noise";
  const json& n = field(j, path, "noise");
  require_object(n, np);
  reject_unknown(n, np, {"sigma_range_m", "sigma_azimuth_deg", "sigma_elevation_deg"});
  s.noise.range = number_field(n, np, "sigma_range_m");
  s.noise.azimuth = deg_to_rad(number_field(n, np, "sigma_azimuth_deg"));
  s.noise.elevation = deg_to_rad(number_field(n, np, "sigma_elevation_deg"));
  return s;
}

}  // namespace

void validate(const ScenarioConfig& config) {
  if (config.sensors.empty()) throw ConfigError("sensors", "at least one sensor is required");
  for (std::size_t m = 0; m < config.sensors.size(); ++m) {
    const auto& n = config.sensors[m].noise;
    const std::string p = "sensors[" + std::to_string(m) + "].noise";
    if (n.range < 0.0) throw ConfigError(p + ".sigma_range_m", "must be nonnegative");
    if (n.azimuth < 0.0) throw ConfigError(p + ".sigma_azimuth_deg", "must be nonnegative");
    if (n.elevation < 0.0) throw ConfigError(p + ".sigma_elevation_deg", "must be nonnegative");
  }
  if (config.target.q < 0.0) throw ConfigError("target.q_m2ps3", "must be nonnegative");
  const auto& s = config.schedule;
  if (!(s.period > 0.0)) throw ConfigError("schedule.period_s", "must be positive");
  if (s.count_per_sensor < 1) throw ConfigError("schedule.count_per_sensor", "must be at least 1");
  if (s.offsets.size() != config.sensors.size()) {
    throw ConfigError("schedule.offsets_s", "needs one offset per sensor (" +
                                                std::to_string(config.sensors.size()) + ")");
  }
  for (std::size_t m = 0; m < s.offsets.size(); ++m) {
    if (s.offsets[m] < 0.0) {
      throw ConfigError("schedule.offsets_s[" + std::to_string(m) + "]", "must be nonnegative");
    }
  }
}

ScenarioConfig parse_scenario_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  require_object(root, "");
  reject_unknown(root, "", {"sensors", "target", "schedule"});

  ScenarioConfig cfg;
  const json& sensors = field(root, "", "sensors");
  if (!sensors.is_array()) throw ConfigError("sensors", "expected an array");
  for (std::size_t m = 0; m < sensors.size(); ++m) {
    cfg.sensors.push_back(parse_sensor(sensors[m], "sensors[" + std::to_string(m) + "]"));
  }

  const json& target = field(root, "", "target");
  require_object(target, "target");
  reject_unknown(target, "target", {"initial_km", "velocity_kmps", "q_m2ps3"});
  cfg.target.initial_position = 1000.0 * vec3(field(target, "target", "initial_km"), "target.initial_km");
  cfg.target.velocity = 1000.0 * vec3(field(target, "target", "velocity_kmps"), "target.velocity_kmps");
  cfg.target.q = number_field(target, "target", "q_m2ps3");

  const json& sched = field(root, "", "schedule");
  require_object(sched, "schedule");
  reject_unknown(sched, "schedule", {"period_s", "offsets_s", "count_per_sensor"});
  cfg.schedule.period = number_field(sched, "schedule", "period_s");
  const json& offsets = field(sched, "schedule", "offsets_s");
  if (!offsets.is_array()) throw ConfigError("schedule.offsets_s", "expected an array");
  cfg.schedule.offsets.clear();
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    cfg.schedule.offsets.push_back(number(offsets[i], "schedule.offsets_s[" + std::to_string(i) + "]"));
  }
  const json& count = field(sched, "schedule", "count_per_sensor");
  if (!count.is_number_integer()) throw ConfigError("schedule.count_per_sensor", "expected an integer");
  cfg.schedule.count_per_sensor = count.get<int>();

  validate(cfg);
  return cfg;
}

ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open scenario file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario_config(buf.str());
}

std::string scenario_config_to_json(const ScenarioConfig& config) {
  auto km = [](const Vec3& v) { return json::array({v[0] / 1000.0, v[1] / 1000.0, v[2] / 1000.0}); };
  json root;
  root["sensors"] = json::array();
  for (const auto& s : config.sensors) {
    json js;
    js["position_km"] = km(s.position);
    js["orientation_deg"] = json::array(
        {rad_to_deg(s.orientation.roll), rad_to_deg(s.orientation.pitch), rad_to_deg(s.orientation.yaw)});
    js["biases"] = {{"range_km", s.range_bias / 1000.0},
                    {"azimuth_deg", rad_to_deg(s.azimuth_bias)},
                    {"elevation_deg", rad_to_deg(s.elevation_bias)},
                    {"roll_deg", rad_to_deg(s.orientation_bias.roll)},
                    {"pitch_deg", rad_to_deg(s.orientation_bias.pitch)},
                    {"yaw_deg", rad_to_deg(s.orientation_bias.yaw)}};
    js["noise"] = {{"sigma_range_m", s.noise.range},
                   {"sigma_azimuth_deg", rad_to_deg(s.noise.azimuth)},
                   {"sigma_elevation_deg", rad_to_deg(s.noise.elevation)}};
    root["sensors"].push_back(js);
  }
  root["target"] = {{"initial_km", km(config.target.initial_position)},
                    {"velocity_kmps", km(config.target.velocity)},
                    {"q_m2ps3", config.target.q}};
  root["schedule"] = {{"period_s", config.schedule.period},
                      {"offsets_s", config.schedule.offsets},
                      {"count_per_sensor", config.schedule.count_per_sensor}};
  return root.dump(2);
}

}  // namespace senreg
