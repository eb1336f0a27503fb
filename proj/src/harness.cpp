#include "senreg/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "senreg/errors.hpp"
#include "senreg/scenario_config.hpp"

namespace senreg {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

bool is_angle(BiasKind kind) { return kind != BiasKind::Range; }

double report_units(BiasKind kind, double v) { return is_angle(kind) ? rad_to_deg(v) : v; }

std::string_view unit_name(BiasKind kind) { return is_angle(kind) ? "deg" : "m"; }

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

void close_output(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void make_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
}

double parse_number(const std::string& text, const std::string& field) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError(field, "not a number: '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(v)) throw ConfigError(field, "not a number: '" + text + "'");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

BiasSet RunRecord::error() const {
  BiasSet e(estimate.sensor_count());
  for (BiasKind kind : kAllBiasKinds) {
    for (std::size_t m = 0; m < e.sensor_count(); ++m) {
      const double d = estimate.of(kind)[m] - truth.of(kind)[m];
      e.of(kind)[m] = is_angle(kind) ? wrap_angle(d) : d;
    }
  }
  return e;
}

double RmseTable::mean(BiasKind kind) const {
  const auto& v = rmse.of(kind);
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

RmseTable rmse_table(const std::vector<RunRecord>& records, std::size_t sensor_count) {
  RmseTable t;
  t.rmse = BiasSet(sensor_count);
  for (const auto& r : records) {
    if (!r.ok) {
      ++t.failures;
      continue;
    }
    if (r.estimate.sensor_count() != sensor_count) throw ContractViolation("rmse_table: sensor count mismatch");
    const BiasSet e = r.error();
    for (BiasKind kind : kAllBiasKinds) {
      for (std::size_t m = 0; m < sensor_count; ++m) t.rmse.of(kind)[m] += e.of(kind)[m] * e.of(kind)[m];
    }
    ++t.runs;
  }
  for (BiasKind kind : kAllBiasKinds) {
    for (auto& v : t.rmse.of(kind)) v = t.runs > 0 ? std::sqrt(v / t.runs) : std::nan("");
  }
  return t;
}

std::uint64_t run_seed(std::uint64_t base_seed, int run) {
  Rng rng = make_substream(base_seed, 0x72756e0000000000ull + static_cast<std::uint64_t>(run));
  return rng();
}

RunRecord run_once(const ScenarioConfig& config, int run, std::uint64_t seed, const MonteCarloOptions& opts) {
  RunRecord rec;
  rec.run = run;
  rec.seed = seed;
  rec.mode = opts.mode;
  rec.truth = true_biases(config);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const Scenario scenario = generate_scenario(config, seed);
    const RegistrationProblem problem = make_problem(scenario);
    const SolveReport rep = bcd(problem, opts.mode, {}, opts.bcd);
    rec.ok = true;
    rec.estimate = rep.biases;
    rec.sweeps = rep.sweeps;
    rec.admm_iterations = rep.total_admm_iterations;
    rec.rejected_updates = rep.rejected_angle_updates;
    rec.termination = rep.termination;
    rec.objective = rep.objective.back();
    rec.last_change = rep.last_change;
  } catch (const SolverError& e) {
    rec.failure = e.what();
  } catch (const std::domain_error& e) {
    rec.failure = e.what();
  }
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

MonteCarloResult run_monte_carlo(const ScenarioConfig& config, int runs, std::uint64_t base_seed,
                                 const MonteCarloOptions& opts) {
  if (runs < 1) throw ContractViolation("run_monte_carlo: runs must be at least 1");
  validate(config);

  MonteCarloResult res;
  res.records.resize(static_cast<std::size_t>(runs));
  std::atomic<int> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  auto worker = [&] {
    for (int r = next++; r < runs; r = next++) {
      try {
        res.records[static_cast<std::size_t>(r)] = run_once(config, r, run_seed(base_seed, r), opts);
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        next = runs;
      }
    }
  };
  const int workers = std::max(1, std::min(opts.workers, runs));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);
  res.table = rmse_table(res.records, config.sensors.size());
  return res;
}

SweepParameter parse_sweep_parameter(const std::string& name) {
  if (name == "noise") return SweepParameter::Noise;
  if (name == "q") return SweepParameter::ProcessNoise;
  if (name == "bias-scale") return SweepParameter::BiasScale;
  throw ConfigError("param", "expected noise, q or bias-scale, got '" + name + "'");
}

std::string_view to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::Noise: return "noise";
    case SweepParameter::ProcessNoise: return "q";
    case SweepParameter::BiasScale: return "bias-scale";
  }
  return "?";
}

ScenarioConfig apply_sweep_value(const ScenarioConfig& config, SweepParameter p, const std::string& value) {
  switch (p) {
    case SweepParameter::Noise: {
      const auto parts = split(value, ':');
      if (parts.size() != 2) throw ConfigError("values", "noise value must read SIGMA_RANGE_M:SIGMA_ANGLE_DEG");
      const double sr = parse_number(parts[0], "values");
      const double sa = parse_number(parts[1], "values");
      if (sr < 0.0 || sa < 0.0) throw ConfigError("values", "noise sigmas must be nonnegative");
      ScenarioConfig out = config;
      for (auto& s : out.sensors) s.noise = {sr, deg_to_rad(sa), deg_to_rad(sa)};
      return out;
    }
    case SweepParameter::ProcessNoise: {
      const double q = parse_number(value, "values");
      if (q < 0.0) throw ConfigError("values", "q must be nonnegative");
      ScenarioConfig out = config;
      out.target.q = q;
      return out;
    }
    case SweepParameter::BiasScale: {
      const double c = parse_number(value, "values");
      if (!(c > 0.0)) throw ConfigError("values", "bias scale must be positive");
      return scale_biases(config, c);
    }
  }
  return config;
}

std::vector<SweepPoint> sweep(const ScenarioConfig& config, SweepParameter p, const std::vector<std::string>& values,
                              int runs, std::uint64_t base_seed, const MonteCarloOptions& opts) {
  if (values.empty()) throw ConfigError("values", "at least one value is required");
  std::vector<ScenarioConfig> configs;
  for (const auto& v : values) configs.push_back(apply_sweep_value(config, p, v));
  std::vector<SweepPoint> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.push_back({values[i], run_monte_carlo(configs[i], runs, base_seed, opts)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

void write_runs_csv(std::ostream& out, const std::vector<RunRecord>& records, std::size_t sensor_count) {
  out << "run,seed,weight,status,termination,sweeps,admm_iterations,rejected_updates,objective,last_change";
  for (BiasKind kind : kAllBiasKinds) {
    for (std::size_t m = 1; m <= sensor_count; ++m) out << ",estimate_" << to_string(kind) << "_" << m;
  }
  for (BiasKind kind : kAllBiasKinds) {
    for (std::size_t m = 1; m <= sensor_count; ++m) out << ",error_" << to_string(kind) << "_" << m;
  }
  out << ",message\n";
  for (const auto& r : records) {
    out << r.run << ',' << r.seed << ',' << to_string(r.mode) << ',' << (r.ok ? "ok" : "failed") << ',';
    if (r.ok) {
      out << to_string(r.termination) << ',' << r.sweeps << ',' << r.admm_iterations << ',' << r.rejected_updates
          << ',' << fmt(r.objective) << ',' << fmt(r.last_change);
      const BiasSet e = r.error();
      for (BiasKind kind : kAllBiasKinds) {
        for (double v : r.estimate.of(kind)) out << ',' << fmt(v);
      }
      for (BiasKind kind : kAllBiasKinds) {
        for (double v : e.of(kind)) out << ',' << fmt(v);
      }
      out << ",\n";
    } else {
      out << ",,,,,";
      for (std::size_t i = 0; i < 2 * std::size(kAllBiasKinds) * sensor_count; ++i) out << ',';
      out << ',' << quoted(r.failure) << '\n';
    }
  }
}

namespace {

void write_rmse_rows(std::ostream& out, const RmseTable& t, const std::string& prefix) {
  for (std::size_t m = 0; m < t.sensor_count(); ++m) {
    for (BiasKind kind : kAllBiasKinds) {
      out << prefix << (m + 1) << ',' << to_string(kind) << ',' << fmt(report_units(kind, t.rmse.of(kind)[m])) << ','
          << unit_name(kind) << ',' << t.runs << ',' << t.failures << '\n';
    }
  }
}

}  // namespace

void write_rmse_csv(std::ostream& out, const RmseTable& table) {
  out << "sensor,bias_kind,rmse,units,runs,failures\n";
  write_rmse_rows(out, table, "");
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
  out << "value,sensor,bias_kind,rmse,units,runs,failures\n";
  for (const auto& p : points) write_rmse_rows(out, p.result.table, p.value + ",");
}

void write_timing_csv(std::ostream& out, const std::vector<RunRecord>& records) {
  out << "run,weight,wall_time_s\n";
  for (const auto& r : records) out << r.run << ',' << to_string(r.mode) << ',' << fmt(r.wall_time) << '\n';
}

RmseTable parse_rmse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || split(line, ',') != std::vector<std::string>{"sensor", "bias_kind", "rmse", "units",
                                                                               "runs", "failures"}) {
    throw ConfigError("rmse.csv", "unexpected header");
  }
  struct Row {
    std::size_t sensor;
    BiasKind kind;
    double value;
  };
  std::vector<Row> rows;
  RmseTable t;
  std::size_t sensors = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = "rmse.csv:" + std::to_string(line_no);
    const auto f = split(line, ',');
    if (f.size() != 6) throw ConfigError(where, "expected 6 fields");
    const double sensor = parse_number(f[0], where);
    if (sensor < 1 || sensor != std::floor(sensor)) throw ConfigError(where, "bad sensor index");
    BiasKind kind{};
    bool found = false;
    for (BiasKind k : kAllBiasKinds) {
      if (to_string(k) == f[1]) {
        kind = k;
        found = true;
      }
    }
    if (!found) throw ConfigError(where, "unknown bias kind '" + f[1] + "'");
    if (f[3] != unit_name(kind)) throw ConfigError(where, "unexpected units '" + f[3] + "'");
    double v = parse_number(f[2], where);
    if (is_angle(kind)) v = deg_to_rad(v);
    rows.push_back({static_cast<std::size_t>(sensor), kind, v});
    t.runs = static_cast<int>(parse_number(f[4], where));
    t.failures = static_cast<int>(parse_number(f[5], where));
    sensors = std::max(sensors, rows.back().sensor);
  }
  t.rmse = BiasSet(sensors);
  for (const auto& r : rows) t.rmse.of(r.kind)[r.sensor - 1] = r.value;
  return t;
}

void emit_results(const std::filesystem::path& dir, const MonteCarloResult& result, std::size_t sensor_count) {
  make_dir(dir);
  const auto runs = dir / "runs.csv";
  auto out = open_output(runs);
  write_runs_csv(out, result.records, sensor_count);
  close_output(out, runs);

  const auto rmse = dir / "rmse.csv";
  out = open_output(rmse);
  write_rmse_csv(out, result.table);
  close_output(out, rmse);

  const auto timing = dir / "timing.csv";
  out = open_output(timing);
  write_timing_csv(out, result.records);
  close_output(out, timing);
}

void emit_sweep(const std::filesystem::path& dir, const std::vector<SweepPoint>& points) {
  make_dir(dir);
  const auto path = dir / "sweep.csv";
  auto out = open_output(path);
  write_sweep_csv(out, points);
  close_output(out, path);

  const auto timing = dir / "timing.csv";
  out = open_output(timing);
  out << "value,run,weight,wall_time_s\n";
  for (const auto& p : points) {
    for (const auto& r : p.result.records) {
      out << p.value << ',' << r.run << ',' << to_string(r.mode) << ',' << fmt(r.wall_time) << '\n';
    }
  }
  close_output(out, timing);
}

void emit_scenario(const std::filesystem::path& dir, const Scenario& scenario) {
  make_dir(dir);
  const auto meas = dir / "measurements.csv";
  auto out = open_output(meas);
  out << "instance,sensor,time_s,range_m,azimuth_rad,elevation_rad\n";
  for (const auto& m : scenario.measurements) {
    out << m.instance << ',' << (m.sensor + 1) << ',' << fmt(m.time) << ',' << fmt(m.reading.range) << ','
        << fmt(m.reading.azimuth) << ',' << fmt(m.reading.elevation) << '\n';
  }
  close_output(out, meas);

  const auto truth = dir / "truth.csv";
  out = open_output(truth);
  out << "instance,time_s,x_m,y_m,z_m,vx_mps,vy_mps,vz_mps\n";
  for (std::size_t k = 0; k < scenario.truth.positions.size(); ++k) {
    const Vec3& p = scenario.truth.positions[k];
    const Vec3& v = scenario.truth.velocities[k];
    out << k << ',' << fmt(scenario.schedule.times[k]) << ',' << fmt(p.x()) << ',' << fmt(p.y()) << ','
        << fmt(p.z()) << ',' << fmt(v.x()) << ',' << fmt(v.y()) << ',' << fmt(v.z()) << '\n';
  }
  close_output(out, truth);

  const auto biases = dir / "biases.csv";
  out = open_output(biases);
  out << "sensor,bias_kind,value,units\n";
  const BiasSet b = true_biases(scenario.config);
  for (std::size_t m = 0; m < b.sensor_count(); ++m) {
    for (BiasKind kind : kAllBiasKinds) {
      out << (m + 1) << ',' << to_string(kind) << ',' << fmt(b.of(kind)[m]) << ',' << (is_angle(kind) ? "rad" : "m")
          << '\n';
    }
  }
  close_output(out, biases);
}

}  // namespace senreg
