#include "senreg/assembly.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <string>

#include "senreg/errors.hpp"

namespace senreg {

std::string_view to_string(BiasKind kind) {
  switch (kind) {
    case BiasKind::Range: return "range";
    case BiasKind::Elevation: return "elevation";
    case BiasKind::Roll: return "roll";
    case BiasKind::Pitch: return "pitch";
    case BiasKind::Yaw: return "yaw";
  }
  return "?";
}

std::string_view to_string(AngleKind kind) { return to_string(to_bias_kind(kind)); }

BiasKind to_bias_kind(AngleKind kind) {
  switch (kind) {
    case AngleKind::Elevation: return BiasKind::Elevation;
    case AngleKind::Roll: return BiasKind::Roll;
    case AngleKind::Pitch: return BiasKind::Pitch;
    case AngleKind::Yaw: return BiasKind::Yaw;
  }
  return BiasKind::Elevation;
}

std::string_view to_string(WeightMode mode) { return mode == WeightMode::Identity ? "nls" : "pml"; }

BiasSet::BiasSet(std::size_t sensor_count)
    : range(sensor_count, 0.0),
      elevation(sensor_count, 0.0),
      roll(sensor_count, 0.0),
      pitch(sensor_count, 0.0),
      yaw(sensor_count, 0.0) {}

std::vector<double>& BiasSet::of(BiasKind kind) {
  return const_cast<std::vector<double>&>(static_cast<const BiasSet&>(*this).of(kind));
}

const std::vector<double>& BiasSet::of(BiasKind kind) const {
  switch (kind) {
    case BiasKind::Range: return range;
    case BiasKind::Elevation: return elevation;
    case BiasKind::Roll: return roll;
    case BiasKind::Pitch: return pitch;
    case BiasKind::Yaw: return yaw;
  }
  return range;
}

double BiasSet::max_abs_difference(const BiasSet& other) const {
  if (other.sensor_count() != sensor_count()) throw ContractViolation("BiasSet size mismatch");
  double worst = 0.0;
  for (BiasKind kind : kAllBiasKinds) {
    const auto& a = of(kind);
    const auto& b = other.of(kind);
    for (std::size_t m = 0; m < a.size(); ++m) {
      double d = a[m] - b[m];
      if (kind != BiasKind::Range) d = wrap_angle(d);
      worst = std::max(worst, std::abs(d));
    }
  }
  return worst;
}

BiasSet true_biases(const ScenarioConfig& config) {
  BiasSet b(config.sensors.size());
  for (std::size_t m = 0; m < config.sensors.size(); ++m) {
    const auto& s = config.sensors[m];
    b.range[m] = s.range_bias;
    b.elevation[m] = s.elevation_bias;
    b.roll[m] = s.orientation_bias.roll;
    b.pitch[m] = s.orientation_bias.pitch;
    b.yaw[m] = wrap_angle(s.orientation_bias.yaw + s.azimuth_bias);
  }
  return b;
}

VelocityTrack VelocityTrack::from(const std::vector<Vec3>& velocities) {
  Eigen::VectorXd v(3 * static_cast<Eigen::Index>(velocities.size()));
  for (std::size_t k = 0; k < velocities.size(); ++k) v.segment<3>(3 * static_cast<Eigen::Index>(k)) = velocities[k];
  return VelocityTrack(std::move(v));
}

RegistrationProblem::RegistrationProblem(std::vector<SensorModel> sensors, std::vector<Measurement> measurements,
                                         double q)
    : sensors_(std::move(sensors)), measurements_(std::move(measurements)), q_(q) {
  trig_.reserve(measurements_.size());
  for (std::size_t k = 0; k < measurements_.size(); ++k) {
    const Measurement& m = measurements_[k];
    if (m.sensor < 0 || static_cast<std::size_t>(m.sensor) >= sensors_.size()) {
      throw ContractViolation("measurement " + std::to_string(k) + " has invalid sensor index");
    }
    if (k > 0) {
      const double dt = m.time - measurements_[k - 1].time;
      if (dt < 0.0) throw ContractViolation("measurement time stamps must be nondecreasing");
      intervals_.push_back(dt);
    }
    trig_.push_back({std::cos(m.reading.azimuth), std::sin(m.reading.azimuth), std::cos(m.reading.elevation),
                     std::sin(m.reading.elevation)});
  }
}

RegistrationProblem make_problem(const std::vector<SensorConfig>& sensors, std::vector<Measurement> measurements,
                                 double q) {
  std::vector<SensorModel> models;
  for (const auto& s : sensors) {
    SensorModel sm;
    sm.position = s.position;
    sm.orientation = s.orientation;
    sm.noise = s.noise;
    sm.lam_az = compensation_factor(s.noise.azimuth);
    sm.lam_el = compensation_factor(s.noise.elevation);
    models.push_back(sm);
  }
  return RegistrationProblem(std::move(models), std::move(measurements), q);
}

RegistrationProblem make_problem(const Scenario& scenario) {
  return make_problem(scenario.config.sensors, scenario.measurements, scenario.config.target.q);
}

// ---------------------------------------------------------------------------
// per-sensor frames

namespace {

// Rotation factors of one sensor at the current bias estimate.
struct SensorFrame {
  Mat3 full;        // R(orientation + bias)
  Mat3 roll_inner;  // Rx(a) Ry(b + db) Rz(g + dg)
  Mat3 pitch_outer; // Rx(a + da)
  Mat3 pitch_inner; // Ry(b) Rz(g + dg)
  Mat3 yaw_outer;   // Rx(a + da) Ry(b + db)
  Mat3 yaw_inner;   // Rz(g)
  double cos_del;   // cos / sin of the elevation bias
  double sin_del;
};

std::vector<SensorFrame> sensor_frames(const RegistrationProblem& problem, const BiasSet& biases) {
  if (biases.sensor_count() != problem.sensor_count()) {
    throw ContractViolation("bias set does not match sensor count");
  }
  std::vector<SensorFrame> frames(problem.sensor_count());
  for (std::size_t m = 0; m < frames.size(); ++m) {
    const EulerAngles& o = problem.sensors()[m].orientation;
    const Mat3 rx = rot_x(o.roll), ry = rot_y(o.pitch), rz = rot_z(o.yaw);
    const Mat3 rxb = rot_x(o.roll + biases.roll[m]);
    const Mat3 ryb = rot_y(o.pitch + biases.pitch[m]);
    const Mat3 rzb = rot_z(o.yaw + biases.yaw[m]);
    SensorFrame& f = frames[m];
    f.yaw_outer = rxb * ryb;
    f.full = f.yaw_outer * rzb;
    f.roll_inner = rx * ryb * rzb;
    f.pitch_outer = rxb;
    f.pitch_inner = ry * rzb;
    f.yaw_inner = rz;
    f.cos_del = std::cos(biases.elevation[m]);
    f.sin_del = std::sin(biases.elevation[m]);
  }
  return frames;
}

// Local Cartesian vector of measurement k for a debiased range `range`:
// h^-1(range, azimuth, elevation + elevation bias).
Vec3 local_point(const RegistrationProblem& problem, std::size_t k, const SensorFrame& f, double range) {
  const auto& t = problem.trig()[k];
  const SensorModel& s = problem.sensors()[static_cast<std::size_t>(problem.measurements()[k].sensor)];
  const double ce = t.cos_el * f.cos_del - t.sin_el * f.sin_del;
  const double se = t.sin_el * f.cos_del + t.cos_el * f.sin_del;
  const double horiz = range * ce / (s.lam_az * s.lam_el);
  return {horiz * t.cos_az, horiz * t.sin_az, range * se / s.lam_el};
}

double debiased_range(const Measurement& meas, const BiasSet& biases) {
  const double r = meas.reading.range + biases.range[static_cast<std::size_t>(meas.sensor)];
  if (!(r > 0.0)) {
    throw DomainError("instance " + std::to_string(meas.instance) + ": debiased range is not positive");
  }
  return r;
}

SphericalReading debiased(const Measurement& meas, const BiasSet& biases) {
  SphericalReading r = meas.reading;
  r.range = debiased_range(meas, biases);
  r.elevation += biases.elevation[static_cast<std::size_t>(meas.sensor)];
  return r;
}

void require_pairs(const RegistrationProblem& problem, const BiasSet& biases) {
  if (problem.instance_count() < 2) throw ContractViolation("at least two instances are required");
  if (biases.sensor_count() != problem.sensor_count()) {
    throw ContractViolation("bias set does not match sensor count");
  }
}

void require_velocity(const RegistrationProblem& problem, const VelocityTrack& vel) {
  if (vel.stacked.size() != 3 * static_cast<Eigen::Index>(problem.instance_count())) {
    throw ContractViolation("velocity track length does not match instance count");
  }
}

void require_weights(const RegistrationProblem& problem, const WeightSpec& w) {
  if (w.blocks.size() + 1 != problem.instance_count()) {
    throw ContractViolation("weight block count does not match instance count");
  }
}

std::vector<Vec3> all_g(const RegistrationProblem& problem, const BiasSet& biases) {
  const auto frames = sensor_frames(problem, biases);
  std::vector<Vec3> g;
  g.reserve(problem.instance_count());
  for (std::size_t k = 0; k < problem.instance_count(); ++k) {
    const Measurement& meas = problem.measurements()[k];
    const auto m = static_cast<std::size_t>(meas.sensor);
    g.push_back(frames[m].full * local_point(problem, k, frames[m], debiased_range(meas, biases)) +
                problem.sensors()[m].position);
  }
  return g;
}

// [p_{s_{k+1}} - p_{s_k} - T_k v_k; v_{k+1} - v_k]
Vec6 motion_offset(const RegistrationProblem& problem, const VelocityTrack& vel, std::size_t k) {
  const auto& a = problem.measurements()[k];
  const auto& b = problem.measurements()[k + 1];
  Vec6 v;
  v.head<3>() = problem.sensors()[static_cast<std::size_t>(b.sensor)].position -
                problem.sensors()[static_cast<std::size_t>(a.sensor)].position - problem.intervals()[k] * vel.at(k);
  v.tail<3>() = vel.at(k + 1) - vel.at(k);
  return v;
}

template <int Cols>
Eigen::Matrix<double, 6, Cols> pad(const Eigen::Matrix<double, 3, Cols>& top) {
  Eigen::Matrix<double, 6, Cols> b;
  b.template topRows<3>() = top;
  b.template bottomRows<3>().setZero();
  return b;
}

}  // namespace

// ---------------------------------------------------------------------------
// weights

double WeightSpec::quadratic(const Eigen::VectorXd& residual) const {
  if (residual.size() != 6 * static_cast<Eigen::Index>(blocks.size())) {
    throw ContractViolation("WeightSpec::quadratic: residual length does not match weight blocks");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const Vec6 r = residual.segment<6>(6 * static_cast<Eigen::Index>(k));
    sum += r.dot(blocks[k] * r);
  }
  return sum;
}

Eigen::MatrixXd WeightSpec::stacked() const {
  const Eigen::Index n = 6 * static_cast<Eigen::Index>(blocks.size());
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    q.block<6, 6>(6 * static_cast<Eigen::Index>(k), 6 * static_cast<Eigen::Index>(k)) = blocks[k];
  }
  return q;
}

WeightSpec build_weights(const RegistrationProblem& problem, const BiasSet& biases, WeightMode mode) {
  WeightSpec w;
  w.mode = mode;
  const std::size_t K = problem.instance_count();
  if (K < 2) return w;
  w.blocks.assign(K - 1, Mat6::Identity());
  if (mode == WeightMode::Identity) return w;

  const auto frames = sensor_frames(problem, biases);
  std::vector<Mat3> cov(K);
  for (std::size_t k = 0; k < K; ++k) {
    const Measurement& meas = problem.measurements()[k];
    const auto m = static_cast<std::size_t>(meas.sensor);
    const SensorModel& s = problem.sensors()[m];
    cov[k] = converted_covariance(debiased(meas, biases), s.noise, frames[m].full, s.lam_az, s.lam_el);
  }
  const auto& T = problem.intervals();
  const double q = problem.q();
  for (std::size_t k = 0; k + 1 < K; ++k) {
    const double t = T[k];
    const Mat3 eye = Mat3::Identity();
    Mat6 c;
    c.topLeftCorner<3, 3>() = cov[k + 1] + cov[k] + (q * t * t * t / 3.0) * eye;
    c.topRightCorner<3, 3>() = (q * t * t / 2.0) * eye;
    c.bottomLeftCorner<3, 3>() = (q * t * t / 2.0) * eye;
    c.bottomRightCorner<3, 3>() = (q * t) * eye;

    Eigen::LLT<Mat6> llt(c);
    bool singular = llt.info() != Eigen::Success;
    if (!singular) {
      const Vec6 d = llt.matrixLLT().diagonal();
      singular = d.minCoeff() <= 1e-12 * d.maxCoeff();
    }
    if (singular) {
      c += 1e-9 * Mat6::Identity();
      llt.compute(c);
      w.warnings.push_back("weight block " + std::to_string(k) + " is singular (interval " + std::to_string(t) +
                           " s); regularized with 1e-9 I");
    }
    const Mat6 inv = llt.solve(Mat6::Identity());
    w.blocks[k] = 0.5 * (inv + inv.transpose());
  }
  return w;
}

// ---------------------------------------------------------------------------
// block-sparse coefficient matrix

BlockSparseMatrix::BlockSparseMatrix(Eigen::Index row_blocks, Eigen::Index cols)
    : row_blocks_(static_cast<std::size_t>(row_blocks)), cols_(cols) {}

void BlockSparseMatrix::add(Eigen::Index row_block, Eigen::Index col,
                            const Eigen::Ref<const Eigen::Matrix<double, 6, Eigen::Dynamic>>& block) {
  if (row_block < 0 || row_block >= row_block_count() || col < 0 || col + block.cols() > cols_) {
    throw ContractViolation("BlockSparseMatrix::add: block out of range");
  }
  RowBlock& rb = row_blocks_[static_cast<std::size_t>(row_block)];
  for (Eigen::Index j = 0; j < block.cols(); ++j) {
    int slot = 0;
    while (slot < rb.width && rb.cols[static_cast<std::size_t>(slot)] != col + j) ++slot;
    if (slot == rb.width) {
      if (rb.width == kMaxColumns) throw ContractViolation("BlockSparseMatrix::add: row block is full");
      rb.cols[static_cast<std::size_t>(slot)] = col + j;
      rb.values.col(slot) = block.col(j);
      ++rb.width;
    } else {
      rb.values.col(slot) += block.col(j);
    }
  }
}

Eigen::VectorXd BlockSparseMatrix::operator*(const Eigen::VectorXd& x) const {
  if (x.size() != cols_) throw ContractViolation("BlockSparseMatrix: dimension mismatch");
  Eigen::VectorXd y = Eigen::VectorXd::Zero(rows());
  for (Eigen::Index k = 0; k < row_block_count(); ++k) {
    const RowBlock& rb = row_block(k);
    for (int j = 0; j < rb.width; ++j) y.segment<6>(6 * k) += rb.values.col(j) * x[rb.cols[static_cast<std::size_t>(j)]];
  }
  return y;
}

Eigen::VectorXd BlockSparseMatrix::weighted_transpose_times(std::span<const Mat6> q, const Eigen::VectorXd& r) const {
  if (r.size() != rows() || q.size() != row_blocks_.size()) {
    throw ContractViolation("BlockSparseMatrix: dimension mismatch");
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(cols_);
  for (Eigen::Index k = 0; k < row_block_count(); ++k) {
    const RowBlock& rb = row_block(k);
    const Vec6 qr = q[static_cast<std::size_t>(k)] * r.segment<6>(6 * k);
    for (int j = 0; j < rb.width; ++j) out[rb.cols[static_cast<std::size_t>(j)]] += rb.values.col(j).dot(qr);
  }
  return out;
}

namespace {

// Adds B^T Q B of one row block to `n`.
template <int W>
void add_gram(Eigen::MatrixXd& n, const BlockSparseMatrix::RowBlock& rb, const Mat6& q) {
  const Eigen::Matrix<double, 6, W> b = rb.values.leftCols<W>();
  const Eigen::Matrix<double, 6, W> qb = q * b;
  const Eigen::Matrix<double, W, W> g = b.transpose() * qb;
  for (int j = 0; j < W; ++j) {
    double* dst = n.data() + rb.cols[static_cast<std::size_t>(j)] * n.rows();
    for (int i = 0; i < W; ++i) dst[rb.cols[static_cast<std::size_t>(i)]] += g(i, j);
  }
}

}  // namespace

Eigen::MatrixXd BlockSparseMatrix::normal_matrix(std::span<const Mat6> q) const {
  if (q.size() != row_blocks_.size()) throw ContractViolation("BlockSparseMatrix: weight count mismatch");
  Eigen::MatrixXd n = Eigen::MatrixXd::Zero(cols_, cols_);
  for (Eigen::Index k = 0; k < row_block_count(); ++k) {
    const RowBlock& rb = row_block(k);
    const Mat6& qk = q[static_cast<std::size_t>(k)];
    switch (rb.width) {
      case 0: break;
      case 1: add_gram<1>(n, rb, qk); break;
      case 2: add_gram<2>(n, rb, qk); break;
      case 3: add_gram<3>(n, rb, qk); break;
      case 4: add_gram<4>(n, rb, qk); break;
      case 5: add_gram<5>(n, rb, qk); break;
      default: add_gram<6>(n, rb, qk); break;
    }
  }
  return 0.5 * (n + n.transpose());
}

Eigen::MatrixXd BlockSparseMatrix::to_dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(rows(), cols_);
  for (Eigen::Index k = 0; k < row_block_count(); ++k) {
    const RowBlock& rb = row_block(k);
    for (int j = 0; j < rb.width; ++j) d.block<6, 1>(6 * k, rb.cols[static_cast<std::size_t>(j)]) += rb.values.col(j);
  }
  return d;
}

double Subproblem::objective(const Eigen::VectorXd& x) const {
  if (x.size() != H.cols() || c.size() != H.rows() || weights.size() != static_cast<std::size_t>(H.row_block_count())) {
    throw ContractViolation("Subproblem::objective: dimension mismatch");
  }
  double sum = 0.0;
  for (Eigen::Index k = 0; k < H.row_block_count(); ++k) {
    const auto& rb = H.row_block(k);
    Vec6 r = c.segment<6>(6 * k);
    for (int j = 0; j < rb.width; ++j) r += rb.values.col(j) * x[rb.cols[static_cast<std::size_t>(j)]];
    sum += r.dot(weights[static_cast<std::size_t>(k)] * r);
  }
  return sum;
}

// ---------------------------------------------------------------------------
// model evaluation

Vec3 g_eval(const Measurement& meas, const SensorModel& sensor, const BiasSet& biases, double lam_az,
            double lam_el) {
  const auto m = static_cast<std::size_t>(meas.sensor);
  if (m >= biases.sensor_count()) throw ContractViolation("g_eval: sensor index outside bias set");
  return rotation_matrix(sensor.orientation + biases.orientation(m)) *
             sphere_to_cart(debiased(meas, biases), lam_az, lam_el) +
         sensor.position;
}

Eigen::VectorXd residuals(const RegistrationProblem& problem, const BiasSet& biases, const VelocityTrack& vel) {
  const std::size_t K = problem.instance_count();
  if (K < 2) return Eigen::VectorXd(0);
  require_pairs(problem, biases);
  require_velocity(problem, vel);
  const auto g = all_g(problem, biases);
  const auto& T = problem.intervals();
  Eigen::VectorXd r(6 * static_cast<Eigen::Index>(K - 1));
  for (std::size_t k = 0; k + 1 < K; ++k) {
    const auto row = 6 * static_cast<Eigen::Index>(k);
    r.segment<3>(row) = g[k + 1] - g[k] - T[k] * vel.at(k);
    r.segment<3>(row + 3) = vel.at(k + 1) - vel.at(k);
  }
  return r;
}

double objective(const RegistrationProblem& problem, const BiasSet& biases, const VelocityTrack& vel,
                 const WeightSpec& weights) {
  if (problem.instance_count() < 2) throw ContractViolation("objective needs at least two instances");
  require_weights(problem, weights);
  return weights.quadratic(residuals(problem, biases, vel));
}

Eigen::VectorXd angle_pairs(const std::vector<double>& angles) {
  Eigen::VectorXd x(2 * static_cast<Eigen::Index>(angles.size()));
  for (std::size_t m = 0; m < angles.size(); ++m) {
    x[2 * static_cast<Eigen::Index>(m)] = std::cos(angles[m]);
    x[2 * static_cast<Eigen::Index>(m) + 1] = std::sin(angles[m]);
  }
  return x;
}

// ---------------------------------------------------------------------------
// subproblem assembly

Subproblem assemble_velocity(const RegistrationProblem& problem, const BiasSet& biases, const WeightSpec& w) {
  require_pairs(problem, biases);
  require_weights(problem, w);
  const std::size_t K = problem.instance_count();
  const auto g = all_g(problem, biases);
  const auto& T = problem.intervals();

  Subproblem sub;
  sub.block = "velocity";
  sub.H = BlockSparseMatrix(static_cast<Eigen::Index>(K - 1), 3 * static_cast<Eigen::Index>(K));
  sub.c.resize(6 * static_cast<Eigen::Index>(K - 1));
  sub.weights = w.blocks;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    Mat6 hk = Mat6::Zero();
    hk.topLeftCorner<3, 3>() = -T[k] * Mat3::Identity();
    hk.bottomLeftCorner<3, 3>() = -Mat3::Identity();
    hk.bottomRightCorner<3, 3>() = Mat3::Identity();
    const auto ki = static_cast<Eigen::Index>(k);
    sub.H.add(ki, 3 * ki, hk);
    sub.c.segment<3>(6 * ki) = g[k + 1] - g[k];
    sub.c.segment<3>(6 * ki + 3).setZero();
  }
  return sub;
}

Subproblem assemble_range(const RegistrationProblem& problem, const BiasSet& biases, const VelocityTrack& vel,
                          const WeightSpec& w) {
  require_pairs(problem, biases);
  require_velocity(problem, vel);
  require_weights(problem, w);
  const std::size_t K = problem.instance_count();
  const auto frames = sensor_frames(problem, biases);

  // g_k - p = h_k * range_bias + range_k * h_k
  std::vector<Vec3> h(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto m = static_cast<std::size_t>(problem.measurements()[k].sensor);
    h[k] = frames[m].full * local_point(problem, k, frames[m], 1.0);
  }

  Subproblem sub;
  sub.block = "range";
  sub.H = BlockSparseMatrix(static_cast<Eigen::Index>(K - 1), static_cast<Eigen::Index>(problem.sensor_count()));
  sub.c.resize(6 * static_cast<Eigen::Index>(K - 1));
  sub.weights = w.blocks;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    const Measurement& a = problem.measurements()[k];
    const Measurement& b = problem.measurements()[k + 1];
    sub.H.add(ki, b.sensor, pad<1>(h[k + 1]));
    sub.H.add(ki, a.sensor, pad<1>(-h[k]));
    Vec6 ck = motion_offset(problem, vel, k);
    ck.head<3>() += b.reading.range * h[k + 1] - a.reading.range * h[k];
    sub.c.segment<6>(6 * ki) = ck;
  }
  return sub;
}

namespace {

// g_k - p = hc cos(d) + hs sin(d) + fixed, for the angle bias d of one kind. `fixed` is the
// component along the rotation axis, which the bias does not move.
struct AngleTerms {
  Vec3 hc;
  Vec3 hs;
  Vec3 fixed;
};

AngleTerms angle_terms(AngleKind kind, const RegistrationProblem& problem, std::size_t k, const SensorFrame& f,
                       const BiasSet& biases) {
  const Measurement& meas = problem.measurements()[k];
  const double r = debiased_range(meas, biases);
  AngleTerms t;
  switch (kind) {
    case AngleKind::Elevation: {
      const auto& tr = problem.trig()[k];
      const SensorModel& s = problem.sensors()[static_cast<std::size_t>(meas.sensor)];
      const double kh = r / (s.lam_az * s.lam_el);
      const double kv = r / s.lam_el;
      t.hc = f.full * Vec3(kh * tr.cos_az * tr.cos_el, kh * tr.sin_az * tr.cos_el, kv * tr.sin_el);
      t.hs = f.full * Vec3(-kh * tr.cos_az * tr.sin_el, -kh * tr.sin_az * tr.sin_el, kv * tr.cos_el);
      t.fixed.setZero();
      break;
    }
    case AngleKind::Roll: {
      const Vec3 w = f.roll_inner * local_point(problem, k, f, r);
      t.hc = Vec3(0.0, w.y(), w.z());
      t.hs = Vec3(0.0, -w.z(), w.y());
      t.fixed = Vec3(w.x(), 0.0, 0.0);
      break;
    }
    case AngleKind::Pitch: {
      const Vec3 w = f.pitch_inner * local_point(problem, k, f, r);
      t.hc = f.pitch_outer * Vec3(w.x(), 0.0, w.z());
      t.hs = f.pitch_outer * Vec3(w.z(), 0.0, -w.x());
      t.fixed = f.pitch_outer * Vec3(0.0, w.y(), 0.0);
      break;
    }
    case AngleKind::Yaw: {
      const Vec3 w = f.yaw_inner * local_point(problem, k, f, r);
      t.hc = f.yaw_outer * Vec3(w.x(), w.y(), 0.0);
      t.hs = f.yaw_outer * Vec3(-w.y(), w.x(), 0.0);
      t.fixed = f.yaw_outer * Vec3(0.0, 0.0, w.z());
      break;
    }
  }
  return t;
}

}  // namespace

Subproblem assemble_angle(AngleKind kind, const RegistrationProblem& problem, const BiasSet& biases,
                          const VelocityTrack& vel, const WeightSpec& w) {
  require_pairs(problem, biases);
  require_velocity(problem, vel);
  require_weights(problem, w);
  const std::size_t K = problem.instance_count();
  const auto frames = sensor_frames(problem, biases);

  std::vector<AngleTerms> terms;
  terms.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto m = static_cast<std::size_t>(problem.measurements()[k].sensor);
    terms.push_back(angle_terms(kind, problem, k, frames[m], biases));
  }

  Subproblem sub;
  sub.block = std::string(to_string(kind));
  sub.H = BlockSparseMatrix(static_cast<Eigen::Index>(K - 1), 2 * static_cast<Eigen::Index>(problem.sensor_count()));
  sub.c.resize(6 * static_cast<Eigen::Index>(K - 1));
  sub.weights = w.blocks;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    Eigen::Matrix<double, 3, 2> next, prev;
    next << terms[k + 1].hc, terms[k + 1].hs;
    prev << terms[k].hc, terms[k].hs;
    sub.H.add(ki, 2 * problem.measurements()[k + 1].sensor, pad<2>(next));
    sub.H.add(ki, 2 * problem.measurements()[k].sensor, pad<2>(-prev));
    Vec6 ck = motion_offset(problem, vel, k);
    ck.head<3>() += terms[k + 1].fixed - terms[k].fixed;
    sub.c.segment<6>(6 * ki) = ck;
  }
  return sub;
}

}  // namespace senreg
