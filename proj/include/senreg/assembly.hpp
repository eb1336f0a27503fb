#pragma once

#include <Eigen/Core>
#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "senreg/geometry.hpp"
#include "senreg/model.hpp"

namespace senreg {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

enum class BiasKind { Range, Elevation, Roll, Pitch, Yaw };
enum class AngleKind { Elevation, Roll, Pitch, Yaw };

inline constexpr BiasKind kAllBiasKinds[] = {BiasKind::Range, BiasKind::Elevation, BiasKind::Roll,
                                             BiasKind::Pitch, BiasKind::Yaw};
inline constexpr AngleKind kAngleKinds[] = {AngleKind::Elevation, AngleKind::Roll, AngleKind::Pitch,
                                            AngleKind::Yaw};

std::string_view to_string(BiasKind kind);
std::string_view to_string(AngleKind kind);
BiasKind to_bias_kind(AngleKind kind);

/// Estimated biases of all sensors. The azimuth bias is not part of the model (it is absorbed
/// into the yaw bias).
struct BiasSet {
  std::vector<double> range;      ///< m
  std::vector<double> elevation;  ///< rad
  std::vector<double> roll;
  std::vector<double> pitch;
  std::vector<double> yaw;

  BiasSet() = default;
  explicit BiasSet(std::size_t sensor_count);

  std::size_t sensor_count() const { return range.size(); }
  std::vector<double>& of(BiasKind kind);
  const std::vector<double>& of(BiasKind kind) const;
  std::vector<double>& of(AngleKind kind) { return of(to_bias_kind(kind)); }
  const std::vector<double>& of(AngleKind kind) const { return of(to_bias_kind(kind)); }

  EulerAngles orientation(std::size_t m) const { return EulerAngles(roll[m], pitch[m], yaw[m]); }

  /// Largest |a - b| over every entry (mixed m / rad, as used by the sweep stopping rule).
  double max_abs_difference(const BiasSet& other) const;
};

/// Biases the estimator should recover for `config` (azimuth bias folded into yaw).
BiasSet true_biases(const ScenarioConfig& config);

/// Stacked per-instance velocities (xi_dot_1, ..., xi_dot_K).
struct VelocityTrack {
  Eigen::VectorXd stacked;

  VelocityTrack() = default;
  explicit VelocityTrack(Eigen::VectorXd v) : stacked(std::move(v)) {}
  static VelocityTrack from(const std::vector<Vec3>& velocities);

  std::size_t instance_count() const { return static_cast<std::size_t>(stacked.size() / 3); }
  Vec3 at(std::size_t k) const { return stacked.segment<3>(3 * static_cast<Eigen::Index>(k)); }
};

/// What the estimator knows about a sensor.
struct SensorModel {
  Vec3 position = Vec3::Zero();
  EulerAngles orientation;
  NoiseSigmas noise;
  double lam_az = 1.0;  ///< exp(-sigma_az^2 / 2)
  double lam_el = 1.0;  ///< exp(-sigma_el^2 / 2)
};

/// Estimator input: sensor models, time-ordered measurements and the motion noise density.
/// Immutable after construction; per-measurement trigonometry is cached.
class RegistrationProblem {
 public:
  struct ReadingTrig {
    double cos_az, sin_az, cos_el, sin_el;
  };

  RegistrationProblem() = default;
  /// Throws ContractViolation on an invalid sensor index or decreasing time stamps.
  RegistrationProblem(std::vector<SensorModel> sensors, std::vector<Measurement> measurements, double q);

  const std::vector<SensorModel>& sensors() const { return sensors_; }
  const std::vector<Measurement>& measurements() const { return measurements_; }
  double q() const { return q_; }
  std::size_t instance_count() const { return measurements_.size(); }
  std::size_t sensor_count() const { return sensors_.size(); }
  /// T_k = t_{k+1} - t_k.
  const std::vector<double>& intervals() const { return intervals_; }
  const std::vector<ReadingTrig>& trig() const { return trig_; }

 private:
  std::vector<SensorModel> sensors_;
  std::vector<Measurement> measurements_;
  double q_ = 0.0;
  std::vector<double> intervals_;
  std::vector<ReadingTrig> trig_;
};

RegistrationProblem make_problem(const Scenario& scenario);
RegistrationProblem make_problem(const std::vector<SensorConfig>& sensors,
                                 std::vector<Measurement> measurements, double q);

enum class WeightMode { Identity, PseudoML };
std::string_view to_string(WeightMode mode);

/// Block-diagonal weight with one 6x6 block per consecutive instance pair.
struct WeightSpec {
  WeightMode mode = WeightMode::Identity;
  std::vector<Mat6> blocks;
  std::vector<std::string> warnings;

  /// sum_k r_k^T Q_k r_k for a stacked 6(K-1) residual.
  double quadratic(const Eigen::VectorXd& residual) const;
  Eigen::MatrixXd stacked() const;
};

/// 6(K-1) x d matrix. Each 6-row block stores up to kMaxColumns nonzero columns.
class BlockSparseMatrix {
 public:
  static constexpr int kMaxColumns = 6;
  using Values = Eigen::Matrix<double, 6, kMaxColumns>;

  struct RowBlock {
    std::array<Eigen::Index, kMaxColumns> cols;
    Values values;
    int width = 0;

    RowBlock() {}

    std::span<const Eigen::Index> columns() const { return {cols.data(), static_cast<std::size_t>(width)}; }
    auto block() const { return values.leftCols(width); }
  };

  BlockSparseMatrix() = default;
  BlockSparseMatrix(Eigen::Index row_blocks, Eigen::Index cols);

  /// Adds `block` at (6 * row_block, col). Columns already present are accumulated into.
  /// Throws ContractViolation when out of range or when a row block would exceed kMaxColumns.
  void add(Eigen::Index row_block, Eigen::Index col, const Eigen::Ref<const Eigen::Matrix<double, 6, Eigen::Dynamic>>& block);

  Eigen::Index rows() const { return 6 * static_cast<Eigen::Index>(row_blocks_.size()); }
  Eigen::Index cols() const { return cols_; }
  Eigen::Index row_block_count() const { return static_cast<Eigen::Index>(row_blocks_.size()); }
  const RowBlock& row_block(Eigen::Index k) const { return row_blocks_[static_cast<std::size_t>(k)]; }

  Eigen::VectorXd operator*(const Eigen::VectorXd& x) const;
  /// H^T Q r.
  Eigen::VectorXd weighted_transpose_times(std::span<const Mat6> q, const Eigen::VectorXd& r) const;
  /// H^T Q H, accumulated row block by row block.
  Eigen::MatrixXd normal_matrix(std::span<const Mat6> q) const;
  Eigen::MatrixXd to_dense() const;

 private:
  std::vector<RowBlock> row_blocks_;
  Eigen::Index cols_ = 0;
};

/// One BCD block: minimize ||H x + c||_Q^2 over x. `weights` views storage owned elsewhere
/// (normally a WeightSpec) that must outlive the subproblem.
struct Subproblem {
  std::string block;
  BlockSparseMatrix H;
  Eigen::VectorXd c;
  std::span<const Mat6> weights;

  double objective(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd normal_matrix() const { return H.normal_matrix(weights); }
  Eigen::VectorXd normal_rhs() const { return H.weighted_transpose_times(weights, c); }
};

/// Converted global position R(orientation + bias) h^-1(z + dz) + p for one measurement.
/// Throws DomainError when the debiased range is not positive.
Vec3 g_eval(const Measurement& meas, const SensorModel& sensor, const BiasSet& biases, double lam_az,
            double lam_el);
inline Vec3 g_eval(const Measurement& meas, const SensorModel& sensor, const BiasSet& biases) {
  return g_eval(meas, sensor, biases, sensor.lam_az, sensor.lam_el);
}

/// Stacked 6-vectors [g_{k+1} - g_k - T_k v_k; v_{k+1} - v_k], k = 1..K-1.
Eigen::VectorXd residuals(const RegistrationProblem& problem, const BiasSet& biases, const VelocityTrack& vel);

/// Weighted sum of squared residuals.
double objective(const RegistrationProblem& problem, const BiasSet& biases, const VelocityTrack& vel,
                 const WeightSpec& weights);

/// Identity: Q_k = I. PseudoML: Q_k is the inverse of the approximate residual covariance
/// built from converted-measurement covariances at `biases` and the motion noise density.
/// Singular blocks get 1e-9 I added before inversion and a warning.
WeightSpec build_weights(const RegistrationProblem& problem, const BiasSet& biases, WeightMode mode);

/// (cos t_1, sin t_1, ..., cos t_M, sin t_M).
Eigen::VectorXd angle_pairs(const std::vector<double>& angles);

Subproblem assemble_velocity(const RegistrationProblem& problem, const BiasSet& biases, const WeightSpec& w);
Subproblem assemble_range(const RegistrationProblem& problem, const BiasSet& biases, const VelocityTrack& vel,
                          const WeightSpec& w);
/// Residual as a linear function of angle_pairs(biases.of(kind)); all other blocks held fixed.
Subproblem assemble_angle(AngleKind kind, const RegistrationProblem& problem, const BiasSet& biases,
                          const VelocityTrack& vel, const WeightSpec& w);

}  // namespace senreg
