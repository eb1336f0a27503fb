#pragma once

#include <Eigen/Core>
#include <numbers>

namespace senreg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle into [-pi, pi].
double wrap_angle(double rad);

/// Roll/pitch/yaw triple, wrapped into [-pi, pi] on construction.
struct EulerAngles {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  EulerAngles() = default;
  EulerAngles(double roll_rad, double pitch_rad, double yaw_rad);

  EulerAngles operator+(const EulerAngles& o) const {
    return {roll + o.roll, pitch + o.pitch, yaw + o.yaw};
  }
};

/// Range / azimuth / elevation observation in a sensor's local frame.
struct SphericalReading {
  double range = 0.0;
  double azimuth = 0.0;
  double elevation = 0.0;
};

/// Standard deviations of the additive measurement noise (range in m, angles in rad).
struct NoiseSigmas {
  double range = 0.0;
  double azimuth = 0.0;
  double elevation = 0.0;
};

Mat3 rot_x(double a);
Mat3 rot_y(double b);
Mat3 rot_z(double g);

/// R(angles) = Rx(roll) * Ry(pitch) * Rz(yaw); maps local coordinates into the global frame.
Mat3 rotation_matrix(const EulerAngles& angles);

/// Cartesian -> (range, atan2(y, x), atan2(z, hypot(x, y))). Azimuth is 0 on the z axis.
/// Throws DomainError for the zero vector.
SphericalReading cart_to_sphere(const Vec3& v);

/// Debiased spherical -> Cartesian conversion with multiplicative compensation factors
/// lam_az = exp(-sigma_az^2 / 2), lam_el = exp(-sigma_el^2 / 2). Both factors must lie in (0, 1].
Vec3 sphere_to_cart(const SphericalReading& reading, double lam_az = 1.0, double lam_el = 1.0);

/// exp(-sigma^2 / 2).
double compensation_factor(double sigma);

/// Rescales every consecutive pair of `x` to unit norm (nearest point on the product of circles).
/// Throws DegenerateProjectionError when a pair is zero.
Eigen::VectorXd project_circles(const Eigen::VectorXd& x);

/// First-order covariance of rot * sphere_to_cart(reading) + p with respect to measurement noise
/// of standard deviations `sigmas`: J diag(sigma^2) J^T.
Mat3 converted_covariance(const SphericalReading& reading, const NoiseSigmas& sigmas, const Mat3& rot,
                          double lam_az = 1.0, double lam_el = 1.0);

}  // namespace senreg
