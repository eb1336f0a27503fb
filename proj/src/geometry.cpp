#include "senreg/geometry.hpp"

#include <cmath>
#include <string>

#include "senreg/errors.hpp"

namespace senreg {

double wrap_angle(double rad) {
  if (!std::isfinite(rad)) throw DomainError("angle is not finite");
  return std::remainder(rad, 2.0 * kPi);
}

EulerAngles::EulerAngles(double roll_rad, double pitch_rad, double yaw_rad)
    : roll(wrap_angle(roll_rad)), pitch(wrap_angle(pitch_rad)), yaw(wrap_angle(yaw_rad)) {}

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 1, 0, 0,
       0, c, -s,
       0, s, c;
  return r;
}

Mat3 rot_y(double b) {
  const double c = std::cos(b), s = std::sin(b);
  Mat3 r;
  r << c, 0, s,
       0, 1, 0,
       -s, 0, c;
  return r;
}

Mat3 rot_z(double g) {
  const double c = std::cos(g), s = std::sin(g);
  Mat3 r;
  r << c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return r;
}

Mat3 rotation_matrix(const EulerAngles& angles) {
  return rot_x(angles.roll) * rot_y(angles.pitch) * rot_z(angles.yaw);
}

SphericalReading cart_to_sphere(const Vec3& v) {
  const double range = v.norm();
  if (!(range > 0.0)) throw DomainError("cart_to_sphere: zero vector has no direction");
  const double planar = std::hypot(v.x(), v.y());
  SphericalReading out;
  out.range = range;
  out.azimuth = planar > 0.0 ? std::atan2(v.y(), v.x()) : 0.0;
  out.elevation = std::atan2(v.z(), planar);
  return out;
}

Vec3 sphere_to_cart(const SphericalReading& reading, double lam_az, double lam_el) {
  if (!(lam_az > 0.0 && lam_az <= 1.0) || !(lam_el > 0.0 && lam_el <= 1.0)) {
    throw DomainError("sphere_to_cart: compensation factors must lie in (0, 1]");
  }
  const double horiz = reading.range * std::cos(reading.elevation) / (lam_az * lam_el);
  return {horiz * std::cos(reading.azimuth), horiz * std::sin(reading.azimuth),
          reading.range * std::sin(reading.elevation) / lam_el};
}

double compensation_factor(double sigma) { return std::exp(-0.5 * sigma * sigma); }

Eigen::VectorXd project_circles(const Eigen::VectorXd& x) {
  if (x.size() % 2 != 0) throw ContractViolation("project_circles: odd-length vector");
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); i += 2) {
    const double n = std::hypot(x[i], x[i + 1]);
    if (!(n > 0.0)) {
      throw DegenerateProjectionError("project_circles: pair " + std::to_string(i / 2) + " has zero norm");
    }
    out[i] = x[i] / n;
    out[i + 1] = x[i + 1] / n;
  }
  return out;
}

Mat3 converted_covariance(const SphericalReading& reading, const NoiseSigmas& sigmas, const Mat3& rot,
                          double lam_az, double lam_el) {
  const double ca = std::cos(reading.azimuth), sa = std::sin(reading.azimuth);
  const double ce = std::cos(reading.elevation), se = std::sin(reading.elevation);
  const double r = reading.range;
  const double k = 1.0 / (lam_az * lam_el);
  const double ke = 1.0 / lam_el;

  // columns: d/d range, d/d azimuth, d/d elevation
  Mat3 local;
  local << k * ca * ce, -k * r * sa * ce, -k * r * ca * se,
           k * sa * ce,  k * r * ca * ce, -k * r * sa * se,
           ke * se,      0.0,              ke * r * ce;
  const Mat3 jac = rot * local;
  const Vec3 var(sigmas.range * sigmas.range, sigmas.azimuth * sigmas.azimuth,
                 sigmas.elevation * sigmas.elevation);
  Mat3 cov = jac * var.asDiagonal() * jac.transpose();
  return 0.5 * (cov + cov.transpose());
}

}  // namespace senreg
