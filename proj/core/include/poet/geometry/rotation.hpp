#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace poet::geom {

inline constexpr double kGeodesicEps = 1e-6;
inline constexpr double kOrthonormalTol = 1e-9;

// Proper rotation (member of SO(3)). Construction validates orthonormality
// and positive determinant; use project() to renormalize a noisy matrix.
class Rotation {
 public:
  Rotation() : m_(Eigen::Matrix3d::Identity()) {}

  static Rotation identity() { return Rotation(); }
  // Throws ErrorKind::Input if m is farther than kOrthonormalTol from SO(3).
  static Rotation from_matrix(const Eigen::Matrix3d& m);
  // Orthogonal polar projection with determinant correction; valid for any
  // matrix with non-degenerate singular values.
  static Rotation project(const Eigen::Matrix3d& m);
  static Rotation axis_angle(const Eigen::Vector3d& axis, double angle);

  const Eigen::Matrix3d& matrix() const { return m_; }
  Rotation transposed() const;
  Rotation operator*(const Rotation& rhs) const;
  Eigen::Vector3d operator*(const Eigen::Vector3d& v) const { return m_ * v; }

  Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(m_); }

 private:
  explicit Rotation(const Eigen::Matrix3d& m) : m_(m) {}
  Eigen::Matrix3d m_;
};

// Two unconstrained 3-vectors; decodes to SO(3) by Gram-Schmidt.
struct SixDRotation {
  std::array<double, 6> v{};

  Eigen::Vector3d a1() const { return {v[0], v[1], v[2]}; }
  Eigen::Vector3d a2() const { return {v[3], v[4], v[5]}; }

  static SixDRotation from_rotation(const Rotation& r);
};

// Gram-Schmidt decoding: b1 = a1/|a1|, b2 = normalize(a2 - (a2.b1) b1),
// b3 = b1 x b2, columns (b1, b2, b3). Throws ErrorKind::Degeneracy when
// |a1| or the residual norm falls below 1e-9.
Rotation decode_6d(const SixDRotation& r);

// arccos((Tr(R R~^T) - 1) / 2) with the argument clamped to
// [-1 + kGeodesicEps, 1 - kGeodesicEps], in radians.
double geodesic_distance(const Rotation& a, const Rotation& b);

// Exact relative angle without the epsilon clamp; used where a true zero
// matters (symmetry-aware error decomposition).
double rotation_angle(const Rotation& a, const Rotation& b);

// Chordal mean: arithmetic average of the matrices projected back to SO(3).
Rotation rotation_mean(std::span<const Rotation> rs);

// Twist-swing split of an error rotation about a unit axis. Returns
// (signed twist angle about the axis, swing magnitude); swing * twist
// recomposes the input.
struct TwistSwing {
  double about_axis;
  double residual;
  Rotation twist;
  Rotation swing;
};
TwistSwing decompose_error_about_axis(const Rotation& error,
                                      const Eigen::Vector3d& axis);

// Z-Y-X factorization R = Rz(yaw) * Ry(pitch) * Rx(roll), radians.
struct EulerZyx {
  double yaw;
  double pitch;
  double roll;
};
EulerZyx euler_zyx(const Rotation& r);

// Uniform random rotation (quaternion from a normalized 4-D Gaussian).
Rotation random_rotation(std::mt19937_64& rng);

}  // namespace poet::geom
