#include "poet/geometry/rotation.hpp"

#include <cmath>

#include "poet/error.hpp"

namespace poet::geom {

Rotation Rotation::from_matrix(const Eigen::Matrix3d& m) {
  double ortho = (m.transpose() * m - Eigen::Matrix3d::Identity()).norm();
  if (ortho >= kOrthonormalTol || m.determinant() <= 0.0) {
    raise(ErrorKind::Input,
          "matrix is not a rotation (orthonormality residual " + std::to_string(ortho) +
              ", det " + std::to_string(m.determinant()) + ")");
  }
  return Rotation(m);
}

Rotation Rotation::project(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  Eigen::Vector3d s(1.0, 1.0, (u * v.transpose()).determinant());
  return Rotation(u * s.asDiagonal() * v.transpose());
}

Rotation Rotation::axis_angle(const Eigen::Vector3d& axis, double angle) {
  double n = axis.norm();
  if (n == 0.0) {
    raise(ErrorKind::Input, "axis_angle: zero axis");
  }
  return Rotation(Eigen::AngleAxisd(angle, axis / n).toRotationMatrix());
}

Rotation Rotation::transposed() const { return Rotation(Eigen::Matrix3d(m_.transpose())); }

Rotation Rotation::operator*(const Rotation& rhs) const {
  return Rotation(Eigen::Matrix3d(m_ * rhs.m_));
}

SixDRotation SixDRotation::from_rotation(const Rotation& r) {
  SixDRotation s;
  const Eigen::Matrix3d& m = r.matrix();
  for (int i = 0; i < 3; ++i) {
    s.v[i] = m(i, 0);
    s.v[3 + i] = m(i, 1);
  }
  return s;
}

Rotation decode_6d(const SixDRotation& r) {
  Eigen::Vector3d a1 = r.a1();
  Eigen::Vector3d a2 = r.a2();
  double n1 = a1.norm();
  if (n1 < 1e-9) {
    raise(ErrorKind::Degeneracy, "decode_6d: first 3-vector has near-zero norm");
  }
  Eigen::Vector3d b1 = a1 / n1;
  Eigen::Vector3d res = a2 - a2.dot(b1) * b1;
  double n2 = res.norm();
  if (n2 < 1e-9) {
    raise(ErrorKind::Degeneracy, "decode_6d: vectors are (near-)parallel");
  }
  Eigen::Vector3d b2 = res / n2;
  Eigen::Vector3d b3 = b1.cross(b2);
  Eigen::Matrix3d m;
  m.col(0) = b1;
  m.col(1) = b2;
  m.col(2) = b3;
  return Rotation::from_matrix(m);
}

double geodesic_distance(const Rotation& a, const Rotation& b) {
  double tr = (a.matrix() * b.matrix().transpose()).trace();
  double arg = std::clamp(0.5 * (tr - 1.0), -1.0 + kGeodesicEps, 1.0 - kGeodesicEps);
  return std::acos(arg);
}

double rotation_angle(const Rotation& a, const Rotation& b) {
  Eigen::Quaterniond q(a.matrix() * b.matrix().transpose());
  double s = Eigen::Vector3d(q.x(), q.y(), q.z()).norm();
  return 2.0 * std::atan2(s, std::abs(q.w()));
}

Rotation rotation_mean(std::span<const Rotation> rs) {
  if (rs.empty()) {
    raise(ErrorKind::Input, "rotation_mean: empty rotation list");
  }
  Eigen::Matrix3d acc = Eigen::Matrix3d::Zero();
  for (const Rotation& r : rs) acc += r.matrix();
  acc /= static_cast<double>(rs.size());
  return Rotation::project(acc);
}

TwistSwing decompose_error_about_axis(const Rotation& error,
                                      const Eigen::Vector3d& axis) {
  double an = axis.norm();
  if (an == 0.0) {
    raise(ErrorKind::Input, "decompose_error_about_axis: zero axis");
  }
  Eigen::Vector3d a = axis / an;
  Eigen::Quaterniond q = error.quaternion();
  Eigen::Vector3d v(q.x(), q.y(), q.z());
  double k = v.dot(a);
  double tn = std::sqrt(q.w() * q.w() + k * k);
  TwistSwing out;
  if (tn < 1e-12) {
    // 180-degree rotation perpendicular to the axis: twist is the identity.
    out.twist = Rotation::identity();
  } else {
    Eigen::Quaterniond tq(q.w() / tn, k * a.x() / tn, k * a.y() / tn, k * a.z() / tn);
    out.twist = Rotation::from_matrix(tq.toRotationMatrix());
  }
  Eigen::Quaterniond sq = q * out.twist.quaternion().conjugate();
  out.swing = Rotation::project(sq.toRotationMatrix());

  // Signed twist angle about the axis, wrapped to (-pi, pi].
  double angle = 2.0 * std::atan2(k, q.w());
  if (angle > M_PI) angle -= 2.0 * M_PI;
  if (angle <= -M_PI) angle += 2.0 * M_PI;
  out.about_axis = angle;

  Eigen::Quaterniond swq = out.swing.quaternion();
  double ss = Eigen::Vector3d(swq.x(), swq.y(), swq.z()).norm();
  out.residual = 2.0 * std::atan2(ss, std::abs(swq.w()));
  return out;
}

EulerZyx euler_zyx(const Rotation& r) {
  const Eigen::Matrix3d& m = r.matrix();
  EulerZyx e;
  e.pitch = std::asin(std::clamp(-m(2, 0), -1.0, 1.0));
  if (std::abs(m(2, 0)) < 1.0 - 1e-12) {
    e.yaw = std::atan2(m(1, 0), m(0, 0));
    e.roll = std::atan2(m(2, 1), m(2, 2));
  } else {
    // Gimbal lock: fold the unobservable sum into yaw.
    e.yaw = std::atan2(-m(0, 1), m(1, 1));
    e.roll = 0.0;
  }
  return e;
}

Rotation random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  while (q.norm() < 1e-6) {
    q = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng));
  }
  q.normalize();
  return Rotation::from_matrix(q.toRotationMatrix());
}

}  // namespace poet::geom
