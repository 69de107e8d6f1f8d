#pragma once

#include <Eigen/Dense>

#include "poet/geometry/rotation.hpp"

namespace poet::geom {

// Rigid transform: x_out = R * x_in + t. Used both for object-in-camera and
// camera-in-world poses; translations are in meters.
struct Pose {
  Rotation rotation;
  Eigen::Vector3d translation{0.0, 0.0, 0.0};

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }

  Pose inverse() const {
    Rotation rt = rotation.transposed();
    return {rt, -(rt * translation)};
  }

  // Composition: (*this) after rhs, i.e. apply(rhs.apply(x)).
  Pose operator*(const Pose& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
};

// Camera pose in the world frame from one landmark with known world pose and
// an estimated camera-frame pose of that landmark:
//   R_wc = R_wo * R_co^T,  t_wc = t_wo - R_wo * R_co^T * t_co.
Pose camera_pose_from_landmark(const Pose& world_object, const Pose& relative_estimate);

}  // namespace poet::geom
