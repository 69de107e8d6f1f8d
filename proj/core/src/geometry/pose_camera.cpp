#include <cmath>

#include "poet/error.hpp"
#include "poet/geometry/camera.hpp"
#include "poet/geometry/pose.hpp"

namespace poet::geom {

Pose camera_pose_from_landmark(const Pose& world_object, const Pose& relative_estimate) {
  Rotation r_wc = world_object.rotation * relative_estimate.rotation.transposed();
  Eigen::Vector3d t_wc =
      world_object.translation - r_wc * relative_estimate.translation;
  return {r_wc, t_wc};
}

void CameraIntrinsics::validate() const {
  if (fx <= 0.0 || fy <= 0.0) {
    raise(ErrorKind::Input, "intrinsics: focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    raise(ErrorKind::Input, "intrinsics: image size must be positive");
  }
  if (cx < 0.0 || cx > width || cy < 0.0 || cy > height) {
    raise(ErrorKind::Input, "intrinsics: principal point outside image");
  }
}

Pixel project(const CameraIntrinsics& intr, const Eigen::Vector3d& point_cam) {
  if (!(point_cam.z() > 0.0)) {
    raise(ErrorKind::BehindCamera,
          "project: point at z = " + std::to_string(point_cam.z()) + " is behind the camera");
  }
  return {intr.fx * point_cam.x() / point_cam.z() + intr.cx,
          intr.fy * point_cam.y() / point_cam.z() + intr.cy};
}

Eigen::Vector3d unproject(const CameraIntrinsics& intr, const Pixel& px, double z) {
  if (!(z > 0.0)) {
    raise(ErrorKind::Input, "unproject: depth must be positive");
  }
  return {(px.u - intr.cx) / intr.fx * z, (px.v - intr.cy) / intr.fy * z, z};
}

}  // namespace poet::geom
