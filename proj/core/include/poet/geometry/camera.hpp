#pragma once

#include <Eigen/Dense>

namespace poet::geom {

// Pinhole camera. Camera frame: x right, y down, z forward (optical axis).
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const;
};

struct Pixel {
  double u;
  double v;
};

// Throws ErrorKind::BehindCamera when point_cam.z <= 0.
Pixel project(const CameraIntrinsics& intr, const Eigen::Vector3d& point_cam);

// Inverse of project at a known depth z > 0.
Eigen::Vector3d unproject(const CameraIntrinsics& intr, const Pixel& px, double z);

}  // namespace poet::geom
