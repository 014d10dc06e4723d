#pragma once

#include <cstddef>

#include <Eigen/Core>

#include "json.hpp"

namespace lunarforge {

// Camera convention: right-handed, the camera looks along its own -z axis,
// image +u is camera +x and image +v is camera -y. Pixel centers sit at
// integer coordinates; the default principal point is the image center.

struct Intrinsics {
  std::size_t width = 0;
  std::size_t height = 0;
  double fov_deg = 0.0;  // horizontal
  double focal_px = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  // Principal point at (width/2 - 0.5, height/2 - 0.5).
  static Intrinsics from_fov(std::size_t width, std::size_t height, double fov_deg);
  static Intrinsics from_fov(std::size_t width, std::size_t height, double fov_deg, double cx, double cy);

  bool operator==(const Intrinsics&) const = default;
};

double focal_from_fov(std::size_t width, double fov_deg);

class Pose {
 public:
  Pose() = default;
  // Throws unless R^T R = I and det R = +1 within 1e-9.
  Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  // Projects an approximately orthonormal matrix onto SO(3) first.
  static Pose orthonormalized(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);
  static Pose identity() { return {}; }

  const Eigen::Matrix3d& rotation() const noexcept { return rotation_; }
  const Eigen::Vector3d& translation() const noexcept { return translation_; }

  Eigen::Vector3d to_world(const Eigen::Vector3d& p_cam) const { return rotation_ * p_cam + translation_; }
  Eigen::Vector3d to_camera(const Eigen::Vector3d& p_world) const {
    return rotation_.transpose() * (p_world - translation_);
  }

  bool operator==(const Pose& o) const { return rotation_ == o.rotation_ && translation_ == o.translation_; }

 private:
  Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
};

bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-9);
Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m);
Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle_rad);

struct CameraRig {
  Intrinsics intrinsics;
  Pose pose_a;
  Pose pose_b;
  double psf_sigma = 0.5;
  std::size_t rays_per_pixel = 4;

  // psf_sigma >= 0, rays_per_pixel >= 1, and a single ray when sigma is zero.
  void validate() const;
};

struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d direction;  // unit
};

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;  // Euclidean camera-center distance
};

Projection project(const Intrinsics& intr, const Pose& pose, const Eigen::Vector3d& world_point);
Eigen::Vector3d unproject(const Intrinsics& intr, const Pose& pose, double u, double v, double depth);

// Unit direction in the camera frame through pixel (u, v).
Eigen::Vector3d camera_direction(const Intrinsics& intr, double u, double v);
Ray pixel_ray(const Intrinsics& intr, const Pose& pose, double u, double v, double du = 0.0, double dv = 0.0);

double gsd(double altitude_m, double fov_deg, std::size_t width_px);

// Pose of b expressed in a's camera frame.
Pose relative_pose(const Pose& a, const Pose& b);
// Inverse of relative_pose: world pose of b from a and the relative pose.
Pose compose(const Pose& a, const Pose& relative);

// Camera at `eye` looking at `target`, image right kept horizontal. For a
// vertical view, `heading_deg` fixes image right (clockwise from +y north).
Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, double heading_deg = 90.0);
// Rotates the camera about its optical axis.
Pose with_roll(const Pose& pose, double roll_deg);

void to_json(nlohmann::json& j, const Pose& p);
void from_json(const nlohmann::json& j, Pose& p);
void to_json(nlohmann::json& j, const Intrinsics& in);
void from_json(const nlohmann::json& j, Intrinsics& in);

}  // namespace lunarforge
