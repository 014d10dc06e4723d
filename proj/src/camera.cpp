#include "lunarforge/camera.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "lunarforge/error.hpp"

namespace lunarforge {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
}

double focal_from_fov(std::size_t width, double fov_deg) {
  return static_cast<double>(width) / (2.0 * std::tan(0.5 * fov_deg * kDegToRad));
}

Intrinsics Intrinsics::from_fov(std::size_t width, std::size_t height, double fov_deg) {
  return from_fov(width, height, fov_deg, 0.5 * static_cast<double>(width) - 0.5,
                  0.5 * static_cast<double>(height) - 0.5);
}

Intrinsics Intrinsics::from_fov(std::size_t width, std::size_t height, double fov_deg, double cx, double cy) {
  if (width == 0 || height == 0) throw Error(Errc::invalid_argument, "image dimensions must be positive");
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw Error(Errc::invalid_argument, "fov_deg must lie in (0, 180)");
  return {width, height, fov_deg, focal_from_fov(width, fov_deg), cx, cy};
}

bool is_rotation(const Eigen::Matrix3d& r, double tol) {
  return (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < tol &&
         std::abs(r.determinant() - 1.0) < tol;
}

Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle_rad) {
  return Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
}

Pose::Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  if (!rotation.allFinite() || !translation.allFinite()) throw Error(Errc::invalid_argument, "pose must be finite");
  if (!is_rotation(rotation)) throw Error(Errc::invalid_argument, "pose rotation is not orthonormal with det +1");
}

Pose Pose::orthonormalized(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation) {
  return Pose(project_to_rotation(rotation), translation);
}

void CameraRig::validate() const {
  if (!(psf_sigma >= 0.0)) throw Error(Errc::invalid_argument, "psf_sigma must be >= 0");
  if (rays_per_pixel < 1) throw Error(Errc::invalid_argument, "rays_per_pixel must be >= 1");
  if (psf_sigma == 0.0 && rays_per_pixel != 1)
    throw Error(Errc::invalid_argument, "a zero-width PSF takes exactly one ray per pixel");
}

Eigen::Vector3d camera_direction(const Intrinsics& intr, double u, double v) {
  return Eigen::Vector3d((u - intr.cx) / intr.focal_px, -(v - intr.cy) / intr.focal_px, -1.0).normalized();
}

Projection project(const Intrinsics& intr, const Pose& pose, const Eigen::Vector3d& world_point) {
  const Eigen::Vector3d pc = pose.to_camera(world_point);
  const double forward = -pc.z();
  if (!(forward > 0.0)) throw Error(Errc::behind_camera, "point is not in front of the camera");
  return {intr.cx + intr.focal_px * pc.x() / forward, intr.cy - intr.focal_px * pc.y() / forward, pc.norm()};
}

Eigen::Vector3d unproject(const Intrinsics& intr, const Pose& pose, double u, double v, double depth) {
  return pose.translation() + depth * (pose.rotation() * camera_direction(intr, u, v));
}

Ray pixel_ray(const Intrinsics& intr, const Pose& pose, double u, double v, double du, double dv) {
  return {pose.translation(), pose.rotation() * camera_direction(intr, u + du, v + dv)};
}

double gsd(double altitude_m, double fov_deg, std::size_t width_px) {
  if (!(altitude_m > 0.0)) throw Error(Errc::invalid_argument, "altitude must be positive");
  return 2.0 * altitude_m * std::tan(0.5 * fov_deg * kDegToRad) / static_cast<double>(width_px);
}

Pose relative_pose(const Pose& a, const Pose& b) {
  const Eigen::Matrix3d rt = a.rotation().transpose();
  return Pose::orthonormalized(rt * b.rotation(), rt * (b.translation() - a.translation()));
}

Pose compose(const Pose& a, const Pose& relative) {
  return Pose::orthonormalized(a.rotation() * relative.rotation(),
                               a.translation() + a.rotation() * relative.translation());
}

Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, double heading_deg) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  const Eigen::Vector3d up(0.0, 0.0, 1.0);
  Eigen::Vector3d right = forward.cross(up);
  if (right.norm() < 1e-9) {
    const double h = heading_deg * kDegToRad;
    right = Eigen::Vector3d(std::sin(h), std::cos(h), 0.0);
  }
  right.normalize();
  const Eigen::Vector3d back = -forward;
  const Eigen::Vector3d cam_up = back.cross(right).normalized();
  Eigen::Matrix3d r;
  r.col(0) = right;
  r.col(1) = cam_up;
  r.col(2) = back;
  return Pose::orthonormalized(r, eye);
}

Pose with_roll(const Pose& pose, double roll_deg) {
  const Eigen::Matrix3d roll = axis_angle(Eigen::Vector3d::UnitZ(), roll_deg * kDegToRad);
  return Pose::orthonormalized(pose.rotation() * roll, pose.translation());
}

void to_json(nlohmann::json& j, const Pose& p) {
  std::vector<double> r;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r.push_back(p.rotation()(i, k));
  j = {{"rotation", r}, {"translation", {p.translation().x(), p.translation().y(), p.translation().z()}}};
}

void from_json(const nlohmann::json& j, Pose& p) {
  const auto r = j.at("rotation").get<std::vector<double>>();
  const auto t = j.at("translation").get<std::vector<double>>();
  if (r.size() != 9 || t.size() != 3) throw Error(Errc::parse_error, "Pose JSON needs 9 rotation and 3 translation numbers");
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) m(i, k) = r[static_cast<std::size_t>(i * 3 + k)];
  // Rotations that drifted in a text round trip are re-projected onto SO(3).
  if (!is_rotation(m, 1e-6)) throw Error(Errc::parse_error, "Pose JSON rotation is not orthonormal");
  const Eigen::Vector3d tv(t[0], t[1], t[2]);
  p = is_rotation(m) ? Pose(m, tv) : Pose::orthonormalized(m, tv);
}

void to_json(nlohmann::json& j, const Intrinsics& in) {
  j = {{"width", in.width}, {"height", in.height}, {"fov_deg", in.fov_deg}, {"cx", in.cx}, {"cy", in.cy}};
}

void from_json(const nlohmann::json& j, Intrinsics& in) {
  in = Intrinsics::from_fov(j.at("width").get<std::size_t>(), j.at("height").get<std::size_t>(),
                            j.at("fov_deg").get<double>(), j.at("cx").get<double>(), j.at("cy").get<double>());
}

}  // namespace lunarforge
