#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>

#include "lunarforge/renderer.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace lunarforge;

namespace {

double deep_bowl(double x, double y) { return crater_profile(std::hypot(x, y), 1000.0, 400.0, 40.0); }

RenderSettings pinhole_settings(double az, double el) {
  RenderSettings s;
  s.sun.azimuth = az;
  s.sun.elevation = el;
  s.seed = 5;
  return s;
}

}  // namespace

TEST_CASE("flat plane depth equals the analytic plane intersection") {
  const DemGrid dem = oracle::flat_dem(201, 10.0, 0.0);
  const double h = 1000.0;
  const Intrinsics in = Intrinsics::from_fov(64, 64, 45.0);
  const Pose pose = look_at(Eigen::Vector3d(12.0, -7.0, h), Eigen::Vector3d(12.0, -7.0, 0.0), 30.0);
  const RenderProduct p = render_view(dem, in, pose, 0.0, 1, pinhole_settings(150, 20));
  for (std::size_t r = 0; r < 64; ++r)
    for (std::size_t c = 0; c < 64; ++c) {
      const double a = (static_cast<double>(c) - in.cx) / in.focal_px, b = (static_cast<double>(r) - in.cy) / in.focal_px;
      const double expected = h * std::sqrt(1.0 + a * a + b * b);
      REQUIRE(p.valid_mask(r, c));
      CHECK(std::abs(p.depth(r, c) - expected) <= 1e-6 * expected);
    }
  for (double v : p.image.values()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("depth is finite exactly where the mask is set") {
  const DemGrid dem = oracle::flat_dem(21, 10.0, 0.0);
  const Intrinsics in = Intrinsics::from_fov(48, 48, 60.0);
  const RenderProduct p =
      render_view(dem, in, look_at(Eigen::Vector3d(0, 0, 400.0), Eigen::Vector3d(0, 0, 0), 0.0), 0.5, 4, pinhole_settings(10, 40));
  // PSF rays of a miss pixel may still graze the terrain edge; well away from
  // any valid pixel the image must be black.
  auto near_valid = [&](std::size_t r, std::size_t c) {
    for (std::size_t rr = (r > 5 ? r - 5 : 0); rr <= std::min<std::size_t>(r + 5, 47); ++rr)
      for (std::size_t cc = (c > 5 ? c - 5 : 0); cc <= std::min<std::size_t>(c + 5, 47); ++cc)
        if (p.valid_mask(rr, cc)) return true;
    return false;
  };
  std::size_t invalid = 0, far = 0;
  for (std::size_t r = 0; r < 48; ++r)
    for (std::size_t c = 0; c < 48; ++c) {
      CHECK(std::isfinite(p.depth(r, c)) == (p.valid_mask(r, c) != 0));
      if (p.valid_mask(r, c)) continue;
      ++invalid;
      if (near_valid(r, c)) continue;
      ++far;
      CHECK(p.image(r, c) == 0.0);
    }
  CHECK(invalid > 0);  // the frustum is wider than the DEM
  CHECK(far > 100);
}

TEST_CASE("rendering is independent of the worker count") {
  const DemGrid dem = oracle::make_dem(161, 161, 20.0, deep_bowl);
  const Intrinsics in = Intrinsics::from_fov(96, 96, 45.0);
  const Pose pose = look_at(Eigen::Vector3d(-500, -2500, 3000), Eigen::Vector3d(0, 0, -100));
  RenderSettings s = pinhole_settings(150, 20);
  s.workers = 1;
  const RenderProduct one = render_view(dem, in, pose, 0.5, 4, s, 1);
  s.workers = 3;
  const RenderProduct three = render_view(dem, in, pose, 0.5, 4, s, 1);
  CHECK(one.image == three.image);
  CHECK(one.radiance == three.radiance);
  CHECK(one.valid_mask == three.valid_mask);
  for (std::size_t i = 0; i < one.depth.size(); ++i)
    CHECK(std::memcmp(&one.depth[i], &three.depth[i], sizeof(double)) == 0);
  s.seed = 6;
  CHECK_FALSE(render_view(dem, in, pose, 0.5, 4, s, 1).radiance == one.radiance);
}

TEST_CASE("grazing sun leaves the anti-sun inner wall dark") {
  const DemGrid dem = oracle::make_dem(161, 161, 20.0, deep_bowl);
  const Intrinsics in = Intrinsics::from_fov(101, 101, 45.0);
  const Pose pose = look_at(Eigen::Vector3d(0, 0, 4000), Eigen::Vector3d(0, 0, 0), 90.0);
  const RenderSettings s = pinhole_settings(0.0, 0.1);
  const RenderProduct p = render_view(dem, in, pose, 0.0, 1, s);
  const Eigen::Vector3d sun = sun_direction(s.sun);

  // North inner wall.
  const Projection wall = project(in, pose, Eigen::Vector3d(0, 700, deep_bowl(0, 700)));
  CHECK(p.image(static_cast<std::size_t>(std::lround(wall.v)), static_cast<std::size_t>(std::lround(wall.u))) == 0.0);

  // Every pixel that stays occluded even when lifted by a tenth of a cell is black.
  int dark = 0;
  for (std::size_t r = 0; r < 101; r += 2)
    for (std::size_t c = 0; c < 101; c += 2) {
      if (!p.valid_mask(r, c)) continue;
      const Ray ray = pixel_ray(in, pose, static_cast<double>(c), static_cast<double>(r));
      const Eigen::Vector3d x = ray.origin + p.depth(r, c) * ray.direction + Eigen::Vector3d(0, 0, 2.0);
      if (oracle::segment_blocked(dem, x, x + 1e5 * sun, 0.0)) {
        ++dark;
        CHECK(p.radiance(r, c) == 0.0);
      }
    }
  CHECK(dark > 200);
}

TEST_CASE("pointmaps") {
  const DemGrid dem = oracle::flat_dem(101, 10.0, 0.0);
  const Intrinsics in = Intrinsics::from_fov(129, 129, 45.0);
  const Pose pose = look_at(Eigen::Vector3d(3, 4, 600.0), Eigen::Vector3d(3, 4, 0.0), 0.0);
  const RenderProduct p = render_view(dem, in, pose, 0.0, 1, pinhole_settings(150, 20));

  const PointMap world = depth_to_pointmap(p, PointFrame::world, Pose::identity());
  for (std::size_t i = 0; i < world.points.size(); ++i) {
    if (!world.valid_mask[i]) continue;
    CHECK(std::abs(world.points[i].z()) < 1e-6);
  }

  const PointMap own = depth_to_pointmap(p, PointFrame::view1, pose);
  CHECK(in.cx == 64.0);
  const Eigen::Vector3d centre = own.at(64, 64);
  CHECK(std::abs(centre.x()) < 1e-12);
  CHECK(std::abs(centre.y()) < 1e-12);
  CHECK(centre.z() == doctest::Approx(-p.depth(64, 64)).epsilon(1e-15));

  for (std::size_t r = 0; r < 129; r += 3)
    for (std::size_t c = 0; c < 129; c += 3) {
      if (!world.valid_mask(r, c)) continue;
      const Projection pr = project(in, pose, world.at(r, c));
      CHECK(std::abs(pr.u - static_cast<double>(c)) < 1e-3);
      CHECK(std::abs(pr.v - static_cast<double>(r)) < 1e-3);
    }
}

TEST_CASE("correspondences for identical poses are the identity") {
  const DemGrid dem = oracle::make_dem(161, 161, 20.0, deep_bowl);
  const Intrinsics in = Intrinsics::from_fov(64, 64, 45.0);
  const Pose pose = look_at(Eigen::Vector3d(0, 0, 3500), Eigen::Vector3d(0, 0, 0), 0.0);
  const RenderProduct p = render_view(dem, in, pose, 0.0, 1, pinhole_settings(150, 20));
  const CorrespondenceSet set = gt_correspondences(p, p);
  std::size_t valid = 0;
  for (auto m : p.valid_mask.values()) valid += m;
  CHECK(set.pairs.size() == valid);
  for (const auto& m : set.pairs) {
    CHECK(std::abs(m.u2 - m.u1) < 1e-6);
    CHECK(std::abs(m.v2 - m.v1) < 1e-6);
  }
  CHECK(set.source == CorrespondenceSource::ground_truth);
  CHECK(set.occlusion_filtered);
}

TEST_CASE("pure translation over flat ground gives the stereo disparity") {
  const DemGrid dem = oracle::flat_dem(201, 10.0, 0.0);
  const double h = 900.0;
  const Intrinsics in = Intrinsics::from_fov(64, 64, 45.0);
  const Pose a = look_at(Eigen::Vector3d(0, 0, h), Eigen::Vector3d(0, 0, 0), 90.0);
  const Pose b(a.rotation(), a.translation() + a.rotation() * Eigen::Vector3d(100, 0, 0));
  const RenderProduct pa = render_view(dem, in, a, 0.0, 1, pinhole_settings(150, 20), 0);
  const RenderProduct pb = render_view(dem, in, b, 0.0, 1, pinhole_settings(150, 20), 1);
  const CorrespondenceSet set = gt_correspondences(pa, pb, 2);
  CHECK(set.pairs.size() > 500);
  const double disparity = in.focal_px * 100.0 / h;
  const Pose rel = relative_pose(a, b);
  const Eigen::Vector3d t = rel.translation().normalized();
  Eigen::Matrix3d tx;
  tx << 0, -t.z(), t.y(), t.z(), 0, -t.x(), -t.y(), t.x(), 0;
  const Eigen::Matrix3d E = tx * rel.rotation();
  for (const auto& m : set.pairs) {
    CHECK(std::abs((m.u1 - m.u2) - disparity) < 0.5);
    CHECK(std::abs(m.v1 - m.v2) < 0.5);
    const Eigen::Vector3d x1 = camera_direction(in, m.u1, m.v1), x2 = camera_direction(in, m.u2, m.v2);
    CHECK(std::abs((x1 / -x1.z()).dot(E * (x2 / -x2.z()))) < 1e-6);
    CHECK(m.u2 >= -0.5);
    CHECK(m.u2 <= 63.5);
  }
}

TEST_CASE("occluded crater wall points get no correspondence") {
  const DemGrid dem = oracle::make_dem(161, 161, 20.0, deep_bowl);
  const Intrinsics in = Intrinsics::from_fov(128, 128, 45.0);
  const Pose a = look_at(Eigen::Vector3d(0, 0, 4000), Eigen::Vector3d(0, 0, 0), 90.0);
  const Pose b = look_at(Eigen::Vector3d(0, -8000, 2500), Eigen::Vector3d(0, 0, -200));  // low, so the south wall hides the floor
  const RenderSettings s = pinhole_settings(150, 20);
  const RenderProduct pa = render_view(dem, in, a, 0.0, 1, s, 0);
  const RenderProduct pb = render_view(dem, in, b, 0.0, 1, s, 1);
  const CorrespondenceSet set = gt_correspondences(pa, pb);

  std::vector<char> kept(128 * 128, 0);
  for (const auto& m : set.pairs) kept[static_cast<std::size_t>(m.v1) * 128 + static_cast<std::size_t>(m.u1)] = 1;

  int hidden = 0, visible_kept = 0;
  for (std::size_t r = 0; r < 128; r += 3)
    for (std::size_t c = 0; c < 128; c += 3) {
      if (!pa.valid_mask(r, c)) continue;
      const Ray ray = pixel_ray(in, a, static_cast<double>(c), static_cast<double>(r));
      const Eigen::Vector3d x = ray.origin + pa.depth(r, c) * ray.direction;
      const Projection pr = project(in, b, x);
      if (pr.u < 0 || pr.v < 0 || pr.u > 127 || pr.v > 127) continue;
      const double tol = gsd(pr.depth, in.fov_deg, in.width);
      // Brute-force depth seen by b at the four pixels around the projection.
      bool all_closer = true;
      for (double du : {std::floor(pr.u), std::ceil(pr.u)})
        for (double dv : {std::floor(pr.v), std::ceil(pr.v)}) {
          const Ray rb = pixel_ray(in, b, du, dv);
          const auto hit = oracle::march(dem, rb.origin, rb.direction);
          if (!hit || *hit > pr.depth - tol - 1.0) all_closer = false;
        }
      if (all_closer) {
        ++hidden;
        CHECK_FALSE(kept[r * 128 + c]);
      } else if (kept[r * 128 + c]) {
        ++visible_kept;
      }
    }
  CHECK(hidden > 50);
  CHECK(visible_kept > 200);
}

TEST_CASE("camera under the terrain is rejected") {
  const DemGrid dem = oracle::flat_dem(21, 10.0, 50.0);
  const Intrinsics in = Intrinsics::from_fov(16, 16, 45.0);
  const Pose pose = look_at(Eigen::Vector3d(0, 0, 10.0), Eigen::Vector3d(0, 0, -100.0), 0.0);
  CHECK(testing::error_code_of([&] { render_view(dem, in, pose, 0.0, 1, pinhole_settings(0, 45)); }) ==
        Errc::camera_below_terrain);
}

TEST_CASE("exposure gain and sample_depth") {
  RasterD rad(10, 10, 0.0);
  for (std::size_t i = 0; i < 100; ++i) rad[i] = static_cast<double>(i);
  CHECK(exposure_gain(rad) == doctest::Approx(1.0 / 99.0));  // nearest rank over the 99 positive samples
  CHECK(exposure_gain(RasterD(3, 3, 0.0)) == 1.0);

  RasterD d(3, 3, 1.0);
  d(1, 1) = 5.0;
  CHECK(sample_depth(d, 0.5, 0.5) == doctest::Approx(2.0));
  CHECK(sample_depth(d, 1.0, 1.0) == 5.0);
  d(0, 0) = kNoData;
  CHECK(std::isnan(sample_depth(d, 0.5, 0.5)));
  CHECK(std::isnan(sample_depth(d, 2.5, 1.0)));
}
