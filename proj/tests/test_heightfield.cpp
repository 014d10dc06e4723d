#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "lunarforge/heightfield.hpp"
#include "oracles.hpp"

using namespace lunarforge;

namespace {

double hills(double x, double y) { return 80.0 * std::sin(0.004 * x) * std::cos(0.003 * y) + 0.05 * x; }

}  // namespace

TEST_CASE("flat plane, vertical and slanted rays") {
  const DemGrid dem = oracle::flat_dem(64, 10.0, -120.0);
  const HeightfieldTracer t(dem);
  const auto hit = t.intersect({Eigen::Vector3d(3.3, -7.1, 1000.0), Eigen::Vector3d(0, 0, -1)});
  REQUIRE(hit);
  CHECK(hit->depth == doctest::Approx(1120.0).epsilon(1e-12));
  CHECK(hit->point.z() == doctest::Approx(-120.0).epsilon(1e-12));

  const Eigen::Vector3d d = Eigen::Vector3d(0.3, -0.2, -1.0).normalized();
  const auto h2 = t.intersect({Eigen::Vector3d(0, 0, 500.0), d});
  REQUIRE(h2);
  CHECK(h2->depth == doctest::Approx(620.0 / -d.z()).epsilon(1e-10));
}

TEST_CASE("misses") {
  const DemGrid dem = oracle::flat_dem(16, 10.0, 0.0);
  const HeightfieldTracer t(dem);
  CHECK_FALSE(t.intersect({Eigen::Vector3d(0, 0, 100.0), Eigen::Vector3d(0, 0, 1)}));
  CHECK_FALSE(t.intersect({Eigen::Vector3d(1000, 0, 100.0), Eigen::Vector3d(0, 0, -1)}));
  CHECK_FALSE(t.intersect({Eigen::Vector3d(0, 0, 100.0), Eigen::Vector3d(1, 0, 0)}));
  CHECK_FALSE(t.occluded({Eigen::Vector3d(0, 0, 1.0), Eigen::Vector3d(1, 0, 0.01).normalized()}));
}

TEST_CASE("nodata patches are holes") {
  RasterD z(8, 8, 0.0);
  z(3, 3) = kNoData;
  const DemGrid dem(8, 8, 1.0, 0.0, 7.0, z);
  const HeightfieldTracer t(dem);
  CHECK_FALSE(t.intersect({Eigen::Vector3d(3.0, 4.0, 10.0), Eigen::Vector3d(0, 0, -1)}));
  CHECK(t.intersect({Eigen::Vector3d(5.5, 1.5, 10.0), Eigen::Vector3d(0, 0, -1)}));
}

TEST_CASE("agrees with a fine-step march on rough terrain") {
  const DemGrid dem = oracle::make_dem(120, 120, 25.0, hills);
  const HeightfieldTracer t(dem);
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> u(-1200, 1200), a(-0.8, 0.8);
  int hits = 0;
  for (int i = 0; i < 400; ++i) {
    const Eigen::Vector3d o(u(g), u(g), 1500.0);
    const Eigen::Vector3d d = Eigen::Vector3d(a(g), a(g), -1.0).normalized();
    const auto fast = t.intersect({o, d});
    const auto slow = oracle::march(dem, o, d);
    REQUIRE(fast.has_value() == slow.has_value());
    if (fast) {
      ++hits;
      CHECK(std::abs(fast->depth - *slow) < 2e-3 * dem.cell_size());
      CHECK(std::abs(fast->point.z() - oracle::height_at(dem, fast->point.x(), fast->point.y())) < 1e-6);
    }
  }
  CHECK(hits > 100);
}
