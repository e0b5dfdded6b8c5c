#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

#include "artikin/errors.hpp"
#include "artikin/geom.hpp"
#include "test_util.hpp"

using namespace artikin;
using testutil::random_unit;
using testutil::random_vector;
using testutil::uniform;

namespace {

// Oracle: matrix exponential of theta * [a]x by a 20-term Taylor series.
Eigen::Matrix3d exp_taylor(const Eigen::Vector3d& axis, double angle) {
  const Eigen::Matrix3d x = skew(axis) * angle;
  Eigen::Matrix3d sum = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d term = Eigen::Matrix3d::Identity();
  for (int j = 1; j < 25; ++j) {
    term = (term * x) / j;
    sum += term;
  }
  return sum;
}

double weighted_residual(const std::vector<Eigen::Vector3d>& src,
                         const std::vector<Eigen::Vector3d>& dst,
                         const std::vector<double>& w,
                         const RigidTransform& t) {
  double r = 0.0;
  for (size_t i = 0; i < src.size(); ++i)
    r += w[i] * (t.apply(src[i]) - dst[i]).squaredNorm();
  return r;
}

// Oracle: dense grid search over rotation axis (5 degree spherical grid) and
// angle (5 degree steps), translation solved in closed form per rotation.
double grid_search_residual(const std::vector<Eigen::Vector3d>& src,
                            const std::vector<Eigen::Vector3d>& dst,
                            const std::vector<double>& w) {
  double total = 0.0;
  Eigen::Vector3d cs = Eigen::Vector3d::Zero(), cd = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < src.size(); ++i) {
    total += w[i];
    cs += w[i] * src[i];
    cd += w[i] * dst[i];
  }
  cs /= total;
  cd /= total;

  double best = std::numeric_limits<double>::infinity();
  const double step = 5.0 * std::numbers::pi / 180.0;
  for (double theta = 0.0; theta <= std::numbers::pi + 1e-9; theta += step) {
    for (double phi = 0.0; phi < 2.0 * std::numbers::pi - 1e-9; phi += step) {
      const Eigen::Vector3d axis(std::sin(theta) * std::cos(phi),
                                 std::sin(theta) * std::sin(phi),
                                 std::cos(theta));
      for (double angle = 0.0; angle <= std::numbers::pi + 1e-9;
           angle += step) {
        RigidTransform t;
        t.rotation = rodrigues(UnitAxis(axis), angle);
        t.translation = cd - t.rotation * cs;
        best = std::min(best, weighted_residual(src, dst, w, t));
      }
      if (theta == 0.0) break;  // pole: phi is redundant
    }
  }
  return best;
}

}  // namespace

TEST_CASE("rodrigues identity and quarter turn") {
  const Eigen::Matrix3d r0 = rodrigues(UnitAxis({0, 0, 1}), 0.0);
  CHECK((r0 - Eigen::Matrix3d::Identity()).norm() == 0.0);

  const Eigen::Matrix3d r =
      rodrigues(UnitAxis({0, 0, 1}), std::numbers::pi / 2);
  const Eigen::Vector3d y = r * Eigen::Vector3d(1, 0, 0);
  CHECK((y - Eigen::Vector3d(0, 1, 0)).norm() < 1e-15);
}

TEST_CASE("rodrigues fixes its axis") {
  std::mt19937_64 rng(11);
  for (int c = 0; c < 100; ++c) {
    const UnitAxis a(random_unit(rng));
    const Eigen::Matrix3d r = rodrigues(a, uniform(rng, -6.0, 6.0));
    CHECK((r * a.direction() - a.direction()).norm() < 1e-12);
  }
}

TEST_CASE("rodrigues matches a Taylor-series matrix exponential") {
  const Eigen::Vector3d axis = Eigen::Vector3d(1, 1, 1).normalized();
  const Eigen::Matrix3d got = rodrigues(UnitAxis(axis), 0.7);
  const Eigen::Matrix3d want = exp_taylor(axis, 0.7);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-10);

  std::mt19937_64 rng(12);
  for (int c = 0; c < 50; ++c) {
    const Eigen::Vector3d a = random_unit(rng);
    const double angle = uniform(rng, -2.0, 2.0);
    CHECK((rodrigues(UnitAxis(a), angle) - exp_taylor(a, angle))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
  }
}

TEST_CASE("rodrigues rejects a non-finite angle") {
  CHECK_THROWS_AS(rodrigues(UnitAxis({0, 0, 1}),
                            std::numeric_limits<double>::quiet_NaN()),
                  InvalidInputError);
}

TEST_CASE("rodrigues inverse and periodicity properties") {
  std::mt19937_64 rng(13);
  for (int c = 0; c < 1000; ++c) {
    const UnitAxis a(random_unit(rng));
    const double angle = uniform(rng, -8.0, 8.0);
    const Eigen::Matrix3d fwd = rodrigues(a, angle);
    const Eigen::Matrix3d back = rodrigues(a, -angle);
    CHECK((fwd * back - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <
          1e-10);
    const Eigen::Matrix3d wrapped =
        rodrigues(a, angle + 2.0 * std::numbers::pi);
    CHECK((fwd - wrapped).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("revolute transform fixes the pivot and the whole axis line") {
  SUBCASE("angle zero is the identity") {
    const RigidTransform t =
        revolute_transform(UnitAxis({0, 1, 0}), {1, 2, 3}, 0.0);
    CHECK((t.rotation - Eigen::Matrix3d::Identity()).norm() == 0.0);
    CHECK(t.translation.norm() == 0.0);
  }
  SUBCASE("pi about a pivot reflects the origin through it") {
    const RigidTransform t =
        revolute_transform(UnitAxis({0, 0, 1}), {1, 0, 0}, std::numbers::pi);
    CHECK((t.apply({0, 0, 0}) - Eigen::Vector3d(2, 0, 0)).norm() < 1e-12);
  }
  SUBCASE("hand-computed quarter turn about a y-axis line") {
    // exp(theta [y]x) at +90 degrees maps x-hat to -z-hat.
    const RigidTransform t = revolute_transform(UnitAxis({0, 1, 0}), {2, 0, 0},
                                                std::numbers::pi / 2);
    CHECK((t.apply({3, 0, 0}) - Eigen::Vector3d(2, 0, -1)).norm() < 1e-12);
  }
  SUBCASE("every point on the axis line is fixed") {
    std::mt19937_64 rng(14);
    for (int c = 0; c < 1000; ++c) {
      const UnitAxis a(random_unit(rng));
      const Eigen::Vector3d pivot = random_vector(rng, 2.0);
      const RigidTransform t =
          revolute_transform(a, pivot, uniform(rng, -3.0, 3.0));
      for (double s : {-2.0, -0.5, 0.0, 1.0, 3.0}) {
        const Eigen::Vector3d p = pivot + s * a.direction();
        CHECK((t.apply(p) - p).norm() < 1e-10);
      }
    }
  }
}

TEST_CASE("prismatic transform translates along the axis") {
  CHECK((prismatic_transform(UnitAxis({1, 0, 0}), 0.0).matrix3x4() -
         RigidTransform::identity().matrix3x4())
            .norm() == 0.0);
  const RigidTransform t = prismatic_transform(UnitAxis({1, 0, 0}), 2.5);
  CHECK((t.apply({0, 1, 0}) - Eigen::Vector3d(2.5, 1, 0)).norm() == 0.0);
  const RigidTransform back = prismatic_transform(UnitAxis({1, 0, 0}), -2.5);
  CHECK(((back * t).matrix3x4() - RigidTransform::identity().matrix3x4())
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("weighted procrustes recovers an exact rigid pair") {
  std::mt19937_64 rng(15);
  const RigidTransform want = testutil::random_transform(rng);
  std::vector<Eigen::Vector3d> src, dst;
  std::vector<double> w;
  for (int i = 0; i < 20; ++i) {
    src.push_back(random_vector(rng, 2.0));
    dst.push_back(want.apply(src.back()));
    w.push_back(1.0);
  }
  const RigidTransform got = weighted_procrustes(src, dst, w);
  CHECK((got.rotation - want.rotation).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((got.translation - want.translation).norm() < 1e-9);

  const RigidTransform self = weighted_procrustes(src, src, w);
  CHECK((self.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK(self.translation.norm() < 1e-12);
}

TEST_CASE("weighted procrustes beats a dense grid-search oracle") {
  std::mt19937_64 rng(16);
  const RigidTransform truth = testutil::random_transform(rng, 2.0, 1.0);
  std::vector<Eigen::Vector3d> src, dst;
  std::vector<double> w;
  for (int i = 0; i < 50; ++i) {
    src.push_back(random_vector(rng, 1.0));
    dst.push_back(truth.apply(src.back()) + 0.01 * random_vector(rng));
    w.push_back(1.0);
  }
  const RigidTransform got = weighted_procrustes(src, dst, w);
  const double ours = weighted_residual(src, dst, w, got);
  const double grid = grid_search_residual(src, dst, w);
  CHECK(ours <= grid);
}

TEST_CASE("weighted procrustes rejects degenerate geometry") {
  std::vector<Eigen::Vector3d> line, moved;
  std::vector<double> w;
  for (int i = 0; i < 10; ++i) {
    line.push_back({static_cast<double>(i), 0.0, 0.0});
    moved.push_back({static_cast<double>(i), 1.0, 0.0});
    w.push_back(1.0);
  }
  CHECK_THROWS_AS(weighted_procrustes(line, moved, w),
                  DegenerateGeometryError);
  try {
    weighted_procrustes(line, moved, w);
  } catch (const DegenerateGeometryError& e) {
    CHECK(e.rank() == 1);
  }

  std::vector<double> two_effective = w;
  for (size_t i = 2; i < two_effective.size(); ++i) two_effective[i] = 0.0;
  std::vector<Eigen::Vector3d> cloud = line;
  cloud[1] = {0.5, 2.0, 1.0};
  CHECK_THROWS_AS(weighted_procrustes(cloud, moved, two_effective),
                  DegenerateGeometryError);
}

TEST_CASE("weighted procrustes is left-equivariant") {
  std::mt19937_64 rng(17);
  for (int c = 0; c < 1000; ++c) {
    std::vector<Eigen::Vector3d> src, dst, dst2;
    std::vector<double> w;
    for (int i = 0; i < 8; ++i) {
      src.push_back(random_vector(rng, 1.5));
      dst.push_back(random_vector(rng, 1.5));
      w.push_back(uniform(rng, 0.1, 1.0));
    }
    const RigidTransform t0 = testutil::random_transform(rng);
    for (const auto& d : dst) dst2.push_back(t0.apply(d));
    const RigidTransform base = weighted_procrustes(src, dst, w);
    const RigidTransform shifted = weighted_procrustes(src, dst2, w);
    const RigidTransform want = t0 * base;
    CHECK((shifted.matrix3x4() - want.matrix3x4()).cwiseAbs().maxCoeff() <
          1e-8);
  }
}

TEST_CASE("project_to_se3 basics") {
  std::mt19937_64 rng(18);
  SUBCASE("a rotation passes through unchanged") {
    for (int c = 0; c < 100; ++c) {
      const Eigen::Matrix3d r =
          rodrigues(UnitAxis(random_unit(rng)), uniform(rng, -3.0, 3.0));
      const RigidTransform p = project_to_se3(r, {1, 2, 3});
      CHECK((p.rotation - r).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((p.translation - Eigen::Vector3d(1, 2, 3)).norm() == 0.0);
    }
  }
  SUBCASE("mean of two same-axis rotations projects to the mean angle") {
    const UnitAxis a(Eigen::Vector3d(0.3, -0.5, 1.2).normalized());
    const double t1 = 0.4, t2 = 1.3;
    const Eigen::Matrix3d blend =
        0.5 * (rodrigues(a, t1) + rodrigues(a, t2));
    const RigidTransform p = project_to_se3(blend, Eigen::Vector3d::Zero());
    CHECK((p.rotation - rodrigues(a, 0.5 * (t1 + t2))).cwiseAbs().maxCoeff() <
          1e-12);
  }
  SUBCASE("negative-determinant input maps to det +1") {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(2, 2) = -1.0;
    const RigidTransform p = project_to_se3(m, Eigen::Vector3d::Zero());
    CHECK(p.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("zero matrix is degenerate") {
    CHECK_THROWS_AS(
        project_to_se3(Eigen::Matrix3d::Zero(), Eigen::Vector3d::Zero()),
        DegenerateGeometryError);
  }
  SUBCASE("idempotence") {
    for (int c = 0; c < 1000; ++c) {
      Eigen::Matrix3d m;
      for (int r = 0; r < 3; ++r) m.row(r) = random_vector(rng).transpose();
      if (m.norm() == 0.0) continue;
      const RigidTransform once = project_to_se3(m, Eigen::Vector3d::Zero());
      const RigidTransform twice =
          project_to_se3(once.rotation, Eigen::Vector3d::Zero());
      CHECK((once.rotation - twice.rotation).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(once.is_valid(1e-9));
    }
  }
}

TEST_CASE("pca on planar, collinear, and random sets") {
  SUBCASE("circle in the z=0 plane") {
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < 40; ++i) {
      const double a = 2.0 * std::numbers::pi * i / 40.0;
      pts.push_back({std::cos(a), std::sin(a), 0.0});
    }
    const PcaResult r = pca(pts);
    CHECK(std::abs(std::abs(r.component(2).z()) - 1.0) < 1e-12);
    CHECK(r.eigenvalues[2] < 1e-12);
  }
  SUBCASE("collinear points") {
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < 10; ++i)
      pts.push_back({0.3 * i, 0.0, 0.0});
    const PcaResult r = pca(pts);
    CHECK(r.eigenvalues[1] < 1e-12);
    CHECK(r.eigenvalues[2] < 1e-12);
  }
  SUBCASE("eigenvalues match a direct-summation covariance oracle") {
    std::mt19937_64 rng(19);
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < 100; ++i) pts.push_back(random_vector(rng, 2.0));

    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
    cov /= static_cast<double>(pts.size());

    const PcaResult r = pca(pts);
    CHECK(std::abs(r.eigenvalues.sum() - cov.trace()) < 1e-9);
    CHECK(std::abs(r.eigenvalues.prod() - cov.determinant()) < 1e-9);
  }
  SUBCASE("fewer than 3 points is invalid") {
    CHECK_THROWS_AS(pca({{0, 0, 0}, {1, 1, 1}}), InvalidInputError);
  }
}

TEST_CASE("pca eigenvalue sum equals total centered variance") {
  std::mt19937_64 rng(20);
  for (int c = 0; c < 1000; ++c) {
    std::vector<Eigen::Vector3d> pts;
    const int n = 3 + static_cast<int>(uniform(rng, 0.0, 30.0));
    for (int i = 0; i < n; ++i) pts.push_back(random_vector(rng, 3.0));
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& p : pts) mean += p;
    mean /= n;
    double variance = 0.0;
    for (const auto& p : pts) variance += (p - mean).squaredNorm();
    variance /= n;
    const PcaResult r = pca(pts);
    CHECK(std::abs(r.eigenvalues.sum() - variance) < 1e-9);
  }
}

TEST_CASE("unit axis construction") {
  const UnitAxis a({3.0, 0.0, 0.0});
  CHECK(std::abs(a.direction().norm() - 1.0) < 1e-9);
  CHECK((a.direction() - Eigen::Vector3d(1, 0, 0)).norm() < 1e-9);
  // The epsilon guard keeps the zero vector finite.
  const UnitAxis z({0.0, 0.0, 0.0});
  CHECK(z.direction().allFinite());
}
