#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "artikin/errors.hpp"
#include "artikin/init_stage.hpp"
#include "artikin/tracks.hpp"
#include "test_util.hpp"

using namespace artikin;

namespace {

constexpr double kEps = 1e-7;

TrackSet single_segment_tracks() {
  // Point 0 static; point 1 steps by 2 once; points 2..3 padding.
  TrackSet tracks = TrackSet::create(4, 3);
  tracks.position(1, 1) = {2, 0, 0};
  tracks.position(1, 2) = {2, 0, 0};
  tracks.position(2, 0) = {0, 1, 0};
  tracks.position(2, 1) = {0, 1, 0};
  tracks.position(2, 2) = {0, 1, 0};
  tracks.position(3, 0) = {0, 0, 3};
  tracks.position(3, 1) = {0, 0, 3};
  tracks.position(3, 2) = {0, 0, 3};
  return tracks;
}

}  // namespace

TEST_CASE("weighted speed follows the visibility-confidence weighting") {
  TrackSet tracks = single_segment_tracks();
  const Eigen::MatrixXd speeds = weighted_speed(tracks);
  CHECK(speeds(0, 0) == 0.0);
  CHECK(speeds(0, 1) == 0.0);
  CHECK(speeds(1, 0) == 2.0);  // full visibility, confidence 1

  tracks.confidence[tracks.index(1, 0)] = 0.5;
  const Eigen::MatrixXd weighted = weighted_speed(tracks);
  CHECK(weighted(1, 0) == doctest::Approx(1.5).epsilon(1e-15));

  tracks.visibility[tracks.index(1, 1)] = 0;
  const Eigen::MatrixXd masked = weighted_speed(tracks);
  CHECK(masked(1, 0) == 0.0);
  CHECK(masked(1, 1) == 0.0);
}

TEST_CASE("motion energy partitions the horizon") {
  SUBCASE("all-zero speeds give all-zero energies") {
    const Eigen::MatrixXd speeds = Eigen::MatrixXd::Zero(5, 10);
    const MotionEnergy e = motion_energy(speeds, 3, 0, 10);
    CHECK(e.segment_energy.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("motion confined to the first half lands in segment 0") {
    Eigen::MatrixXd speeds = Eigen::MatrixXd::Zero(2, 10);
    for (int t = 0; t <= 4; ++t) speeds(0, t) = 1.0;
    const MotionEnergy e = motion_energy(speeds, 3, 0, 10);
    CHECK(e.segment_energy(0, 0) == 5.0);
    CHECK(e.segment_energy(0, 1) == 0.0);
  }
  SUBCASE("K=2 degenerates to the row sum") {
    Eigen::MatrixXd speeds(1, 7);
    speeds << 1, 2, 3, 4, 5, 6, 7;
    const MotionEnergy e = motion_energy(speeds, 2, 0, 7);
    CHECK(e.segment_energy(0, 0) == doctest::Approx(28.0).epsilon(1e-12));
  }
  SUBCASE("remainder intervals go to the earliest segments") {
    const Eigen::MatrixXd speeds = Eigen::MatrixXd::Ones(1, 10);
    const MotionEnergy e = motion_energy(speeds, 4, 0, 10);  // 10 = 4+3+3
    CHECK(e.segment_boundaries[0] == std::pair<int, int>(0, 4));
    CHECK(e.segment_boundaries[1] == std::pair<int, int>(4, 7));
    CHECK(e.segment_boundaries[2] == std::pair<int, int>(7, 10));
  }
  SUBCASE("segment energies sum to the weighted path length in the window") {
    std::mt19937_64 rng(31);
    Eigen::MatrixXd speeds(6, 20);
    for (int i = 0; i < 6; ++i)
      for (int t = 0; t < 20; ++t)
        speeds(i, t) = testutil::uniform(rng, 0.0, 2.0);
    const MotionEnergy e = motion_energy(speeds, 4, 3, 17);
    for (int i = 0; i < 6; ++i) {
      double want = 0.0;
      for (int t = 3; t < 17; ++t) want += speeds(i, t);
      CHECK(e.segment_energy.row(i).sum() ==
            doctest::Approx(want).epsilon(1e-9));
    }
  }
  SUBCASE("more segments than intervals is invalid") {
    const Eigen::MatrixXd speeds = Eigen::MatrixXd::Ones(1, 3);
    CHECK_THROWS_AS(motion_energy(speeds, 5, 0, 3), InvalidInputError);
  }
}

TEST_CASE("temporal assignment thresholds and logits") {
  SUBCASE("zero-energy points are static") {
    Eigen::MatrixXd speeds = Eigen::MatrixXd::Zero(10, 8);
    for (int i = 5; i < 10; ++i)
      for (int t = 0; t < 8; ++t) speeds(i, t) = 1.0 + i;
    const MotionEnergy e = motion_energy(speeds, 3, 0, 8);
    const TemporalAssignment a = assign_parts_temporal(e, 3);
    for (int i = 0; i < 5; ++i) CHECK(a.labels[i] == 0);
    for (int i = 5; i < 10; ++i) CHECK(a.labels[i] != 0);
  }
  SUBCASE("peak segment plus one is the dynamic label") {
    MotionEnergy e;
    e.segment_energy.resize(5, 2);
    e.segment_energy << 0, 5,
                        4, 0,
                        0, 0,
                        0, 0,
                        0, 0;
    const TemporalAssignment a = assign_parts_temporal(e, 3);
    CHECK(a.labels[0] == 2);
    CHECK(a.labels[1] == 1);
    CHECK(a.labels[2] == 0);
  }
  SUBCASE("dynamic logits are the negative log energy fractions") {
    MotionEnergy e;
    e.segment_energy.resize(5, 2);
    e.segment_energy << 1, 3,
                        0, 0,
                        0, 0,
                        0, 0,
                        10, 0;
    const TemporalAssignment a = assign_parts_temporal(e, 3);
    CHECK(a.logits(0, 1) == doctest::Approx(-std::log(0.25 + kEps)).epsilon(1e-12));
    CHECK(a.logits(0, 2) == doctest::Approx(-std::log(0.75 + kEps)).epsilon(1e-12));
  }
  SUBCASE("labels and logits are invariant to uniform energy scaling") {
    std::mt19937_64 rng(32);
    Eigen::MatrixXd speeds(20, 12);
    for (int i = 0; i < 20; ++i)
      for (int t = 0; t < 12; ++t)
        speeds(i, t) = i < 6 ? 0.0 : testutil::uniform(rng, 0.0, 1.0);
    const MotionEnergy e1 = motion_energy(speeds, 3, 0, 12);
    const MotionEnergy e2 = motion_energy(3.7 * speeds, 3, 0, 12);
    const TemporalAssignment a1 = assign_parts_temporal(e1, 3);
    const TemporalAssignment a2 = assign_parts_temporal(e2, 3);
    CHECK(a1.labels == a2.labels);
    CHECK((a1.logits - a2.logits).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("ties break toward the earlier segment") {
    MotionEnergy e;
    e.segment_energy.resize(5, 3);
    e.segment_energy.setZero();
    e.segment_energy.row(0) << 2, 2, 1;
    e.segment_energy.row(1) << 1, 2, 2;
    const TemporalAssignment a = assign_parts_temporal(e, 4);
    CHECK(a.labels[0] == 1);
    CHECK(a.labels[1] == 2);
  }
}

TEST_CASE("motion bases from rigid clusters") {
  const int frames = 10;
  SUBCASE("pure translation gives identity rotations") {
    TrackSet tracks = TrackSet::create(6, frames);
    std::mt19937_64 rng(33);
    std::vector<Eigen::Vector3d> base;
    for (int i = 0; i < 6; ++i) base.push_back(testutil::random_vector(rng));
    for (int i = 0; i < 6; ++i)
      for (int t = 0; t < frames; ++t)
        tracks.position(i, t) = base[i] + t * Eigen::Vector3d(0.1, 0.0, -0.05);
    const std::vector<int> labels(6, 0);
    const Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(6, 1);
    const MotionBasisSet bases = fit_motion_bases(tracks, labels, logits, 0);
    for (int t = 0; t < frames; ++t) {
      CHECK((bases.transform(0, t).rotation - Eigen::Matrix3d::Identity())
                .cwiseAbs()
                .maxCoeff() < 1e-8);
      CHECK((bases.transform(0, t).translation -
             t * Eigen::Vector3d(0.1, 0.0, -0.05))
                .norm() < 1e-8);
    }
  }
  SUBCASE("a quarter-turn cluster yields a quarter-turn basis") {
    TrackSet tracks = TrackSet::create(6, 2);
    std::mt19937_64 rng(34);
    const UnitAxis axis(testutil::random_unit(rng));
    const Eigen::Vector3d pivot = testutil::random_vector(rng);
    const RigidTransform turn =
        revolute_transform(axis, pivot, std::numbers::pi / 2);
    for (int i = 0; i < 6; ++i) {
      const Eigen::Vector3d p = testutil::random_vector(rng);
      tracks.position(i, 0) = p;
      tracks.position(i, 1) = turn.apply(p);
    }
    // T = 2 violates the TrackSet minimum, so build a 3-frame set.
    TrackSet padded = TrackSet::create(6, 3);
    for (int i = 0; i < 6; ++i) {
      padded.position(i, 0) = tracks.position(i, 0);
      padded.position(i, 1) = tracks.position(i, 1);
      padded.position(i, 2) = tracks.position(i, 1);
    }
    const MotionBasisSet bases = fit_motion_bases(
        padded, std::vector<int>(6, 0), Eigen::MatrixXd::Zero(6, 1), 0);
    const Eigen::Matrix3d r = bases.transform(0, 1).rotation;
    const double angle = std::acos(std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0));
    CHECK(angle == doctest::Approx(std::numbers::pi / 2).epsilon(1e-6));
  }
  SUBCASE("static clusters give identity bases") {
    TrackSet tracks = TrackSet::create(5, frames);
    std::mt19937_64 rng(35);
    for (int i = 0; i < 5; ++i) {
      const Eigen::Vector3d p = testutil::random_vector(rng);
      for (int t = 0; t < frames; ++t) tracks.position(i, t) = p;
    }
    const MotionBasisSet bases = fit_motion_bases(
        tracks, std::vector<int>(5, 0), Eigen::MatrixXd::Zero(5, 1), 0);
    for (int t = 0; t < frames; ++t)
      CHECK((bases.transform(0, t).matrix3x4() -
             RigidTransform::identity().matrix3x4())
                .cwiseAbs()
                .maxCoeff() < 1e-8);
  }
  SUBCASE("tiny clusters fall back to centroid translation with a warning") {
    TrackSet tracks = TrackSet::create(4, frames);
    for (int t = 0; t < frames; ++t) {
      tracks.position(0, t) = {0.1 * t, 0, 0};
      tracks.position(1, t) = {0, 0.2 * t, 0};
      tracks.position(2, t) = {0, 0.2 * t, 1};
      tracks.position(3, t) = {1, 0.2 * t, 0};
    }
    std::vector<int> labels = {0, 1, 1, 1};
    const MotionBasisSet bases =
        fit_motion_bases(tracks, labels, Eigen::MatrixXd::Zero(4, 2), 0);
    CHECK(!bases.warnings.empty());
    CHECK((bases.transform(0, 5).rotation - Eigen::Matrix3d::Identity())
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((bases.transform(0, 5).translation - Eigen::Vector3d(0.5, 0, 0))
              .norm() < 1e-12);
  }
  SUBCASE("bases satisfy the rigid-transform invariants at every frame") {
    auto rig = testutil::make_three_part_rig(20, 10, 10, 10);
    NoiseSpec noise;
    noise.position_sigma = 0.01;
    auto [tracks, gt] = synthesize(rig, noise, 55);
    const MotionBasisSet bases = run_stage1(tracks, 3);
    for (int b = 0; b < bases.basis_count; ++b)
      for (int t = 0; t < bases.frame_count; ++t)
        CHECK(bases.transform(b, t).is_valid(1e-9));
    CHECK((bases.transform(0, 0).matrix3x4() -
           RigidTransform::identity().matrix3x4())
              .norm() == 0.0);
    for (int i = 0; i < tracks.point_count; ++i)
      CHECK(bases.weights.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("blend transform") {
  std::mt19937_64 rng(36);
  SUBCASE("one-hot weights return that basis") {
    std::vector<RigidTransform> bases;
    for (int b = 0; b < 3; ++b)
      bases.push_back(testutil::random_transform(rng));
    Eigen::VectorXd w = Eigen::VectorXd::Zero(3);
    w[1] = 1.0;
    const RigidTransform blend = blend_transform(w, bases);
    CHECK((blend.rotation - bases[1].rotation).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((blend.translation - bases[1].translation).norm() == 0.0);
  }
  SUBCASE("identical bases blend to themselves") {
    const RigidTransform t = testutil::random_transform(rng);
    const std::vector<RigidTransform> bases = {t, t};
    Eigen::VectorXd w(2);
    w << 0.3, 0.7;
    const RigidTransform blend = blend_transform(w, bases);
    CHECK((blend.rotation - t.rotation).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((blend.translation - t.translation).norm() < 1e-15);
  }
  SUBCASE("symmetric blend of opposite rotations collapses to identity") {
    const UnitAxis axis(testutil::random_unit(rng));
    std::vector<RigidTransform> bases(2);
    bases[0].rotation = rodrigues(axis, 0.8);
    bases[1].rotation = rodrigues(axis, -0.8);
    Eigen::VectorXd w(2);
    w << 0.5, 0.5;
    const RigidTransform blend = blend_transform(w, bases);
    CHECK((blend.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("reconstruct point") {
  const Eigen::Vector3d mu(1, 2, 3);
  const Eigen::Matrix3d r0 = rodrigues(UnitAxis({0, 0, 1}), 0.5);
  SUBCASE("identity blend") {
    auto [p, r] = reconstruct_point(mu, r0, RigidTransform::identity());
    CHECK((p - mu).norm() == 0.0);
    CHECK((r - r0).norm() == 0.0);
  }
  SUBCASE("pure translation") {
    RigidTransform t;
    t.translation = {0.5, 0, -1};
    auto [p, r] = reconstruct_point(mu, r0, t);
    CHECK((p - (mu + t.translation)).norm() == 0.0);
    CHECK((r - r0).norm() == 0.0);
  }
  SUBCASE("revolute blend about a pivot through the point fixes it") {
    const RigidTransform t =
        revolute_transform(UnitAxis({0, 1, 0}), mu, 1.2);
    auto [p, r] = reconstruct_point(mu, r0, t);
    CHECK((p - mu).norm() < 1e-12);
    (void)r;
  }
}

TEST_CASE("stage 1 end to end reconstructs a noiseless rig") {
  auto rig = testutil::make_three_part_rig(60, 40, 40, 40);
  auto [tracks, gt] = synthesize(rig, NoiseSpec{}, 101);
  const double diagonal = tracks.bounding_box_diagonal();

  const MotionBasisSet bases = run_stage1(tracks, 3);

  // Labels must be exact on noiseless data: the rig is built part-contiguous.
  const auto gt_labels = gt.hard_labels();
  double max_error = 0.0;
  for (int i = 0; i < tracks.point_count; ++i) {
    std::vector<RigidTransform> at_t(bases.basis_count);
    for (int t = 0; t < tracks.frame_count; ++t) {
      for (int b = 0; b < bases.basis_count; ++b)
        at_t[b] = bases.transform(b, t);
      const RigidTransform blend =
          blend_transform(bases.weights.row(i).transpose(), at_t);
      auto [p, r] = reconstruct_point(tracks.position(i, 0),
                                      Eigen::Matrix3d::Identity(), blend);
      max_error = std::max(max_error, (p - tracks.position(i, t)).norm());
      (void)r;
    }
  }
  CHECK(max_error < 1e-6 * diagonal);

  // Static label class is nonempty (all base points have zero energy).
  int static_count = 0;
  const Eigen::MatrixXd speeds = weighted_speed(tracks);
  const MotionEnergy e = motion_energy(speeds, 3, 0, tracks.frame_count - 1);
  const TemporalAssignment a = assign_parts_temporal(e, 3);
  for (int i = 0; i < tracks.point_count; ++i)
    if (a.labels[i] == 0) ++static_count;
  CHECK(static_count >= 40);
  for (int i = 0; i < tracks.point_count; ++i)
    CHECK(a.labels[i] == gt_labels[i]);
}
