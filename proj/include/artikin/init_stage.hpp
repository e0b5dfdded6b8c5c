#pragma once

#include <Eigen/Core>

#include <string>
#include <utility>
#include <vector>

#include "artikin/geom.hpp"
#include "artikin/tracks.hpp"

namespace artikin {

// Per-point weighted speeds and their accumulation into the K-1 temporal
// segments of the motion horizon.
struct MotionEnergy {
  Eigen::MatrixXd weighted_speeds;  // N x (T-1)
  Eigen::MatrixXd segment_energy;   // N x (K-1)
  // Half-open ranges of interval indices (speed columns) per segment; they
  // partition [horizon_begin, horizon_end).
  std::vector<std::pair<int, int>> segment_boundaries;
  int horizon_begin = 0;  // frames; intervals [begin, end) are covered
  int horizon_end = 0;
};

// K-group temporal assignment: hard labels plus soft-assignment logits d_i
// (slot 0 static, slot 1+s for temporal segment s).
struct TemporalAssignment {
  std::vector<int> labels;   // N values in [0, K)
  Eigen::MatrixXd logits;    // N x K, the distances d_i
  double static_threshold = 0.0;  // the energy percentile tau
};

// B shared per-frame SE(3) trajectories plus per-point blend coefficients.
// weights = softmax(-logits) row-wise; transform(b, t0) is the identity.
struct MotionBasisSet {
  int basis_count = 0;
  int frame_count = 0;
  int canonical_frame = 0;
  std::vector<RigidTransform> transforms;  // index b * frame_count + t
  Eigen::MatrixXd logits;   // N x B
  Eigen::MatrixXd weights;  // N x B
  std::vector<std::string> warnings;

  const RigidTransform& transform(int b, int t) const {
    return transforms[b * frame_count + t];
  }
};

// Weighted speed of every point over every interval:
//   s(i, t) = |x(i, t+1) - x(i, t)| * w(i, t),
//   w(i, t) = v(i, t) * v(i, t+1) * (c(i, t) + c(i, t+1)) / 2.
// Expects occlusion-interpolated tracks.
Eigen::MatrixXd weighted_speed(const TrackSet& tracks);

// Accumulates speeds into K-1 segments that split the horizon's intervals as
// equally as possible (remainders go to the earliest segments). The horizon
// is the inclusive frame range [horizon_begin, horizon_end].
MotionEnergy motion_energy(const Eigen::MatrixXd& speeds, int part_count,
                           int horizon_begin, int horizon_end);

// Static/dynamic labeling by the 20th-percentile energy threshold and the
// peak-energy segment, with negative-log-probability logits.
TemporalAssignment assign_parts_temporal(const MotionEnergy& energy,
                                         int part_count);

// One basis per label class: weighted Procrustes from the canonical frame to
// every frame. Classes with fewer than 3 points (or degenerate geometry)
// fall back to a centroid-translation basis and record a warning. `logits`
// (N x K) are copied into the basis set as the per-point coefficients.
MotionBasisSet fit_motion_bases(const TrackSet& tracks,
                                const std::vector<int>& labels,
                                const Eigen::MatrixXd& logits,
                                int canonical_frame, int threads = 1);

// Softmax-weighted combination of the bases at one frame, re-projected onto
// SE(3) (rotation only; translation blends linearly).
RigidTransform blend_transform(const Eigen::VectorXd& weights,
                               const std::vector<RigidTransform>& bases_at_t);

// Canonical state moved by a blended transform.
std::pair<Eigen::Vector3d, Eigen::Matrix3d> reconstruct_point(
    const Eigen::Vector3d& canonical_position,
    const Eigen::Matrix3d& canonical_orientation, const RigidTransform& blend);

// Full Stage 1: weighted speeds -> segment energies -> temporal labels ->
// Procrustes bases. Horizon of -1 means the whole sequence.
MotionBasisSet run_stage1(const TrackSet& tracks, int part_count,
                          int horizon_begin = 0, int horizon_end = -1,
                          int canonical_frame = 0, int threads = 1);

// Debug dump of a basis set (structured text, write-only).
void save_motion_bases(const MotionBasisSet& bases, const std::string& path);

}  // namespace artikin
