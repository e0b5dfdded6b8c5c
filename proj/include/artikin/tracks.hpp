#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "artikin/model.hpp"

namespace artikin {

// N 3D point trajectories over T frames with per-sample visibility and
// confidence. The sole observational input of the pipeline. Storage is
// row-major per point: sample (i, t) lives at index i * frame_count + t.
struct TrackSet {
  int point_count = 0;
  int frame_count = 0;
  std::vector<Eigen::Vector3d> positions;
  std::vector<std::uint8_t> visibility;
  std::vector<double> confidence;

  static TrackSet create(int n, int t);

  int index(int i, int t) const { return i * frame_count + t; }
  const Eigen::Vector3d& position(int i, int t) const {
    return positions[index(i, t)];
  }
  Eigen::Vector3d& position(int i, int t) { return positions[index(i, t)]; }
  bool visible(int i, int t) const { return visibility[index(i, t)] != 0; }
  double conf(int i, int t) const { return confidence[index(i, t)]; }

  // Axis-aligned bounding box over all samples; returns {min, max}.
  std::pair<Eigen::Vector3d, Eigen::Vector3d> bounding_box() const;
  double bounding_box_diagonal() const;

  // Keeps every `stride`-th frame starting at frame 0.
  TrackSet subsample_frames(int stride) const;

  // Invariant checks (confidence range, finiteness where visible, minimum
  // sizes N >= 4, T >= 3); throws InvalidInputError.
  void validate() const;
};

// Declarative ground-truth rig for the synthetic oracle. Part 0 is the
// static base; dynamic parts articulate inside disjoint activation windows
// and their scalar schedules are constant outside them.
struct RigPart {
  JointKind kind = JointKind::kStatic;
  UnitAxis axis;
  Eigen::Vector3d pivot = Eigen::Vector3d::Zero();
  std::vector<double> schedule;  // length T
  std::vector<Eigen::Vector3d> canonical_points;
  int window_begin = 0;  // inclusive frame bounds, dynamic parts only
  int window_end = 0;
};

struct RigSpec {
  int frame_count = 0;
  std::vector<RigPart> parts;

  int part_count() const { return static_cast<int>(parts.size()); }
  int point_count() const;
  void validate() const;
};

// Observation corruption parameters for the oracle.
struct NoiseSpec {
  double position_sigma = 0.0;   // scene units
  double occlusion_rate = 0.0;   // [0, 1)
  double confidence_floor = 1.0; // [0, 1]

  void validate() const;
};

// Replaces invisible samples: interior gaps by linear interpolation between
// the nearest visible neighbors, leading/trailing gaps by holding the nearest
// visible value. Visibility flags are preserved. Idempotent.
// Throws DegenerateTrackError if a point is visible in fewer than 2 frames.
TrackSet interpolate_occlusions(const TrackSet& tracks);

// Forward-kinematics oracle: canonical clouds moved by their part joints,
// plus i.i.d. Gaussian position noise, random occlusion, and uniform
// confidence in [confidence_floor, 1]. Deterministic for a fixed seed.
// Returns the observed tracks and the exact generating model (scalars
// rebased so the canonical frame carries no articulation).
std::pair<TrackSet, ArticulatedModel> synthesize(const RigSpec& rig,
                                                 const NoiseSpec& noise,
                                                 std::uint64_t seed);

// Text track file: header "ARTIKIN-TRACKS v1 N=<int> T=<int>" followed by
// N*T records "i t x y z v c" sorted by (i, t). See README for the schema.
TrackSet load_tracks(const std::string& path);
void save_tracks(const TrackSet& tracks, const std::string& path);

// Structured key-value rig document; see README for the schema. The parser
// rejects unknown keys. save_rig writes explicit point/schedule values and
// round-trips through load_rig.
RigSpec load_rig(const std::string& path);
void save_rig(const RigSpec& rig, const std::string& path);

// Low-discrepancy box filler used by rig files' "box:" generator: Halton
// sequence (bases 2, 3, 5) scaled into [center - extent, center + extent].
std::vector<Eigen::Vector3d> halton_box_cloud(const Eigen::Vector3d& center,
                                              const Eigen::Vector3d& extent,
                                              int count);

}  // namespace artikin
