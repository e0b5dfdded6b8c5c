#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "artikin/model.hpp"
#include "artikin/tracks.hpp"

namespace artikin {

// Metrics for one ground-truth dynamic part (matched to a predicted part by
// Hungarian assignment on canonical centroids). Distances in scene units;
// the report writer converts to centimeters.
struct PartEval {
  int gt_part = -1;
  int pred_part = -1;  // -1 when unmatched
  JointKind gt_kind = JointKind::kStatic;
  JointKind pred_kind = JointKind::kStatic;
  double axis_error_deg = 0.0;
  double position_error = 0.0;
  bool kind_match = false;
};

struct EvalReport {
  std::vector<PartEval> parts;
  double joint_type_accuracy = 0.0;
  double epe = 0.0;
  double chamfer_whole = 0.0;
  double chamfer_movable = 0.0;
  double chamfer_static = 0.0;
  std::vector<int> unmatched_pred_parts;
  std::vector<int> unmatched_gt_parts;

  double mean_axis_error_deg() const;
  double mean_position_error() const;
};

// Angular deviation in degrees between two unit axes, quotienting out the
// sign gauge: arccos(|<a, b>|) * 180 / pi. Always in [0, 90].
double axis_error(const UnitAxis& pred, const UnitAxis& gt);

// Perpendicular distance from a predicted pivot to the ground-truth axis
// line (pivots are identifiable only up to translation along the axis).
double position_error(const Eigen::Vector3d& pred_pivot,
                      const Eigen::Vector3d& gt_line_point,
                      const UnitAxis& gt_line_direction);

// Mean Euclidean distance over the masked (point, frame) samples. Layout is
// point-major (i * frame_count + t), matching TrackSet storage.
double epe(const std::vector<Eigen::Vector3d>& pred_tracks,
           const std::vector<Eigen::Vector3d>& gt_tracks,
           const std::vector<std::uint8_t>& mask);

// Bi-directional Chamfer distance: mean nearest-neighbor distance a->b plus
// b->a, with exact k-d tree search. Sides larger than 10,000 points are
// deterministically subsampled.
double chamfer(const std::vector<Eigen::Vector3d>& a,
               const std::vector<Eigen::Vector3d>& b);

// Full composite evaluation: Hungarian part matching on canonical
// centroids, per-part axis/position errors and type agreement, EPE over all
// frames of the two forward models, and final-frame Chamfer split by
// ground-truth labels.
EvalReport evaluate(const ArticulatedModel& model,
                    const ArticulatedModel& ground_truth,
                    const TrackSet& tracks);

// Minimum-cost assignment of rows to columns (O(n^3) Hungarian on a
// rectangular cost matrix). Returns, per row, the chosen column or -1.
std::vector<int> hungarian_assignment(const Eigen::MatrixXd& cost);

}  // namespace artikin
