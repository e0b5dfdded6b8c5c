#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "artikin/geom.hpp"

namespace artikin {

enum class JointKind { kStatic, kRevolute, kPrismatic };

std::string to_string(JointKind kind);
JointKind joint_kind_from_string(const std::string& s);

// One articulated part: a joint plus its per-frame scalar sequence.
// scalars[t] is radians for revolute and scene units for prismatic; the
// canonical frame carries no articulation (scalars[t0] = 0). Axis and pivot
// are meaningless for static parts and the pivot is a reporting convention
// for prismatic ones.
struct Joint {
  JointKind kind = JointKind::kStatic;
  UnitAxis axis;
  Eigen::Vector3d pivot = Eigen::Vector3d::Zero();
  std::vector<double> scalars;

  RigidTransform transform(int t) const {
    switch (kind) {
      case JointKind::kRevolute:
        return revolute_transform(axis, pivot, scalars[t]);
      case JointKind::kPrismatic:
        return prismatic_transform(axis, scalars[t]);
      default:
        return RigidTransform::identity();
    }
  }
};

// Explicit articulated kinematic model: K parts (part 0 static), canonical
// geometry at frame t0, and per-point soft assignment logits z (N x K).
// Hard labels are argmax softmax(z / temperature) with ties broken toward
// the lower part index.
struct ArticulatedModel {
  std::vector<Joint> parts;
  std::vector<Eigen::Vector3d> canonical_points;
  // Empty means identity for every point.
  std::vector<Eigen::Matrix3d> canonical_orientations;
  Eigen::MatrixXd assignment_logits;  // N x K
  double temperature = 1.0;
  int canonical_frame = 0;

  int part_count() const { return static_cast<int>(parts.size()); }
  int point_count() const { return static_cast<int>(canonical_points.size()); }
  int frame_count() const {
    return parts.empty() ? 0 : static_cast<int>(parts[0].scalars.size());
  }

  int hard_label(int i) const;
  std::vector<int> hard_labels() const;

  // Softmax(z_i / temperature).
  Eigen::VectorXd assignment_probabilities(int i) const;

  RigidTransform part_transform(int k, int t) const {
    return parts[k].transform(t);
  }

  // Sanity checks on the invariants above; throws InvalidInputError.
  void validate() const;
};

}  // namespace artikin
