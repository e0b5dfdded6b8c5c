#include "artikin/model.hpp"

#include <cmath>

#include "artikin/errors.hpp"

namespace artikin {

std::string to_string(JointKind kind) {
  switch (kind) {
    case JointKind::kStatic: return "static";
    case JointKind::kRevolute: return "revolute";
    case JointKind::kPrismatic: return "prismatic";
  }
  return "static";
}

JointKind joint_kind_from_string(const std::string& s) {
  if (s == "static") return JointKind::kStatic;
  if (s == "revolute") return JointKind::kRevolute;
  if (s == "prismatic") return JointKind::kPrismatic;
  throw InvalidInputError("unknown joint kind: " + s);
}

int ArticulatedModel::hard_label(int i) const {
  int best = 0;
  double best_value = assignment_logits(i, 0);
  for (int k = 1; k < assignment_logits.cols(); ++k) {
    if (assignment_logits(i, k) > best_value) {
      best_value = assignment_logits(i, k);
      best = k;
    }
  }
  return best;
}

std::vector<int> ArticulatedModel::hard_labels() const {
  std::vector<int> labels(point_count());
  for (int i = 0; i < point_count(); ++i) labels[i] = hard_label(i);
  return labels;
}

Eigen::VectorXd ArticulatedModel::assignment_probabilities(int i) const {
  Eigen::VectorXd scaled = assignment_logits.row(i) / temperature;
  const double m = scaled.maxCoeff();
  Eigen::VectorXd p = (scaled.array() - m).exp();
  return p / p.sum();
}

void ArticulatedModel::validate() const {
  if (parts.empty()) throw InvalidInputError("model: no parts");
  if (parts[0].kind != JointKind::kStatic)
    throw InvalidInputError("model: part 0 must be static");
  const int t = frame_count();
  for (int k = 0; k < part_count(); ++k) {
    const Joint& j = parts[k];
    if (static_cast<int>(j.scalars.size()) != t)
      throw InvalidInputError("model: inconsistent scalar lengths");
    if (canonical_frame < 0 || canonical_frame >= t)
      throw InvalidInputError("model: canonical frame out of range");
    if (std::abs(j.scalars[canonical_frame]) > 0.0)
      throw InvalidInputError("model: nonzero scalar at the canonical frame");
    for (double q : j.scalars)
      if (!std::isfinite(q))
        throw InvalidInputError("model: non-finite scalar");
  }
  if (assignment_logits.rows() != point_count() ||
      assignment_logits.cols() != part_count())
    throw InvalidInputError("model: logits shape mismatch");
  if (!(temperature > 0.0))
    throw InvalidInputError("model: temperature must be positive");
  if (!canonical_orientations.empty() &&
      static_cast<int>(canonical_orientations.size()) != point_count())
    throw InvalidInputError("model: orientation count mismatch");
}

}  // namespace artikin
